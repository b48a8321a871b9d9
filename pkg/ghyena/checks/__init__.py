from ghyena.checks.suites import SUITES, format_report, growth_exponent, run_suite

__all__ = ["SUITES", "format_report", "growth_exponent", "run_suite"]
