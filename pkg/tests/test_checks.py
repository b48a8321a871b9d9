import math

import numpy as np
import pytest

from ghyena.autodiff import get_default_dtype, set_default_dtype
from ghyena.checks import format_report, growth_exponent, run_suite
from ghyena.checks.suites import _record, _small_block_config
from ghyena.schemas.config import ABLATION_ROWS, CheckConfig
from ghyena.schemas.records import CheckReport


def test_record_bounds():
    report = CheckReport(suite="demo")
    assert _record(report, "upper", 1e-9, 1e-8).passed
    assert not _record(report, "upper miss", 1e-7, 1e-8).passed
    assert _record(report, "lower", 3.0, 2.5, lower_bound=True).passed
    assert not report.passed
    assert [r.invariant for r in report.failures] == ["upper miss"]


def test_format_report_marks_failures():
    report = CheckReport(suite="demo")
    _record(report, "holds", 0.0, 1.0)
    _record(report, "breaks", 2.0, 1.0, "detail here")
    lines = format_report(report).splitlines()
    assert lines[0] == "suite demo: FAIL"
    assert lines[1].strip().startswith("ok")
    assert lines[2].strip().startswith("FAIL breaks")
    assert lines[2].endswith("detail here")


def test_equivariance_suite_passes():
    report = run_suite(CheckConfig(suite="equivariance", rotations=3))
    assert report.passed, format_report(report)
    names = {r.invariant for r in report.results}
    assert "model readout is SE(3) equivariant" in names
    assert "hyena block vectors are SE(3) equivariant" in names


def test_oracle_suite_passes():
    report = run_suite(CheckConfig(suite="oracle", oracle_lengths=[1, 2, 3, 5, 8, 16]))
    assert report.passed, format_report(report)
    assert len(report.results) == 6


@pytest.mark.parametrize("row", range(6))
def test_oracle_suite_catches_sign_flip(row):
    report = run_suite(CheckConfig(suite="oracle", oracle_lengths=[4, 7], flip_plan_row=row))
    failed = {r.invariant for r in report.failures}
    assert "vector_long_conv matches its oracle" in failed
    assert "geometric_long_conv matches its oracle" in failed
    assert "fft matches the direct DFT" not in failed


def test_gradient_suite_passes():
    report = run_suite(CheckConfig(suite="gradcheck", gradcheck_len=8, gradcheck_hidden=4, gradcheck_max_entries=3))
    assert report.passed, format_report(report)


def test_gradient_suite_runs_in_float64_under_float32_mode():
    set_default_dtype("float32")
    report = run_suite(CheckConfig(suite="gradcheck"))
    assert report.passed, format_report(report)
    assert get_default_dtype() is np.float32


def test_stability_suite_separates_kv_norm():
    report = run_suite(CheckConfig(suite="stability"))
    assert report.passed, format_report(report)
    assert len(report.results) == 2


def test_growth_exponents():
    scales = [1.0, 10.0, 100.0, 1000.0]
    normalised = growth_exponent(_small_block_config(kv_norm=True), scales)
    raw = growth_exponent(_small_block_config(kv_norm=False), scales)
    assert normalised <= 1.1
    assert raw >= 2.5 or math.isinf(raw)


def test_check_config_validation():
    with pytest.raises(ValueError):
        CheckConfig(suite="equivariance", gradcheck_len=7)
    with pytest.raises(ValueError):
        CheckConfig(suite="stability", stability_scales=[10.0, 10.0])
    with pytest.raises(ValueError):
        CheckConfig(suite="oracle", flip_plan_row=6)
    with pytest.raises(ValueError):
        CheckConfig(suite="speed")


@pytest.mark.slow
def test_ablation_suite_reports_every_row():
    report = run_suite(CheckConfig(suite="ablation", ablation_epochs=2, ablation_train_size=8,
                                   ablation_test_size=4, ablation_seq_len=8, ablation_hidden=8))
    trained = [r for r in report.results if r.invariant.endswith("trains end to end")]
    assert len(trained) == len(ABLATION_ROWS)
    assert all("test_mse=" in r.detail for r in trained)
    assert report.passed, format_report(report)
