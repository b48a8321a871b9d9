import logging
import sys
from typing import Optional, Sequence

from pydantic import ValidationError

from ghyena import __version__
from ghyena.autodiff.tensor import set_default_dtype
from ghyena.commands.api import command_router
from ghyena.core.config import settings
from ghyena.core.errors import GHyenaError, NumericalError
from ghyena.core.logging import configure_logging

logger = logging.getLogger("ghyena.main")


def build_parser():
    parser = command_router.build_parser(
        prog="ghyena",
        description=f"{settings.PROJECT_NAME} {__version__}: SE(3)-equivariant long convolutions",
    )
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one sub-command and return its exit code.

    0 success, 1 invariant failure, 2 invalid configuration or I/O error, 3 numerical failure.
    """
    args = build_parser().parse_args(argv)
    run_settings = settings
    if args.log_level:
        run_settings = settings.model_copy(update={"LOG_LEVEL": args.log_level.upper()})
    configure_logging(run_settings)
    set_default_dtype(run_settings.DTYPE)

    try:
        return args.handler(args)
    except ValidationError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        logger.error("%s %s", exc.detail, {k: v for k, v in exc.diagnostics.items() if k != "param_norms"})
        print(f"numerical failure: {exc.detail}", file=sys.stderr)
        return exc.exit_code
    except GHyenaError as exc:
        print(f"error: {exc.detail}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
