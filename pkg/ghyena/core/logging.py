import logging
from typing import Optional

from ghyena.core.config import Settings, settings as default_settings

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(settings: Optional[Settings] = None) -> None:
    """Install one stream handler on the package logger."""
    settings = settings or default_settings
    logger = logging.getLogger("ghyena")
    logger.setLevel(settings.LOG_LEVEL)
    if not any(getattr(h, "_ghyena", False) for h in logger.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._ghyena = True  # type: ignore[attr-defined]
        logger.addHandler(handler)
    logger.propagate = False
