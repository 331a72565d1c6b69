import logging
from typing import Optional

from app.settings import settings

_configured = False

def setup_logging(level: Optional[str] = None) -> None:
    """Configure the root handler once; later calls only adjust the level."""
    global _configured
    lvl = (level or settings.LOG_LEVEL).upper()
    if not _configured:
        logging.basicConfig(level=lvl, format=settings.LOG_FORMAT)
        _configured = True
    logging.getLogger().setLevel(lvl)
