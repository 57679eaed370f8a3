import logging
import sys

logger = logging.getLogger('jointail')
info = logger.info
debug = logger.debug
warning = logger.warning
error = logger.error
critical = logger.critical

_FORMAT = '%(asctime)s %(levelname)-7s %(name)s: %(message)s'

def setup(verbosity: int = 0) -> None:
    """Attach a stderr handler. 0 is INFO, positive is DEBUG, negative WARNING."""
    if verbosity > 0:
        level = logging.DEBUG
    elif verbosity < 0:
        level = logging.WARNING
    else:
        level = logging.INFO
    logger.setLevel(level)
    for h in [h for h in logger.handlers if getattr(h, '_jointail', False)]:
        logger.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(_FORMAT))
    handler._jointail = True  # type: ignore[attr-defined]
    logger.addHandler(handler)

__all__ = ['logger', 'info', 'debug', 'warning', 'error', 'critical']
