import logging

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"

logger = logging.getLogger("curvflow")


def setup_logging(level: str = "WARNING"):
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.WARNING),
        format=LOG_FORMAT,
    )
    # numpy/jsonschema stay quiet unless something is really wrong
    for name in ("jsonschema", "urllib3"):
        logging.getLogger(name).setLevel(logging.WARNING)


def log_exception(e):
    logger.error("[ERROR] %s", e, exc_info=e)
