import logging
import os


def setup_logger(lowest_level: int | str | None = None) -> logging.Logger:
    if lowest_level is None:
        lowest_level = os.getenv("SPADNLOS_LOG_LEVEL", "INFO").upper()

    default_format = "[%(asctime)s] [%(levelname)s] %(name)s > %(message)s"
    logging.basicConfig(format=default_format, level=lowest_level)

    formatter = logging.Formatter(default_format)

    logger = logging.getLogger("spadnlos")
    for h in logging.root.handlers:
        h.setFormatter(formatter)

    logger.setLevel(lowest_level)

    return logger
