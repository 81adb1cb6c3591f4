import logging
import sys
from typing import Optional, Sequence, Union

import numpy as np

LOGGER_NAME = "mbqc_fidelity"

SeedLike = Union[int, Sequence[int], np.random.Generator, None]


def setup_logger(name: str = LOGGER_NAME, level: Optional[Union[int, str]] = None) -> logging.Logger:
    """Configures and returns a logger instance."""
    logger = logging.getLogger(name)
    if not logger.handlers:
        logger.setLevel(logging.INFO)
        formatter = logging.Formatter(
            "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
        )

        # Console Handler
        ch = logging.StreamHandler(sys.stdout)
        ch.setFormatter(formatter)
        logger.addHandler(ch)

    if level is not None:
        logger.setLevel(level)

    return logger


def make_rng(seed: SeedLike = None) -> np.random.Generator:
    """
    Returns a PCG64 generator. Passing a generator through returns it unchanged,
    so callers can share one stream across several draws.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def format_float(value: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    return f"{value:.17g}"
