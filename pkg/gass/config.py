"""Defaults and environment driven settings."""

import os

DEFAULT_GAMMA = 0.8
DEFAULT_EPSILON = 1e-6
DEFAULT_SAMPLES = 100
DEFAULT_SEED = 42
DEFAULT_BETAS = (1 / 8, 1 / 4, 1 / 2, 1.0, 2.0, 4.0, 8.0)
DEFAULT_RANKERS = ('mpc', 'gmpc')
MAX_EXACT_CANDIDATES = 7

# Distributions must sum to one within this tolerance
PROB_TOLERANCE = 1e-9

# Products with more factors than this are evaluated as summed logs
LOG_SPACE_THRESHOLD = 8

# Added to max-relative scores before taking logs, so zero scores stay finite
SCORE_FLOOR = 1e-6


class Settings:
    THREADS_ENV = 'GASS_THREADS'
    LOG_LEVEL_ENV = 'GASS_LOG_LEVEL'

    @classmethod
    def threads(cls) -> int:
        """Number of evaluation workers.

        Reads ``GASS_THREADS`` on every call so a changed environment is
        picked up without reloading the module.

        Returns:
            int: Worker count, at least 1.
        """
        raw = os.environ.get(cls.THREADS_ENV)
        if not raw:
            return os.cpu_count() or 1
        try:
            return max(1, int(raw))
        except ValueError:
            return 1

    @classmethod
    def log_level(cls) -> str:
        return os.environ.get(cls.LOG_LEVEL_ENV, 'WARNING').upper()
