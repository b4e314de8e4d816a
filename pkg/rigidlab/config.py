import os
from dataclasses import dataclass
from typing import Any, Dict

from dotenv import load_dotenv


@dataclass(frozen=True)
class NumericDefaults:
    """Numerical defaults shared by the library modules."""

    # implicit midpoint
    integrator_dt: float = 1e-3
    integrator_tolerance: float = 1e-12
    integrator_max_iterations: int = 50

    # reconstruction of generating Hamiltonians
    reconstruction_resolution: int = 64
    curl_tolerance: float = 1e-4

    # weak fields
    singleton_threshold: float = 1e-6
    dedup_tolerance: float = 1e-9
    schedule_radius: float = 1e-2
    schedule_shrink: float = 0.5
    schedule_shells: int = 6
    schedule_samples: int = 32
    limit_shells: int = 2

    # wavefront Newton polish
    newton_max_iterations: int = 20
    min_grid_resolution: int = 8

    # min-max values
    minmax_resolution: int = 64
    critical_newton_seeds: int = 64
    gamma_times: int = 11


class Settings:
    """
    Process-wide settings.

    Values come from the environment (a ``.env`` file is honoured) with
    numerical defaults from :class:`NumericDefaults`.
    """

    def __init__(self):
        load_dotenv()
        self.THREADS = self._read_threads()
        self.LOG_LEVEL = os.getenv("RIGIDLAB_LOG_LEVEL", "WARNING").upper()
        self.numeric = NumericDefaults()

    @staticmethod
    def _read_threads() -> int:
        raw = os.getenv("RIGIDLAB_THREADS")
        default = os.cpu_count() or 1
        if raw is None or not raw.strip():
            return default
        try:
            value = int(raw)
        except ValueError:
            return default
        return max(1, value)

    def as_dict(self) -> Dict[str, Any]:
        return {
            "threads": self.THREADS,
            "log_level": self.LOG_LEVEL,
            "numeric": dict(self.numeric.__dict__),
        }


_settings = Settings()


def get_settings() -> Settings:
    """
    Return the settings instance.

    Returns:
        Settings: the process-wide settings object.
    """
    return _settings


settings = get_settings()
