"""Manager classes for CESTRADE studies"""

from .config_manager import ConfigManager, RunConfig, SolverSettings
from .study_manager import StudyManager

__all__ = [
    "ConfigManager",
    "RunConfig",
    "SolverSettings",
    "StudyManager",
]
