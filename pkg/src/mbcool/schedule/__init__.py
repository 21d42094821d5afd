from .env import CoolingEnv, MeasurementSchedule, reward
from .search import beam_search, exhaustive_search

__all__ = ["CoolingEnv", "MeasurementSchedule", "reward", "beam_search", "exhaustive_search"]
