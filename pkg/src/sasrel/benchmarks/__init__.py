"""Reference limit states with their probabilistic models and study defaults."""

from .registry import BENCHMARK_NAMES, get_benchmark, study_defaults

__all__ = ["BENCHMARK_NAMES", "get_benchmark", "study_defaults"]
