"""Named benchmark studies with their input models and tuned run settings."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ParameterError
from ..hpcfe import HpcfeConfig
from ..probspace import ProbabilisticModel
from ..reliability import LimitState, PipelineConfig
from . import beam, gfunction, truss

BENCHMARK_NAMES = ("sobol-m10", "sobol-m40", "sobol-m100", "beam", "truss")


@dataclass(frozen=True)
class Benchmark:
    name: str
    limit_state: LimitState
    model: ProbabilisticModel
    mcs_n: int
    pipeline: PipelineConfig


# (n_train, p_max, LAR term cap, reference MCS n, surrogate MCS n,
#  hpcfe trend degree, hpcfe nugget, hpcfe restarts, hpcfe max evals)
_SETTINGS = {
    "sobol-m10": (800, 5, 30, 100_000, 100_000, 3, 1e-8, 8, None),
    "sobol-m40": (900, 2, 30, 100_000, 100_000, 3, 1e-8, 8, None),
    "sobol-m100": (1100, 2, 50, 100_000, 100_000, 3, 1e-8, 8, None),
    "beam": (800, 4, 50, 1_000_000, 1_000_000, 5, 1e-8, 8, None),
    "truss": (1000, 3, 120, 100_000, 100_000, 4, 1e-3, 4, 150),
}


def get_benchmark(name: str, truncated: bool = False, seed: int = 0) -> Benchmark:
    if name not in _SETTINGS:
        raise ParameterError(
            f"unknown benchmark {name!r}; available: {', '.join(BENCHMARK_NAMES)}")
    (n_train, p_max, max_terms, mcs_n, n_mcs, trend_b, nugget, restarts,
     max_evals) = _SETTINGS[name]
    if name.startswith("sobol-m"):
        m = int(name.removeprefix("sobol-m"))
        state, model = gfunction.gfunction_state(m), gfunction.gfunction_model(m)
    elif name == "beam":
        state, model = beam.beam_state(), beam.beam_model(truncated=truncated)
    else:
        state, model = truss.truss_state(), truss.truss_model()
    cfg = PipelineConfig(
        n_train=n_train, p_max=p_max, n_mcs=n_mcs, mu=0.98, seed=seed,
        lar_max_terms=max_terms,
        hpcfe_config=HpcfeConfig(b=trend_b, nugget=nugget, restarts=restarts,
                                 nm_max_evals=max_evals))
    return Benchmark(name=name, limit_state=state, model=model,
                     mcs_n=mcs_n, pipeline=cfg)


def study_defaults(name: str) -> dict:
    """JSON-ready study configuration template for the CLI."""
    bench = get_benchmark(name)
    return {
        "benchmark": name,
        "methods": ["mcs", "spce", "sas-hpcfe"],
        "n_train": bench.pipeline.n_train,
        "p_max": bench.pipeline.p_max,
        "max_terms": bench.pipeline.lar_max_terms,
        "mu": bench.pipeline.mu,
        "n_mcs": bench.mcs_n,
        "n_mcs_surrogate": bench.pipeline.n_mcs,
        "seed": 0,
        "truncation": False,
        "hpcfe": {
            "M": bench.pipeline.hpcfe_config.M,
            "b": bench.pipeline.hpcfe_config.b,
            "nugget": bench.pipeline.hpcfe_config.nugget,
            "restarts": bench.pipeline.hpcfe_config.restarts,
            "nm_max_evals": bench.pipeline.hpcfe_config.nm_max_evals,
        },
    }
