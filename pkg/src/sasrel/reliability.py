"""Failure-probability estimation and the reduced-surrogate pipeline.

Failure is the event g(x) < 0 (g = 0 counts as safe).  Direct Monte Carlo
evaluates the true limit state; the pipeline spends its true-model budget on a
Sobol design only, then chains sparse expansion -> gradient-based subspace ->
hybrid surrogate on reduced coordinates -> surrogate Monte Carlo.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import norm

from . import hpcfe as hp
from .activesub import fd_cost, subspace_from_surrogate
from .errors import DimensionError, NumericalError, ParameterError
from .probspace import ProbabilisticModel, Space, sobol_points, transform, uniform_stream
from .spce import fit_lar


@dataclass(frozen=True)
class LimitState:
    """A deterministic performance function; negative values mean failure.

    ``fn`` maps a (n, dim) block of physical-space points to n values.
    ``cost`` is a free-form label for the expense class of one evaluation.
    """

    name: str
    dim: int
    fn: Callable[[np.ndarray], np.ndarray]
    cost: str = "cheap"

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim:
            raise DimensionError(
                f"{self.name} expects {self.dim} variables, got {x.shape[1]}")
        return np.asarray(self.fn(x), dtype=float).reshape(x.shape[0])


class CountingLimitState:
    """Wrapper auditing how many true-model evaluations were spent."""

    def __init__(self, inner: LimitState):
        self.inner = inner
        self.n_evals = 0

    @property
    def name(self) -> str:
        return self.inner.name

    @property
    def dim(self) -> int:
        return self.inner.dim

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        out = self.inner.evaluate(x)
        self.n_evals += out.shape[0]
        return out


@dataclass(frozen=True)
class ReliabilityResult:
    """Outcome of one estimator run.

    ``cov_pf`` is the Monte-Carlo estimator coefficient of variation
    sqrt((1 - pf) / (n pf)); it is carried only by sampling estimators.
    """

    method: str
    pf: float
    beta: float
    n_model_evals: int
    n_surrogate_evals: int = 0
    cov_pf: float | None = None
    r: int | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.pf <= 1.0:
            raise ParameterError(f"failure probability {self.pf} outside [0, 1]")
        if 0.0 < self.pf < 1.0:
            if abs(self.beta - float(norm.isf(self.pf))) > 1e-9 * max(1.0, abs(self.beta)):
                raise ParameterError("reliability index inconsistent with pf")

    CSV_FIELDS = ("method", "pf", "beta", "n_model_evals", "n_surrogate_evals",
                  "cov_pf", "r", "seed")

    def csv_row(self) -> list[str]:
        vals = []
        for name in self.CSV_FIELDS:
            v = getattr(self, name)
            vals.append("" if v is None else repr(v) if isinstance(v, float) else str(v))
        return vals


def reliability_index(pf: float) -> float:
    """beta = Phi^{-1}(1 - pf), with signed-infinity sentinels at pf in {0, 1}."""
    if not 0.0 <= pf <= 1.0:
        raise ParameterError(f"failure probability {pf} outside [0, 1]")
    if pf == 0.0:
        return math.inf
    if pf == 1.0:
        return -math.inf
    return float(norm.isf(pf))


def _estimator_cov(pf: float, n: int) -> float:
    if pf == 0.0:
        return math.inf
    return math.sqrt((1.0 - pf) / (n * pf))


def mcs_probability(g_eval, model: ProbabilisticModel, n: int, seed: int,
                    method: str = "mcs") -> ReliabilityResult:
    """Direct Monte-Carlo failure probability with the indicator-mean estimator.

    Samples stream in fixed chunks from the same seeded substreams as
    ``mc_sample``, so the estimate is reproducible and identical to evaluating
    the one-shot sample matrix.
    """
    if n < 1:
        raise ParameterError(f"sample size must be positive, got {n}")
    evaluate = g_eval.evaluate if hasattr(g_eval, "evaluate") else g_eval
    failures = 0
    done = 0
    for u in uniform_stream(seed, n, model.dim):
        x = np.column_stack([m.ppf(u[:, i]) for i, m in enumerate(model.marginals)])
        g = np.asarray(evaluate(x), dtype=float).reshape(x.shape[0])
        finite = np.isfinite(g)
        if not finite.all():
            raise NumericalError(
                f"non-finite limit state value at sample {done + int(np.argmin(finite))}")
        failures += int(np.count_nonzero(g < 0.0))
        done += x.shape[0]
    pf = failures / n
    return ReliabilityResult(method=method, pf=pf, beta=reliability_index(pf),
                             n_model_evals=n, cov_pf=_estimator_cov(pf, n),
                             seed=seed)


@dataclass(frozen=True)
class PipelineConfig:
    """Settings for the reduced-surrogate pipeline.

    ``n_train`` is the entire true-model budget.  ``n_grad_samples`` of None
    means 10 per input dimension.  The LAR caps bound the regression path on
    very large candidate sets; None leaves the standard path bound.
    """

    n_train: int
    p_max: int
    n_mcs: int
    mu: float = 0.98
    seed: int = 0
    hpcfe_config: hp.HpcfeConfig = field(default_factory=hp.HpcfeConfig)
    n_grad_samples: int | None = None
    lar_max_terms: int | None = None
    lar_patience: int | None = None
    scatter_rows: int = 4096

    def __post_init__(self) -> None:
        if self.n_train < 3:
            raise ParameterError("training budget must be at least 3")
        if self.n_mcs < 1:
            raise ParameterError("Monte-Carlo sample size must be positive")
        if not 0.0 < self.mu < 1.0:
            raise ParameterError("subspace threshold must lie in (0, 1)")


@dataclass(frozen=True)
class PipelineArtifacts:
    """Serialized-ready intermediate models and plot data from one pipeline run."""

    spce_model: object
    subspace: object
    hpcfe_model: object
    fd_gradient_cost: int
    doe_xi: np.ndarray
    doe_y: np.ndarray
    scatter: np.ndarray


def _training_design(limit_state, model: ProbabilisticModel, n_train: int):
    u = sobol_points(n_train, model.dim)
    x = transform(u, Space.PHYSICAL, model)
    y = limit_state.evaluate(x.values)
    if not np.all(np.isfinite(y)):
        raise NumericalError("non-finite limit state value in the training design")
    xi = 2.0 * u.values - 1.0
    return xi, y


def _surrogate_mcs(predict, dim: int, n: int, seed: int, scatter_rows: int,
                   project=None):
    failures = 0
    done = 0
    scatter = None
    for u in uniform_stream(seed, n, dim):
        pts = 2.0 * u - 1.0
        if project is not None:
            pts = project(pts)
        g = np.asarray(predict(pts), dtype=float).reshape(pts.shape[0])
        if scatter is None:
            keep = min(scatter_rows, pts.shape[0])
            scatter = np.column_stack([pts[:keep], (g[:keep] < 0.0).astype(float)])
        failures += int(np.count_nonzero(g < 0.0))
        done += pts.shape[0]
    return failures / n, scatter


def sas_hpcfe_pipeline(limit_state: LimitState, model: ProbabilisticModel,
                       config: PipelineConfig) -> tuple[ReliabilityResult, PipelineArtifacts]:
    """Subspace-reduced hybrid-surrogate reliability estimate.

    True-model evaluations happen exactly once, on the Sobol training design;
    every later stage (gradients, reduced training, Monte Carlo) runs on
    surrogates.  The audited count is returned in ``n_model_evals``.
    """
    if limit_state.dim != model.dim:
        raise DimensionError(
            f"limit state has {limit_state.dim} variables, model has {model.dim}")
    counter = CountingLimitState(limit_state)
    xi, y = _training_design(counter, model, config.n_train)

    surrogate = fit_lar(xi, y, config.p_max, max_terms=config.lar_max_terms,
                        patience=config.lar_patience, input_model=model)

    n_grad = config.n_grad_samples or 10 * model.dim
    subspace = subspace_from_surrogate(surrogate, config.mu,
                                       n_grad_samples=n_grad,
                                       skip=config.n_train)
    if subspace.r == model.dim:
        warnings.warn("no dimension reduction: subspace rank equals input dimension",
                      RuntimeWarning)

    z_train = subspace.project(xi)
    reduced = hp.fit(z_train, y, config.hpcfe_config)

    pf, scatter = _surrogate_mcs(reduced.predict_mean, model.dim, config.n_mcs,
                                 config.seed, config.scatter_rows,
                                 project=subspace.project)
    result = ReliabilityResult(
        method="sas-hpcfe", pf=pf, beta=reliability_index(pf),
        n_model_evals=counter.n_evals,
        n_surrogate_evals=config.n_mcs + n_grad,
        cov_pf=_estimator_cov(pf, config.n_mcs),
        r=subspace.r, seed=config.seed)
    artifacts = PipelineArtifacts(
        spce_model=surrogate, subspace=subspace, hpcfe_model=reduced,
        fd_gradient_cost=fd_cost(model.dim, n_grad),
        doe_xi=xi, doe_y=y, scatter=scatter)
    return result, artifacts


def spce_only_pipeline(limit_state: LimitState, model: ProbabilisticModel,
                       config: PipelineConfig) -> tuple[ReliabilityResult, PipelineArtifacts]:
    """Baseline: sparse expansion on the full coordinates, then surrogate MCS."""
    if limit_state.dim != model.dim:
        raise DimensionError(
            f"limit state has {limit_state.dim} variables, model has {model.dim}")
    counter = CountingLimitState(limit_state)
    xi, y = _training_design(counter, model, config.n_train)
    surrogate = fit_lar(xi, y, config.p_max, max_terms=config.lar_max_terms,
                        patience=config.lar_patience, input_model=model)
    pf, scatter = _surrogate_mcs(surrogate.predict, model.dim, config.n_mcs,
                                 config.seed, config.scatter_rows)
    result = ReliabilityResult(
        method="spce", pf=pf, beta=reliability_index(pf),
        n_model_evals=counter.n_evals, n_surrogate_evals=config.n_mcs,
        cov_pf=_estimator_cov(pf, config.n_mcs), seed=config.seed)
    artifacts = PipelineArtifacts(
        spce_model=surrogate, subspace=None, hpcfe_model=None,
        fd_gradient_cost=0, doe_xi=xi, doe_y=y, scatter=scatter)
    return result, artifacts


@dataclass(frozen=True)
class ConvergenceRow:
    n_train: int
    pf: float
    beta: float


@dataclass(frozen=True)
class ConvergenceTable:
    rows: tuple[ConvergenceRow, ...]
    converged_at: int | None


def convergence_study(runner: Callable[[int], ReliabilityResult],
                      schedule: Sequence[int]) -> ConvergenceTable:
    """Run an estimator over a training-size schedule and flag 1% beta settling.

    ``converged_at`` is the first schedule entry whose beta differs from the
    previous entry's by less than 1% relative; None if the schedule never
    settles (or has a single entry).
    """
    if not schedule:
        raise ParameterError("schedule must contain at least one training size")
    rows = []
    converged_at = None
    prev_beta = None
    for n_train in schedule:
        res = runner(int(n_train))
        rows.append(ConvergenceRow(n_train=int(n_train), pf=res.pf, beta=res.beta))
        if prev_beta is not None and converged_at is None and math.isfinite(res.beta) \
                and math.isfinite(prev_beta) and prev_beta != 0.0 \
                and abs(res.beta - prev_beta) < 0.01 * abs(prev_beta):
            converged_at = int(n_train)
        prev_beta = res.beta
    return ConvergenceTable(rows=tuple(rows), converged_at=converged_at)
