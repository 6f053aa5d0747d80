"""Hybrid surrogate on reduced coordinates: component-function trend + GP residual.

The trend is a hierarchical expansion over component functions of at most M
variables, each carrying univariate orthonormal Legendre factors up to degree
b, with redundant columns across component functions removed.  The trend
coefficient system is typically underdetermined and solved by a null-space
(homotopy) construction.  A zero-mean Gaussian process with an anisotropic
squared-exponential kernel interpolates the trend residual; its length scales
are found by multi-start maximum likelihood.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from .errors import DimensionError, NumericalError, ParameterError
from .polybasis import BasisSet, eval_design_matrix
from .probspace import sobol_points

_NUGGET_RETRIES = 3
_SV_RANK_TOL = 1e-10


@dataclass(frozen=True)
class HpcfeConfig:
    """Trend and kernel settings.

    M bounds the component-function interaction order, b the univariate
    degree inside each component.  The nugget is relative to the unit kernel
    diagonal.
    """

    M: int = 2
    b: int = 3
    kernel: str = "anisotropic-squared-exponential"
    nugget: float = 1e-8
    theta_bounds: tuple[float, float] = (1e-2, 1e2)
    restarts: int = 8
    nm_max_evals: int | None = None  # per-start likelihood evaluation cap

    def __post_init__(self) -> None:
        if self.M < 1 or self.b < 1:
            raise ParameterError("interaction order and degree must be >= 1")
        if self.nugget <= 0.0:
            raise ParameterError("nugget must be positive")
        lo, hi = self.theta_bounds
        if not 0.0 < lo < hi:
            raise ParameterError("length-scale bounds must be positive and ordered")
        if self.kernel != "anisotropic-squared-exponential":
            raise ParameterError(f"unsupported kernel {self.kernel!r}")
        if self.restarts < 1:
            raise ParameterError("need at least one optimizer start")


def build_design_matrix(z: np.ndarray, config: HpcfeConfig) -> tuple[np.ndarray, np.ndarray]:
    """Trend design matrix and its multi-index map on standardized coordinates.

    Component functions are enumerated for every variable subset of size 1..M;
    each contributes products of univariate terms of degree 0..b in its own
    variables.  Identical products from different component functions collapse
    to one column (canonical multi-index identity); the constant is excluded.
    Returns (Psi of shape (n, q'), map of shape (q', r)).
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    r = z.shape[1]
    seen: set[tuple[int, ...]] = set()
    for size in range(1, min(config.M, r) + 1):
        for subset in itertools.combinations(range(r), size):
            for degrees in itertools.product(range(config.b + 1), repeat=size):
                alpha = [0] * r
                for d, k in zip(subset, degrees):
                    alpha[d] = k
                if any(degrees):
                    seen.add(tuple(alpha))
    if not seen:
        raise ParameterError("extended basis is empty")
    rows = sorted(seen, key=lambda a: (sum(a), tuple(-x for x in a)))
    basis_map = np.asarray(rows, dtype=np.int64)
    psi = eval_design_matrix(BasisSet(basis_map), z, check_domain=False)
    return psi, basis_map


def correlation_matrix(z: np.ndarray, theta: np.ndarray, nugget: float) -> np.ndarray:
    """R_ij = exp(-sum_k theta_k (z_ik - z_jk)^2) plus nugget on the diagonal."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0.0):
        raise ParameterError("length-scale parameters must be positive")
    if theta.shape[0] != z.shape[1]:
        raise DimensionError(f"{theta.shape[0]} length scales for {z.shape[1]} coordinates")
    scaled = z * np.sqrt(theta)
    r = np.exp(-cdist(scaled, scaled, "sqeuclidean"))
    return r + nugget * np.eye(z.shape[0])


def _kernel_cross(z_new: np.ndarray, z_train: np.ndarray, theta: np.ndarray) -> np.ndarray:
    sq = np.sqrt(np.asarray(theta, dtype=float))
    return np.exp(-cdist(z_new * sq, z_train * sq, "sqeuclidean"))


def _chol_with_retries(z: np.ndarray, theta: np.ndarray, nugget: float,
                       notes: list[str] | None = None) -> tuple[np.ndarray, float]:
    eff = nugget
    for attempt in range(_NUGGET_RETRIES + 1):
        try:
            chol = np.linalg.cholesky(correlation_matrix(z, theta, eff))
            if attempt and notes is not None:
                notes.append(f"nugget raised to {eff:.1e} for factorization")
            return chol, eff
        except np.linalg.LinAlgError:
            eff *= 10.0
    raise NumericalError(
        f"correlation matrix not positive definite with nugget up to {eff / 10:.1e}")


def homotopy_solve(a: np.ndarray, b: np.ndarray, w: np.ndarray | None = None) -> np.ndarray:
    """Solve A alpha = B, selecting among solutions by a null-space criterion.

    Starts from the pseudo-inverse solution alpha0.  The null-space projector
    P = I - A^+ A is combined with the weight matrix through an SVD of P W;
    the trailing singular blocks U2, V2 (numerical rank cut at 1e-10 of the
    largest singular value) give alpha = V2 (U2^T V2)^{-1} U2^T alpha0, which
    still satisfies the original system.  With W = identity this reduces to
    alpha0 itself (minimum-norm solution).
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    q = a.shape[0]
    if a.shape != (q, q) or b.shape[0] != q:
        raise DimensionError(f"system shapes {a.shape}, {b.shape} are inconsistent")
    if w is None:
        w = np.eye(q)
    a_pinv = np.linalg.pinv(a)
    alpha0 = a_pinv @ b
    if np.linalg.matrix_rank(a) == q:
        # empty null space; P W below would be pure round-off
        return alpha0
    p = np.eye(q) - a_pinv @ a
    pw = p @ w
    try:
        u, s, vt = np.linalg.svd(pw)
    except np.linalg.LinAlgError:
        # divide-and-conquer can fail to converge; gesvd is slower but robust
        u, s, vt = scipy.linalg.svd(pw, lapack_driver="gesvd")
    rank = int(np.sum(s > _SV_RANK_TOL * (s[0] if s.size else 0.0)))
    if rank == 0:
        return alpha0
    u2, v2 = u[:, rank:], vt.T[:, rank:]
    m = u2.T @ v2
    det_scale = np.linalg.cond(m) if m.size else np.inf
    if not np.isfinite(det_scale) or det_scale > 1e12:
        warnings.warn("homotopy block singular; keeping the pseudo-inverse solution",
                      RuntimeWarning)
        return alpha0
    return v2 @ np.linalg.solve(m, u2.T @ alpha0)


@dataclass
class HpcfeModel:
    """Fitted hybrid surrogate.

    Treat as immutable after fit; the only mutating bookkeeping is the
    monotone ``saw_extrapolation`` flag set when a prediction point falls
    outside the training rescale box.
    """

    config: HpcfeConfig
    g0: float
    alpha: np.ndarray
    theta: np.ndarray
    sigma2: float
    z_train: np.ndarray
    d: np.ndarray
    basis_map: np.ndarray
    box_lo: np.ndarray
    box_hi: np.ndarray
    nugget: float
    fit_notes: tuple[str, ...] = ()
    saw_extrapolation: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        self.alpha = np.asarray(self.alpha, dtype=float).ravel()
        self.theta = np.asarray(self.theta, dtype=float).ravel()
        self.z_train = np.atleast_2d(np.asarray(self.z_train, dtype=float))
        self.d = np.asarray(self.d, dtype=float).ravel()
        self.basis_map = np.asarray(self.basis_map, dtype=np.int64)
        self.box_lo = np.asarray(self.box_lo, dtype=float).ravel()
        self.box_hi = np.asarray(self.box_hi, dtype=float).ravel()
        if self.sigma2 < 0.0:
            raise ParameterError("process variance cannot be negative")
        if self.d.shape[0] != self.z_train.shape[0]:
            raise DimensionError("training responses and points disagree in length")
        if self.alpha.shape[0] != self.basis_map.shape[0]:
            raise DimensionError("coefficient vector does not match the basis map")
        zs = self._rescale(self.z_train)
        self._chol, _ = _chol_with_retries(zs, self.theta, self.nugget)
        self._zs = zs
        psi = eval_design_matrix(BasisSet(self.basis_map), zs, check_domain=False)
        self._psi = psi
        self._x = solve_triangular(self._chol, psi, lower=True)
        resid = self.d - psi @ self.alpha
        self._w_resid = cho_solve((self._chol, True), resid)
        self._a_pinv = np.linalg.pinv(self._x.T @ self._x)

    @property
    def r(self) -> int:
        return self.z_train.shape[1]

    def _rescale(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        if z.shape[1] != self.box_lo.shape[0]:
            raise DimensionError(
                f"points have {z.shape[1]} coordinates, model has {self.box_lo.shape[0]}")
        return 2.0 * (z - self.box_lo) / (self.box_hi - self.box_lo) - 1.0

    def _prepare(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        zs = self._rescale(z)
        if np.any(np.abs(zs) > 1.0 + 1e-12):
            self.saw_extrapolation = True
        phi = eval_design_matrix(BasisSet(self.basis_map), zs, check_domain=False)
        k = _kernel_cross(zs, self._zs, self.theta)
        return zs, phi, k

    def predict_mean(self, z: np.ndarray) -> np.ndarray:
        """Predictive mean at reduced-space points; shape (n,)."""
        _, phi, k = self._prepare(z)
        return self.g0 + phi @ self.alpha + k @ self._w_resid

    def predict_variance(self, z: np.ndarray) -> np.ndarray:
        """Universal-kriging predictive variance at reduced-space points; >= 0."""
        _, phi, k = self._prepare(z)
        lk = solve_triangular(self._chol, k.T, lower=True)
        quad_sk = np.einsum("ij,ij->j", lk, lk)
        u = self._x.T @ lk - phi.T
        quad_trend = np.einsum("ij,ij->j", u, self._a_pinv @ u)
        return np.clip(self.sigma2 * (1.0 - quad_sk + quad_trend), 0.0, None)

    def to_json(self) -> str:
        return json.dumps({
            "config": {"M": self.config.M, "b": self.config.b,
                       "kernel": self.config.kernel, "nugget": self.config.nugget,
                       "theta_bounds": list(self.config.theta_bounds),
                       "restarts": self.config.restarts},
            "g0": self.g0,
            "basis_map": self.basis_map.tolist(),
            "alpha": self.alpha.tolist(),
            "theta": self.theta.tolist(),
            "sigma2": self.sigma2,
            "Z_train": self.z_train.tolist(),
            "d": self.d.tolist(),
            "box": [self.box_lo.tolist(), self.box_hi.tolist()],
            "nugget_effective": self.nugget,
            "fit_notes": list(self.fit_notes),
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "HpcfeModel":
        doc = json.loads(text)
        cfg = doc["config"]
        return cls(
            config=HpcfeConfig(M=cfg["M"], b=cfg["b"], kernel=cfg["kernel"],
                               nugget=cfg["nugget"],
                               theta_bounds=tuple(cfg["theta_bounds"]),
                               restarts=cfg["restarts"]),
            g0=doc["g0"], alpha=np.asarray(doc["alpha"]),
            theta=np.asarray(doc["theta"]), sigma2=doc["sigma2"],
            z_train=np.asarray(doc["Z_train"]), d=np.asarray(doc["d"]),
            basis_map=np.asarray(doc["basis_map"]),
            box_lo=np.asarray(doc["box"][0]), box_hi=np.asarray(doc["box"][1]),
            nugget=doc["nugget_effective"], fit_notes=tuple(doc["fit_notes"]))


def _profile_likelihood(zs: np.ndarray, d: np.ndarray, psi: np.ndarray,
                        theta: np.ndarray, nugget: float, var_floor: float,
                        notes: list[str] | None = None):
    """Concentrated log-likelihood and trend solve at fixed length scales."""
    n = zs.shape[0]
    chol, eff = _chol_with_retries(zs, theta, nugget, notes)
    x = solve_triangular(chol, psi, lower=True)
    ld = solve_triangular(chol, d, lower=True)
    alpha = homotopy_solve(x.T @ x, x.T @ ld)
    lresid = solve_triangular(chol, d - psi @ alpha, lower=True)
    sigma2 = float(lresid @ lresid) / n
    ll = -0.5 * n * math.log(max(sigma2, var_floor)) \
        - float(np.sum(np.log(np.diag(chol))))
    return ll, alpha, sigma2, eff


def fit_fixed_theta(z: np.ndarray, y: np.ndarray, theta: np.ndarray,
                    config: HpcfeConfig = HpcfeConfig()) -> HpcfeModel:
    """Fit trend and process variance with length scales held fixed."""
    z, y, box_lo, box_hi = _validate_training(z, y)
    zs = 2.0 * (z - box_lo) / (box_hi - box_lo) - 1.0
    g0 = float(y.mean())
    d = y - g0
    psi, basis_map = build_design_matrix(zs, config)
    var_floor = max(float(np.var(y)), 1e-30) * 1e-16
    notes: list[str] = []
    _, alpha, sigma2, eff = _profile_likelihood(
        zs, d, psi, np.asarray(theta, dtype=float), config.nugget, var_floor, notes)
    return HpcfeModel(config=config, g0=g0, alpha=alpha,
                      theta=np.asarray(theta, dtype=float), sigma2=sigma2,
                      z_train=z, d=d, basis_map=basis_map,
                      box_lo=box_lo, box_hi=box_hi, nugget=eff,
                      fit_notes=tuple(notes))


def _validate_training(z: np.ndarray, y: np.ndarray):
    z = np.atleast_2d(np.asarray(z, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if z.shape[0] != y.shape[0]:
        raise DimensionError(f"{z.shape[0]} points vs {y.shape[0]} responses")
    if z.shape[0] < 4:
        raise ParameterError(f"need at least 4 training points, got {z.shape[0]}")
    if not np.all(np.isfinite(y)) or not np.all(np.isfinite(z)):
        raise ParameterError("training data must be finite")
    span = z.max(axis=0) - z.min(axis=0)
    span = np.where(span > 0.0, span, 1.0)  # flat coordinates keep unit span
    box_lo = z.min(axis=0) - 0.025 * span
    box_hi = z.max(axis=0) + 0.025 * span
    return z, y, box_lo, box_hi


def fit(z: np.ndarray, y: np.ndarray, config: HpcfeConfig = HpcfeConfig()) -> HpcfeModel:
    """Train the hybrid surrogate on reduced coordinates.

    Training coordinates are affinely rescaled per dimension to [-1, 1] with a
    5% margin box (kept on the model; predictions outside it are legitimate
    extrapolation and only flip a flag).  Length scales maximize the
    concentrated log-likelihood over Sobol-spread multi-starts in log space;
    best candidate by likelihood, then lexicographic theta.
    """
    z, y, box_lo, box_hi = _validate_training(z, y)
    zs = 2.0 * (z - box_lo) / (box_hi - box_lo) - 1.0
    r = z.shape[1]
    g0 = float(y.mean())
    d = y - g0
    psi, basis_map = build_design_matrix(zs, config)
    var_floor = max(float(np.var(y)), 1e-30) * 1e-16

    lo, hi = config.theta_bounds
    log_lo, log_hi = math.log10(lo), math.log10(hi)
    starts = log_lo + (log_hi - log_lo) * sobol_points(config.restarts, r).values
    max_evals = config.nm_max_evals or (60 + 40 * r)
    notes: list[str] = []

    def neg_ll(log_theta: np.ndarray) -> float:
        theta = 10.0 ** np.asarray(log_theta, dtype=float)
        try:
            ll, _, _, _ = _profile_likelihood(zs, d, psi, theta, config.nugget,
                                              var_floor)
        except NumericalError:
            return math.inf
        return -ll if math.isfinite(ll) else math.inf

    candidates = []
    for x0 in starts:
        res = minimize(neg_ll, x0, method="Nelder-Mead",
                       bounds=[(log_lo, log_hi)] * r,
                       options={"maxfev": max_evals, "xatol": 1e-3, "fatol": 1e-4})
        if math.isfinite(res.fun):
            candidates.append((float(res.fun), tuple(10.0 ** np.asarray(res.x))))
    if not candidates:
        raise NumericalError("likelihood was non-finite for every optimizer start")
    candidates.sort(key=lambda c: (c[0], c[1]))
    best_theta = np.asarray(candidates[0][1], dtype=float)

    log_best = np.log10(best_theta)
    edge = np.isclose(log_best, log_lo, atol=1e-6) | np.isclose(log_best, log_hi, atol=1e-6)
    if edge.any():
        msg = "length scale at optimization bound"
        warnings.warn(msg, RuntimeWarning)
        notes.append(msg)

    _, alpha, sigma2, eff = _profile_likelihood(zs, d, psi, best_theta,
                                                config.nugget, var_floor, notes)
    return HpcfeModel(config=config, g0=g0, alpha=alpha, theta=best_theta,
                      sigma2=sigma2, z_train=z, d=d, basis_map=basis_map,
                      box_lo=box_lo, box_hi=box_hi, nugget=eff,
                      fit_notes=tuple(notes))
