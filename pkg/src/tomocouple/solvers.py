"""Iterative reconstruction with an arbitrary forward/backprojector pairing.

Every solver takes the forward kind ``fwd`` (which defines the cost) and an
independent backprojector kind ``adj`` (which drives the updates). With
``fwd == adj`` the backprojector is the exact transpose; otherwise the
iteration is whatever the mismatched pair makes of it, and divergence is
recorded in the returned :class:`ConvergenceTrace` rather than hidden.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from tomocouple.core import Geometry, check_sinogram, reconstruction_circle_mask
from tomocouple.metrics import psnr
from tomocouple.projectors import get_projector

log = logging.getLogger(__name__)

DIVERGENCE_FACTOR = 1e6


class Algorithm(str, enum.Enum):
    ADMM = "admm"
    PWLS = "pwls"
    MLEM = "mlem"
    SIRT = "sirt"

    @classmethod
    def parse(cls, token) -> "Algorithm":
        if isinstance(token, cls):
            return token
        try:
            return cls(str(token).strip().lower())
        except ValueError:
            valid = "|".join(k.value for k in cls)
            raise ValueError(f"unknown algorithm {token!r}; expected one of {valid}") from None

    def __str__(self):
        return self.value


ALL_ALGORITHMS = tuple(Algorithm)


@dataclass(frozen=True)
class SolverConfig:
    """Iteration count, regularisation weights and numerical floors.

    ``tv_weight``, ``admm_penalty`` and ``inner_cg_iters`` apply to ADMM,
    ``huber_weight`` and ``huber_delta`` to PWLS.
    """

    algorithm: Algorithm = Algorithm.ADMM
    iterations: int = 100
    tv_weight: float = 0.0
    admm_penalty: float = 1.0
    huber_weight: float = 0.0
    huber_delta: float = 1.0
    inner_cg_iters: int = 4
    constraints_enabled: bool = True
    epsilon: float = 1e-12

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm.parse(self.algorithm))
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.inner_cg_iters < 1:
            raise ValueError("inner_cg_iters must be at least 1")
        for name in ("tv_weight", "huber_weight"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and nonnegative")
        for name in ("admm_penalty", "huber_delta", "epsilon"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and positive")

    def with_overrides(self, **kw) -> "SolverConfig":
        return replace(self, **kw)


@dataclass
class ConvergenceTrace:
    """Per-iteration cost and PSNR (NaN when no reference was supplied)."""

    cost: list = field(default_factory=list)
    psnr: list = field(default_factory=list)
    diverged: bool = False
    initial_cost: float = math.nan

    def __len__(self):
        return len(self.cost)

    @property
    def final_cost(self) -> float:
        if self.diverged or not self.cost:
            return math.inf
        return self.cost[-1]

    def write_csv(self, fh) -> None:
        fh.write("iter,cost,psnr,diverged\n")
        flag = int(self.diverged)
        for k, (c, p) in enumerate(zip(self.cost, self.psnr), start=1):
            fh.write(f"{k},{c:.17g},{p:.17g},{flag}\n")


def apply_constraints(img) -> np.ndarray:
    """Clamp negatives to zero and zero everything outside the circle."""
    img = np.asarray(img, dtype=np.float64)
    return np.maximum(img, 0.0) * reconstruction_circle_mask(img.shape[0])


def normalization_image(adj_kind, geometry: Geometry, eps: float = 1e-12) -> np.ndarray:
    """``1 / max(R*(1), eps)`` inside the reconstruction circle, zero outside."""
    back = get_projector(adj_kind, geometry).adjoint(np.ones(geometry.shape))
    return reconstruction_circle_mask(geometry.num_cells) / np.maximum(back, eps)


# --------------------------------------------------------------------------
# finite differences
# --------------------------------------------------------------------------


def grad2d(f) -> np.ndarray:
    """Forward differences along rows and columns; last difference is zero."""
    d = np.zeros((2,) + f.shape)
    d[0, :-1, :] = f[1:, :] - f[:-1, :]
    d[1, :, :-1] = f[:, 1:] - f[:, :-1]
    return d


def grad2d_adjoint(d) -> np.ndarray:
    """Transpose of :func:`grad2d`."""
    out = np.zeros(d.shape[1:])
    out[:-1, :] -= d[0, :-1, :]
    out[1:, :] += d[0, :-1, :]
    out[:, :-1] -= d[1, :, :-1]
    out[:, 1:] += d[1, :, :-1]
    return out


def huber(t, delta: float) -> np.ndarray:
    a = np.abs(t)
    return np.where(a <= delta, 0.5 * t * t, delta * a - 0.5 * delta * delta)


def huber_derivative(t, delta: float) -> np.ndarray:
    return np.clip(t, -delta, delta)


def soft_threshold(x, tau: float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


# --------------------------------------------------------------------------
# iteration driver
# --------------------------------------------------------------------------


class _Monitor:
    """Logs cost/PSNR and decides divergence.

    Divergence: a non-finite cost, or a cost above ``1e6 * |initial cost|``.
    """

    def __init__(self, initial_cost, ref, mask):
        self.trace = ConvergenceTrace(initial_cost=float(initial_cost))
        self.ref = ref
        self.mask = mask
        self.limit = DIVERGENCE_FACTOR * abs(float(initial_cost))

    def record(self, cost, f) -> bool:
        cost = float(cost)
        bad = not math.isfinite(cost) or (self.limit > 0 and cost > self.limit)
        if not bad and not np.all(np.isfinite(f)):
            bad = True
        self.trace.cost.append(cost)
        if self.ref is None or bad:
            self.trace.psnr.append(math.nan)
        else:
            self.trace.psnr.append(psnr(f, self.ref, self.mask))
        if bad:
            self.trace.diverged = True
        return bad


def _setup(sino, fwd, adj):
    s = np.asarray(sino, dtype=np.float64)
    geometry = Geometry(*s.shape)
    check_sinogram(s, geometry)
    return s, geometry, get_projector(fwd, geometry), get_projector(adj, geometry)


def _check_algorithm(cfg, expected):
    if cfg.algorithm is not expected:
        raise ValueError(f"config is for {cfg.algorithm}, expected {expected}")


def _mask_for(geometry):
    return reconstruction_circle_mask(geometry.num_cells)


# --------------------------------------------------------------------------
# ADMM with anisotropic TV
# --------------------------------------------------------------------------


def admm_cost(A, f, s, lam, Af=None) -> float:
    r = (A.forward(f) if Af is None else Af) - s
    return 0.5 * float(np.vdot(r, r)) + lam * float(np.abs(grad2d(f)).sum())


def admm_tv(sino, fwd, adj, cfg: SolverConfig, ref=None, f0=None):
    """ADMM for ``1/2 ||R f - s||^2 + lambda ||D f||_1``.

    The f-subproblem ``(B R + rho D^T D) f = B s + rho D^T (z - u)`` is solved
    approximately by warm-started conjugate gradients, where ``B`` is the
    backprojector of ``adj``. With a mismatched ``B`` the system matrix is
    not symmetric and CG may fail; that shows up as divergence.

    Returns
    -------
    (ndarray, ConvergenceTrace)
    """
    _check_algorithm(cfg, Algorithm.ADMM)
    s, geometry, A, B = _setup(sino, fwd, adj)
    P = geometry.num_cells
    lam, rho = cfg.tv_weight, cfg.admm_penalty
    f = np.zeros((P, P)) if f0 is None else np.array(f0, dtype=np.float64)
    z = grad2d(f)
    u = np.zeros_like(z)
    Bs = B.adjoint(s)
    Af = A.forward(f)
    mon = _Monitor(admm_cost(A, f, s, lam, Af), ref, _mask_for(geometry))

    def normal(p, Ap=None):
        Ap = A.forward(p) if Ap is None else Ap
        return B.adjoint(Ap) + rho * grad2d_adjoint(grad2d(p))

    for _ in range(cfg.iterations):
        rhs = Bs + rho * grad2d_adjoint(z - u)
        f_new = f.copy()
        r = rhs - normal(f_new, Af)
        p = r.copy()
        rr = float(np.vdot(r, r))
        for _ in range(cfg.inner_cg_iters):
            if rr == 0.0:
                break
            q = normal(p)
            pq = float(np.vdot(p, q))
            if pq == 0.0 or not math.isfinite(pq):
                break
            alpha = rr / pq
            f_new += alpha * p
            r -= alpha * q
            rr_new = float(np.vdot(r, r))
            p = r + (rr_new / rr) * p
            rr = rr_new
        Df = grad2d(f_new)
        z = soft_threshold(Df + u, lam / rho)
        u = u + Df - z
        if cfg.constraints_enabled:
            f_new = apply_constraints(f_new)
        Af_new = A.forward(f_new)
        if mon.record(admm_cost(A, f_new, s, lam, Af_new), f_new):
            break
        f, Af = f_new, Af_new
    return f, mon.trace


# --------------------------------------------------------------------------
# PWLS with Huber penalty
# --------------------------------------------------------------------------


def pwls_cost(A, f, s, W, beta, delta, Af=None) -> float:
    r = (A.forward(f) if Af is None else Af) - s
    return 0.5 * float(np.vdot(r, W * r)) + beta * float(huber(grad2d(f), delta).sum())


def poisson_weights(sino, counts_per_unit: float) -> np.ndarray:
    """Inverse plug-in variance of rescaled Poisson data.

    ``Var = s / c``; floored at the variance of a single count (``1/c^2``)
    so that empty detector cells do not receive unbounded weight.
    """
    c = float(counts_per_unit)
    var = np.maximum(np.asarray(sino, dtype=np.float64), 1.0 / c) / c
    return 1.0 / var


def pwls_huber(sino, fwd, adj, cfg: SolverConfig, weights=None, ref=None, f0=None):
    """Diagonally preconditioned gradient descent on the PWLS-Huber objective.

    The step is ``f <- f - g / d`` with ``d = B(W R 1) + 8 beta max(1, 1/delta)``,
    a separable majoriser of the Hessian for matched nonnegative operators.
    """
    _check_algorithm(cfg, Algorithm.PWLS)
    s, geometry, A, B = _setup(sino, fwd, adj)
    P = geometry.num_cells
    eps = cfg.epsilon
    beta, delta = cfg.huber_weight, cfg.huber_delta
    W = np.ones_like(s) if weights is None else check_sinogram(weights, geometry)
    d = B.adjoint(W * A.forward(np.ones((P, P)))) + 8.0 * beta * max(1.0, 1.0 / delta)
    d = np.where(np.abs(d) < eps, eps, d)
    f = np.zeros((P, P)) if f0 is None else np.array(f0, dtype=np.float64)
    Af = A.forward(f)
    mon = _Monitor(pwls_cost(A, f, s, W, beta, delta, Af), ref, _mask_for(geometry))
    for _ in range(cfg.iterations):
        g = B.adjoint(W * (Af - s))
        if beta > 0:
            g += beta * grad2d_adjoint(huber_derivative(grad2d(f), delta))
        f_new = f - g / d
        if cfg.constraints_enabled:
            f_new = apply_constraints(f_new)
        Af_new = A.forward(f_new)
        if mon.record(pwls_cost(A, f_new, s, W, beta, delta, Af_new), f_new):
            break
        f, Af = f_new, Af_new
    return f, mon.trace


# --------------------------------------------------------------------------
# MLEM
# --------------------------------------------------------------------------


def mlem_cost(Af, s, eps) -> float:
    """Poisson negative log-likelihood up to a data-only constant."""
    return float(np.sum(Af - s * np.log(np.maximum(Af, eps))))


def mlem(sino, fwd, adj, cfg: SolverConfig, ref=None, f0=None):
    """Multiplicative EM update ``f <- f C B(s / max(R f, eps))``.

    Starts from one inside the circle. Negative data are clamped to zero.
    """
    _check_algorithm(cfg, Algorithm.MLEM)
    s, geometry, A, B = _setup(sino, fwd, adj)
    if np.any(s < 0):
        log.warning("clamping negative sinogram samples for MLEM")
        s = np.maximum(s, 0.0)
    eps = cfg.epsilon
    mask = _mask_for(geometry)
    C = normalization_image(adj, geometry, eps)
    f = mask.copy() if f0 is None else np.array(f0, dtype=np.float64)
    Af = A.forward(f)
    mon = _Monitor(mlem_cost(Af, s, eps), ref, mask)
    for _ in range(cfg.iterations):
        f_new = f * C * B.adjoint(s / np.maximum(Af, eps))
        if cfg.constraints_enabled:
            f_new = f_new * mask
        Af_new = A.forward(f_new)
        if mon.record(mlem_cost(Af_new, s, eps), f_new):
            break
        f, Af = f_new, Af_new
    return f, mon.trace


# --------------------------------------------------------------------------
# SIRT
# --------------------------------------------------------------------------


def sirt(sino, fwd, adj, cfg: SolverConfig, ref=None, f0=None):
    """Simultaneous update ``f <- f + C B(W (s - R f))`` from ``f = 0``.

    ``C = 1/B(1)`` (circle-masked) and ``W = 1/R(1)``; the logged cost is
    the ``W``-weighted residual ``1/2 ||W^(1/2) (R f - s)||^2``.
    """
    _check_algorithm(cfg, Algorithm.SIRT)
    s, geometry, A, B = _setup(sino, fwd, adj)
    P = geometry.num_cells
    eps = cfg.epsilon
    C = normalization_image(adj, geometry, eps)
    W = 1.0 / np.maximum(A.forward(np.ones((P, P))), eps)
    f = np.zeros((P, P)) if f0 is None else np.array(f0, dtype=np.float64)
    Af = A.forward(f)

    def cost(Af):
        r = Af - s
        return 0.5 * float(np.vdot(r, W * r))

    mon = _Monitor(cost(Af), ref, _mask_for(geometry))
    for _ in range(cfg.iterations):
        f_new = f + C * B.adjoint(W * (s - Af))
        if cfg.constraints_enabled:
            f_new = apply_constraints(f_new)
        Af_new = A.forward(f_new)
        if mon.record(cost(Af_new), f_new):
            break
        f, Af = f_new, Af_new
    return f, mon.trace


SOLVERS = {
    Algorithm.ADMM: admm_tv,
    Algorithm.PWLS: pwls_huber,
    Algorithm.MLEM: mlem,
    Algorithm.SIRT: sirt,
}


def reconstruct(sino, fwd, adj, cfg: SolverConfig, ref=None, weights=None):
    """Dispatch on ``cfg.algorithm``."""
    if cfg.algorithm is Algorithm.PWLS:
        return pwls_huber(sino, fwd, adj, cfg, weights=weights, ref=ref)
    return SOLVERS[cfg.algorithm](sino, fwd, adj, cfg, ref=ref)


# --------------------------------------------------------------------------
# ablation
# --------------------------------------------------------------------------


class AblationCase(str, enum.Enum):
    FULL = "coupled+constraints+optimal"
    COUPLED_ONLY = "coupled-only"
    UNCOUPLED = "uncoupled+constraints+optimal"


def best_iterate(trace: ConvergenceTrace) -> int:
    """1-based iteration with the highest logged PSNR."""
    vals = np.asarray(trace.psnr, dtype=np.float64)
    if vals.size == 0 or np.all(np.isnan(vals)):
        raise ValueError("trace carries no PSNR values")
    return int(np.nanargmax(vals)) + 1


def ablation_admm(sino, mode, fwd, cfg: SolverConfig, ref, uncoupled_adj=None) -> float:
    """PSNR of one of the three ADMM ablation cases.

    ``FULL`` uses the matched adjoint with constraints and stops at the
    PSNR-optimal iteration; ``COUPLED_ONLY`` keeps the matched adjoint but
    runs unconstrained for ``cfg.iterations``; ``UNCOUPLED`` uses
    ``uncoupled_adj`` with constraints and its own optimal stopping point.
    """
    mode = AblationCase(mode)
    if mode is AblationCase.COUPLED_ONLY:
        _, tr = admm_tv(sino, fwd, fwd, cfg.with_overrides(constraints_enabled=False), ref=ref)
        if tr.diverged:
            return -math.inf
        return tr.psnr[-1]
    adj = fwd if mode is AblationCase.FULL else uncoupled_adj
    if adj is None:
        raise ValueError("uncoupled case needs an adjoint kind")
    _, tr = admm_tv(sino, fwd, adj, cfg.with_overrides(constraints_enabled=True), ref=ref)
    return float(np.nanmax(np.asarray(tr.psnr, dtype=np.float64)))
