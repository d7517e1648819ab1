"""Minorization-maximization of the sum SE over LSFP weights.

Each UE's SINR ``N / D`` is minorized by ``2 z sqrt(N~) - z^2 D~`` with
``z = sqrt(N_t) / D_t``. ``sqrt(N~)`` is the affine lower bound of
``alpha_a |gamma . b|`` and ``D~`` replaces the concave ``-alpha_a^2 |gamma . b|^2``
part of ``D`` with its tangent, so ``D~ >= D`` is a convex quadratic. The
quadratic forms that make up ``Q`` are PSD and stay exact. The per-UE
surrogate is therefore concave, and so is ``log2(1 + .)`` of it.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DomainError, InvariantViolationError, SurrogateError
from .performance import LsfpWeights, SinrTerms, _gamma

log = logging.getLogger(__name__)

_LN2 = np.log(2.0)
_MAX_STEP = 1e12


def ratio_surrogate(A_val: float, B_val: float):
    """Multiplier ``y = sqrt(A)/B`` and the bound ``h(A, B) = 2 y sqrt(A) - y^2 B``.

    ``h`` lower-bounds ``A / B`` everywhere and touches it at the expansion point.
    """
    if not B_val > 0:
        raise DomainError(f"denominator must be positive, got {B_val}")
    if A_val < 0:
        raise DomainError(f"numerator must be non-negative, got {A_val}")
    y = np.sqrt(A_val) / B_val

    def bound(A, B):
        return 2 * y * np.sqrt(A) - y**2 * B

    return y, bound


def linearize_norm(b, gamma_t):
    """Affine minorant of ``|gamma . b|`` tangent at ``gamma_t`` (real ``gamma``).

    ``g1(gamma) = Re(conj(u_t) (gamma . b)) / |u_t|`` with ``u_t = gamma_t . b``.
    When ``u_t = 0`` the unit phase ``1`` is used instead, which still
    minorizes.
    """
    b = np.asarray(b, dtype=complex)
    u_t = np.dot(np.asarray(gamma_t, dtype=float), b)
    if abs(u_t) == 0:
        log.info("zero expansion value in norm linearization; using unit phase")
    phase = np.exp(1j * np.angle(u_t))
    coef = np.real(np.conj(phase) * b)

    def g1(gamma):
        return np.tensordot(np.asarray(gamma, dtype=float), coef, axes=([-1], [0]))

    return g1


def linearize_product(gt_r: float, gt_rp: float):
    """First-order expansion of ``x * y`` around ``(gt_r, gt_rp)``."""

    def g2(x, y):
        return gt_r * y + gt_rp * x - gt_r * gt_rp

    return g2


class SeObjective:
    """Exact sum SE ``scale * sum log2(1 + N/D)`` with its gradient in ``gamma``."""

    def __init__(self, terms: SinrTerms, scale: float = 1.0):
        self.terms = terms
        self.scale = float(scale)
        self.G = terms.quadratic_matrices()
        self.b = terms.b
        self.alpha = terms.alpha_a
        self.c_q = terms.alpha_a * (1 + terms.kappa_ru**2)
        self.noise = terms.alpha_a * terms.noise_power

    def _parts(self, gamma):
        g = _gamma(gamma)
        Q = np.einsum("nja,lkjab,njb->lk", g, self.G, g, optimize=True)
        u = np.einsum("lkr,lkr->lk", g, self.b)
        N = self.alpha**2 * np.abs(u) ** 2
        T = self.c_q * Q + self.noise
        return g, u, N, T, T - N

    def sinr(self, gamma) -> np.ndarray:
        _, _, N, _, D = self._parts(gamma)
        return N / D

    def value(self, gamma) -> float:
        _, _, _, T, D = self._parts(gamma)
        return float(self.scale * np.sum(np.log2(T) - np.log2(D)))

    def grad(self, gamma) -> np.ndarray:
        g, u, _, T, D = self._parts(gamma)
        w = self.scale / _LN2
        # d/d gamma of sum c_lk Q_lk
        cQ = w * self.c_q * (1 / T - 1 / D)
        grad = 2 * np.einsum("lk,lkjab,njb->nja", cQ, self.G, g, optimize=True)
        # dN_lk / d gamma[l, k, r] = 2 alpha^2 Re(conj(u) b[r])
        dN = 2 * (self.alpha**2)[..., None] * np.real(np.conj(u)[..., None] * self.b)
        grad += (w / D)[..., None] * dN
        return grad


class Surrogate:
    """Concave minorant of :class:`SeObjective` tangent at ``gamma_t``."""

    def __init__(self, terms: SinrTerms, gamma_t, scale: float = 1.0):
        self.objective = SeObjective(terms, scale)
        obj = self.objective
        self.gamma_t = np.array(_gamma(gamma_t), dtype=float)
        _, u_t, N_t, _, D_t = obj._parts(self.gamma_t)
        if np.any(D_t <= 0):
            raise SurrogateError("non-positive SINR denominator at the expansion point")
        self.u_t = u_t
        self.z = np.sqrt(N_t) / D_t
        phase = np.exp(1j * np.angle(u_t))
        # affine minorant of |u|: Re(conj(phase) u)
        self.lin = np.real(np.conj(phase)[..., None] * obj.b)

    @property
    def scale(self) -> float:
        return self.objective.scale

    def _h(self, gamma):
        obj = self.objective
        g = _gamma(gamma)
        Q = np.einsum("nja,lkjab,njb->lk", g, obj.G, g, optimize=True)
        u = np.einsum("lkr,lkr->lk", g, obj.b)
        sqrt_n = obj.alpha * np.einsum("lkr,lkr->lk", g, self.lin)
        tangent = 2 * np.real(np.conj(self.u_t) * u) - np.abs(self.u_t) ** 2
        D_tilde = obj.c_q * Q + obj.noise - obj.alpha**2 * tangent
        return g, u, 2 * self.z * sqrt_n - self.z**2 * D_tilde

    def value(self, gamma) -> float:
        _, _, h = self._h(gamma)
        if np.any(h <= -1):
            return -np.inf
        return float(self.scale * np.sum(np.log2(1 + h)))

    def grad(self, gamma) -> np.ndarray:
        obj = self.objective
        g, _, h = self._h(gamma)
        c = self.scale / (_LN2 * (1 + h))
        cz2 = c * self.z**2
        grad = -2 * np.einsum("lk,lkjab,njb->nja", cz2 * obj.c_q, obj.G, g, optimize=True)
        own = 2 * (c * self.z * obj.alpha)[..., None] * self.lin
        own += (cz2 * obj.alpha**2)[..., None] * 2 * np.real(np.conj(self.u_t)[..., None] * obj.b)
        return grad + own


def build_surrogate(terms: SinrTerms, gamma_t, scale: float = 1.0, tol: float = 1e-9) -> Surrogate:
    """Surrogate at ``gamma_t``; raises :class:`SurrogateError` if not tangent."""
    sur = Surrogate(terms, gamma_t, scale)
    f = sur.objective.value(sur.gamma_t)
    fs = sur.value(sur.gamma_t)
    if not abs(fs - f) <= tol * max(1.0, abs(f)):
        raise SurrogateError(f"surrogate not tangent: {fs} vs {f}")
    return sur


def project(gamma: np.ndarray, rho_d: float) -> np.ndarray:
    """Euclidean projection onto the non-negative orthant intersected with every per-BS ball."""
    g = np.clip(gamma, 0.0, None)
    norms = np.sqrt(np.sum(g**2, axis=(0, 1)))
    radius = np.sqrt(rho_d)
    factor = np.where(norms > radius, radius / np.where(norms > 0, norms, 1.0), 1.0)
    return g * factor[None, None, :]


def random_feasible(shape, rho_d: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform direction in the orthant, per-BS radius uniform in ``[0, sqrt(rho_d)]``."""
    g = np.abs(rng.standard_normal(shape))
    norms = np.sqrt(np.sum(g**2, axis=(0, 1)))
    radius = np.sqrt(rho_d) * rng.uniform(size=shape[2])
    return g * (radius / norms)[None, None, :]


@dataclass
class SubproblemResult:
    gamma: np.ndarray
    value: float
    steps: int
    converged: bool
    line_search_failed: bool = False


def solve_subproblem(
    surrogate: Surrogate,
    rho_d: float,
    tol: float = 1e-10,
    max_steps: int = 500,
    gamma0=None,
) -> SubproblemResult:
    """Projected gradient ascent with Barzilai-Borwein steps and backtracking.

    Stops when the projected-gradient step ``P(gamma + grad) - gamma`` is
    shorter than ``tol`` or after ``max_steps``. The returned point is
    feasible and never worse than the start.
    """
    g = project(np.array(surrogate.gamma_t if gamma0 is None else _gamma(gamma0), float), rho_d)
    f = surrogate.value(g)
    grad = surrogate.grad(g)
    step = 1.0 / max(np.linalg.norm(grad), 1e-12)
    failed = False
    converged = False
    steps = 0
    for steps in range(1, max_steps + 1):
        if np.linalg.norm(project(g + grad, rho_d) - g) < tol:
            converged = True
            steps -= 1
            break
        # allowance for rounding in the objective near the optimum
        slack = 64 * np.finfo(float).eps * (abs(f) + 1)
        for _ in range(80):
            cand = project(g + step * grad, rho_d)
            d = cand - g
            f_new = surrogate.value(cand)
            if f_new >= f + np.sum(grad * d) - np.sum(d * d) / (2 * step) - slack:
                break
            step /= 2
        else:
            failed = True
            log.warning("line search failed after %d steps; returning best iterate", steps)
            break
        grad_new = surrogate.grad(cand)
        s, y = d.ravel(), (grad - grad_new).ravel()
        sy = float(s @ y)
        step = float(s @ s) / sy if sy > 0 else step * 2
        step = min(step, _MAX_STEP)
        if np.max(np.abs(d)) == 0:
            converged = True
            break
        if f_new < f:
            break
        g, f, grad = cand, f_new, grad_new
    return SubproblemResult(g, f, steps, converged, failed)


@dataclass
class MmIteration:
    iteration: int
    objective: float
    max_slack: float
    inner_steps: int
    step_norm: float
    wall_time: float
    accelerated: bool = False


@dataclass
class MmTrace:
    iterations: list[MmIteration] = field(default_factory=list)
    converged: bool = False

    @property
    def objectives(self) -> np.ndarray:
        return np.array([it.objective for it in self.iterations])

    @property
    def n_iter(self) -> int:
        return max(len(self.iterations) - 1, 0)

    def to_csv(self, path) -> Path:
        """Write one row per iterate; wall-clock time is left out so the file is reproducible."""
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["iter", "objective", "max_slack", "inner_steps", "step_norm", "accelerated"])
            for it in self.iterations:
                writer.writerow(
                    [
                        it.iteration,
                        repr(it.objective),
                        repr(it.max_slack),
                        it.inner_steps,
                        repr(it.step_norm),
                        int(it.accelerated),
                    ]
                )
        return path


@dataclass
class SurrogateCheck:
    tangency_gap: float
    gradient_rel_error: float
    minorization_gap: float
    concavity_gap: float


def check_surrogate(
    surrogate: Surrogate,
    rho_d: float,
    rng: np.random.Generator,
    n_points: int = 100,
    fd_step: float = 1e-5,
    tangency_tol: float = 1e-9,
    gradient_tol: float = 1e-4,
    minorization_tol: float = 1e-8,
) -> SurrogateCheck:
    """Numerically verify tangency, gradient match, minorization and concavity.

    Raises :class:`SurrogateError` on the first violated condition.
    """
    obj = surrogate.objective
    g_t = surrogate.gamma_t
    tangency = abs(surrogate.value(g_t) - obj.value(g_t))
    if tangency > tangency_tol:
        raise SurrogateError(f"tangency gap {tangency:.3e}")

    fd = np.zeros_like(g_t)
    for idx in np.ndindex(g_t.shape):
        e = np.zeros_like(g_t)
        e[idx] = fd_step
        fd[idx] = (obj.value(g_t + e) - obj.value(g_t - e)) / (2 * fd_step)
    grad = surrogate.grad(g_t)
    rel = np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-300)
    if rel > gradient_tol:
        raise SurrogateError(f"gradient mismatch {rel:.3e}")

    worst_minor = -np.inf
    worst_concave = -np.inf
    for _ in range(n_points):
        x = random_feasible(g_t.shape, rho_d, rng)
        fx = obj.value(x)
        sx = surrogate.value(x)
        worst_minor = max(worst_minor, sx - fx)
        if sx - fx > minorization_tol * max(1.0, abs(fx)):
            raise SurrogateError(f"surrogate exceeds objective by {sx - fx:.3e}")
        y = random_feasible(g_t.shape, rho_d, rng)
        sy = surrogate.value(y)
        if np.isfinite(sx) and np.isfinite(sy):
            gap = 0.5 * (sx + sy) - surrogate.value(0.5 * (x + y))
            worst_concave = max(worst_concave, gap)
            if gap > 1e-10 * max(1.0, abs(sx), abs(sy)):
                raise SurrogateError(f"surrogate not concave along a segment (gap {gap:.3e})")
    return SurrogateCheck(tangency, rel, worst_minor, worst_concave)


def mm_optimize(
    terms: SinrTerms,
    init=None,
    rho_d: float = 1.0,
    eps: float = 1e-4,
    max_iters: int = 50,
    scale: float = 1.0,
    accelerate: bool = True,
    memory: int = 5,
    inner_tol: float = 1e-10,
    inner_steps: int = 500,
    verify: bool = False,
    verify_points: int = 100,
    seed: int = 0,
    decrease_tol: float = 1e-9,
) -> tuple[LsfpWeights, MmTrace]:
    """Alternate surrogate construction and concave maximization.

    Parameters
    ----------
    terms : SinrTerms
    init : LsfpWeights or array, optional
        Feasible starting point. Defaults to single-layer weights with an
        equal power split.
    rho_d : float
        Per-BS power budget.
    eps : float
        Stop once two consecutive iterates are within ``eps`` in Euclidean norm.
    max_iters : int
        Budget of surrogate maximizations.
    scale : float
        Multiplier of the objective (e.g. the pre-log factor).
    accelerate : bool
        Treat one MM step as a fixed-point map and mix the last ``memory``
        steps (Anderson acceleration). The mixed point replaces the plain MM
        point only if its objective is at least as large, so the objective
        stays nondecreasing and every iteration costs one surrogate solve.
    verify : bool
        Run :func:`check_surrogate` at every expansion point.

    Returns
    -------
    weights : LsfpWeights
    trace : MmTrace
        Row 0 holds the initial point; every further row is one surrogate
        maximization.
    """
    L, K = terms.b.shape[:2]
    if init is None:
        gamma = np.zeros((L, K, L))
        gamma[np.arange(L), :, np.arange(L)] = np.sqrt(rho_d / K)
    else:
        gamma = np.array(_gamma(init), dtype=float)
    if np.any(gamma < 0) or np.any(np.sum(gamma**2, axis=(0, 1)) > rho_d * (1 + 1e-12)):
        raise DomainError("initial weights are infeasible")
    rng = np.random.default_rng(seed)
    obj = SeObjective(terms, scale)
    f = obj.value(gamma)
    trace = MmTrace()
    trace.iterations.append(MmIteration(0, f, _slack(gamma, rho_d), 0, 0.0, 0.0))
    points, residuals = [], []
    for t in range(1, max_iters + 1):
        start = time.perf_counter()
        sur = build_surrogate(terms, gamma, scale)
        if verify:
            check_surrogate(sur, rho_d, rng, n_points=verify_points)
        res = solve_subproblem(sur, rho_d, tol=inner_tol, max_steps=inner_steps)
        new, f_new = res.gamma, obj.value(res.gamma)
        accelerated = False
        if accelerate:
            points, residuals = points[-memory:] + [gamma], residuals[-memory:] + [res.gamma - gamma]
            cand = _anderson(points, residuals, rho_d)
            if cand is not None:
                with np.errstate(all="ignore"):
                    f_cand = obj.value(cand)
                if np.isfinite(f_cand) and f_cand >= f_new:
                    new, f_new, accelerated = cand, f_cand, True
        if f_new < f - decrease_tol:
            raise InvariantViolationError(f"objective decreased at iteration {t}: {f} -> {f_new}")
        step = float(np.linalg.norm(new - gamma))
        gamma, f = new, f_new
        trace.iterations.append(
            MmIteration(t, f, _slack(gamma, rho_d), res.steps, step, time.perf_counter() - start, accelerated)
        )
        if step <= eps:
            trace.converged = True
            break
    return LsfpWeights(gamma), trace


def _anderson(points, residuals, rho_d):
    """Anderson mixing of MM steps, projected onto the feasible set.

    Returns ``None`` until two steps are available.
    """
    if len(points) < 2:
        return None
    X = np.array([p.ravel() for p in points])
    R = np.array([r.ravel() for r in residuals])
    dX, dR = np.diff(X, axis=0).T, np.diff(R, axis=0).T
    theta = np.linalg.lstsq(dR, R[-1], rcond=1e-12)[0]
    mixed = X[-1] + R[-1] - (dX + dR) @ theta
    if not np.all(np.isfinite(mixed)):
        return None
    return project(mixed.reshape(points[-1].shape), rho_d)


def _slack(gamma, rho_d) -> float:
    """Largest per-BS excess ``sum gamma^2 - rho_d`` (non-positive when feasible)."""
    return float(np.max(np.sum(gamma**2, axis=(0, 1)) - rho_d))
