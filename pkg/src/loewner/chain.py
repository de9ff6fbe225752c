"""Loewner chains from evolution families.

The standard chain is evaluated through

    f_s(z) = lim_{T -> inf} h_T^{-1}(phi_{s,T}(z)) / beta(T),

where h_T is the disk automorphism with h_T(0) = a(T) = phi_{0,T}(0) and
rotation b(T) = phi'_{0,T}(0) / |phi'_{0,T}(0)|, and
beta(T) = |phi'_{0,T}(0)| / (1 - |a(T)|^2).

Evaluating that quotient naively loses every significant digit once phi_{s,T}(z)
and a(T) are both close to the same boundary point. Instead the reference orbit
a(t) and L(t) = log phi'_{0,t}(0) are integrated together with the scaled offsets

    u_k(t) = (phi_{s,t}(z_k) - a(t)) / phi'_{0,t}(0),

which obey u' = (G(a + d) - G(a) - d G'(a)) / phi'_{0,t}(0) with d = u phi'_{0,t}(0).
The offsets converge with the chain itself, since

    h_T^{-1}(a + d) / beta(T) = u / (1 - conj(a) d / (1 - |a|^2)),

so step control acts on the quantity being computed, and an offset that starts
at zero stays exactly zero.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
import math
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate as _quad

from . import expr as _expr
from .disk import DiskAutomorphism
from .drivers import HerglotzDriver
from .engine import DEFAULT_CONFIG, BoundaryEscape, EvolutionConfig, _Guard, _check_start, iter_path, segments
from .integrate import Stepper

T_MAX = 2.0**10
BETA_T_MAX = 2.0**12
CLASSIFY_TOL = 1e-6
NEVILLE_NODES = 6
DECAY_RATIO = 0.75
LONG_HORIZON_STEP = 0.125  # max step as a fraction of t once past the first horizon


class NotConverged(RuntimeError):
    def __init__(self, horizon, last_delta, value=None):
        self.horizon = horizon
        self.last_delta = last_delta
        self.value = value
        super().__init__(f"chain limit not converged by horizon T={horizon:g} (last delta {last_delta:.3e})")


class NewtonStall(RuntimeError):
    def __init__(self, iterates, residual):
        self.iterates = list(iterates)
        self.residual = residual
        super().__init__(f"Newton inversion stalled after {len(self.iterates)} iterates, residual {residual:.3e}")


class ClassSpotCheckFailed(ValueError):
    pass


# --------------------------------------------------------------------------- frames


@dataclass(frozen=True)
class DecompositionFrame:
    t: float
    a: complex
    b: complex
    beta_t: float

    @property
    def automorphism(self) -> DiskAutomorphism:
        return DiskAutomorphism(self.a, self.b)

    def as_row(self):
        return (self.t, self.a.real, self.a.imag, self.b.real, self.b.imag, self.beta_t)


def _frame_from_state(t, a, L) -> DecompositionFrame:
    mod = math.exp(L.real)
    return DecompositionFrame(float(t), complex(a), complex(cmath.exp(1j * L.imag)), mod / ((1 - abs(a)) * (1 + abs(a))))


class FrameCache:
    """Write-once map t -> (a(t), log phi'_{0,t}(0)), every entry integrated from 0."""

    def __init__(self, d: HerglotzDriver, cfg: EvolutionConfig = DEFAULT_CONFIG):
        self.d = d
        self.cfg = cfg
        self._state = {0.0: (0j, 0j)}

    def state(self, t: float):
        t = float(t)
        if t not in self._state:
            r = next(iter(_iter_zero_path(self.d, [t], self.cfg)))
            self._state.setdefault(t, r)
        return self._state[t]

    def frame(self, t: float) -> DecompositionFrame:
        a, L = self.state(t)
        return _frame_from_state(t, a, L)

    def preload(self, frames: Sequence[DecompositionFrame]):
        for fr in frames:
            L = complex(math.log(fr.beta_t * (1 - abs(fr.a) ** 2)), cmath.phase(fr.b))
            self._state.setdefault(float(fr.t), (complex(fr.a), L))

    def frames(self):
        return [self.frame(t) for t in sorted(self._state)]


def _iter_zero_path(d, times, cfg):
    """Yield (a(t), L(t)) for the orbit of 0 at the sorted positive ``times``."""
    for r in iter_path(d, 0j, 0.0, times, cfg, derivative=True):
        if r.t == 0.0:
            yield 0j, 0j
        else:
            yield r.w, cmath.log(r.v)


def frame_at(d: HerglotzDriver, t: float, cfg: EvolutionConfig = DEFAULT_CONFIG) -> DecompositionFrame:
    """(a(t), b(t), beta(t)) from phi_{0,t}(0) and phi'_{0,t}(0)."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return DecompositionFrame(0.0, 0j, 1 + 0j, 1.0)
    return FrameCache(d, cfg).frame(t)


def frames(d: HerglotzDriver, times: Sequence[float], cfg: EvolutionConfig = DEFAULT_CONFIG) -> list:
    """Frames at several times from a single integration of the orbit of 0."""
    ts = sorted(set(float(t) for t in times))
    out = {}
    for t, (a, L) in zip(ts, _iter_zero_path(d, ts, cfg)):
        out[t] = DecompositionFrame(0.0, 0j, 1 + 0j, 1.0) if t == 0 else _frame_from_state(t, a, L)
    return [out[float(t)] for t in times]


def beta_z(d: HerglotzDriver, z, t: float, cfg: EvolutionConfig = DEFAULT_CONFIG) -> float:
    """(1 - |z|^2) |phi'_{0,t}(z)| / (1 - |phi_{0,t}(z)|^2)."""
    if t == 0:
        return 1.0
    from .engine import evolve_with_derivative

    r = evolve_with_derivative(d, z, 0.0, t, cfg)
    az, aw = abs(z), abs(r.w)
    return (1 - az) * (1 + az) * abs(r.v) / ((1 - aw) * (1 + aw))


def beta_path(d: HerglotzDriver, z, times: Sequence[float], cfg: EvolutionConfig = DEFAULT_CONFIG) -> list:
    """beta_z at every time in ``times`` (sorted) from one integration."""
    return list(_iter_beta(d, z, times, cfg))


def _iter_beta(d, z, times, cfg):
    az = abs(z)
    for r in _long_path(d, z, times, cfg):
        aw = abs(r.w)
        yield (1 - az) * (1 + az) * abs(r.v) / ((1 - aw) * (1 + aw))


def _long_path(d, z, times, cfg):
    """Lazy evolve_path with derivative, relaxing max_step past t = 16 on long grids."""
    prev = 0.0
    w, v = complex(z), 1 + 0j
    for t in times:
        if t > prev:
            step = max(cfg.max_step, LONG_HORIZON_STEP * prev) if prev >= 16 else cfg.max_step
            r = next(iter_path(d, w, prev, [t], cfg.with_(max_step=step), derivative=True))
            w, v = r.w, v * r.v
            prev = t
        yield _Res(w, v, t)


@dataclass
class _Res:
    w: complex
    v: complex
    t: float


def _aitken(b0, b1, b2):
    """Aitken delta-squared extrapolant (unclipped)."""
    d1, d2 = b1 - b0, b2 - b1
    den = d2 - d1
    if d2 == 0 or den == 0 or not math.isfinite(den):
        return b2
    return b2 - d2 * d2 / den


def _doubling(t_max, start=1.0):
    times = [start]
    while times[-1] < t_max:
        times.append(times[-1] * 2)
    return times


def _beta_samples(d, tol, t_max, cfg):
    """(times, betas, beta, converged, reason) on the doubling grid."""
    times = _doubling(t_max)
    betas, ests = [], []
    try:
        for j, b in enumerate(_iter_beta(d, 0j, times, cfg)):
            betas.append(b)
            if b < tol:
                return times[: j + 1], betas, 0.0, True, "below tolerance"
            est = _aitken(*betas[j - 2: j + 1]) if j >= 2 else b
            ests.append(est)
            if j >= 3:
                if abs(est) < tol and abs(ests[-2]) < tol:
                    return times[: j + 1], betas, 0.0, True, "extrapolated below tolerance"
                if abs(b - betas[j - 1]) < tol and abs(betas[j - 1] - betas[j - 2]) < tol:
                    return times[: j + 1], betas, b, True, "stationary"
                if abs(est - ests[-2]) < tol and abs(betas[j - 1] - betas[j - 2]) < 10 * tol:
                    return times[: j + 1], betas, min(max(est, 0.0), b), True, "extrapolated"
    except BoundaryEscape:
        return times[: len(betas)], betas, betas[-1] if betas else 1.0, False, "orbit of 0 reached the boundary guard"
    return times, betas, betas[-1], False, "t_max reached"


def beta_limit(d: HerglotzDriver, tol: float = CLASSIFY_TOL, t_max: float = BETA_T_MAX,
               cfg: EvolutionConfig = DEFAULT_CONFIG):
    """Limit of beta(t) on the doubling grid t = 1, 2, 4, ...

    Returns (beta, converged). beta below ``tol`` is reported as 0. Successive
    values are compared after Aitken extrapolation, which accelerates the
    algebraic decay of parabolic families (beta ~ 1/t) into the tolerance.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    _, _, beta, ok, _ = _beta_samples(d, tol, t_max, cfg)
    return beta, ok


# --------------------------------------------------------------------------- classification


@dataclass
class ChainClassification:
    beta_limit: float
    verdict: str  # "UniqueChain" | "NonUnique" | "Unknown"
    omega_radius: float  # inf for the plane
    automorphism_threshold: Optional[float] = None
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)

    @property
    def omega(self) -> str:
        if self.verdict == "Unknown":
            return "Unknown"
        return "Plane" if math.isinf(self.omega_radius) else "DiskOfRadius"

    def as_dict(self):
        return {
            "verdict": self.verdict,
            "beta_limit": self.beta_limit,
            "omega": self.omega,
            "omega_radius": None if math.isinf(self.omega_radius) else self.omega_radius,
            "automorphism_threshold": self.automorphism_threshold,
            "converged": self.converged,
            "diagnostics": self.diagnostics,
        }


def automorphism_threshold(d, tol=CLASSIFY_TOL, cfg=DEFAULT_CONFIG, samples=None, probe=2.0**-10,
                           resolution=1e-9) -> Optional[float]:
    """Largest T with beta(T) >= 1 - tol, by bisection.

    None when beta drops below 1 - tol immediately, or never drops on the
    sampled grid (an automorphism family throughout).
    """
    f = lambda t: frame_at(d, t, cfg).beta_t
    if f(probe) < 1 - tol:
        return None
    if samples is None:
        times = _doubling(BETA_T_MAX)
        samples = (times, beta_path(d, 0j, times, cfg))
    lo, hi = probe, None
    for t, b in zip(*samples):
        if b < 1 - tol:
            hi = t
            break
        lo = t
    if hi is None:
        return None
    while hi - lo > resolution * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if f(mid) >= 1 - tol:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def classify(d: HerglotzDriver, tol: float = CLASSIFY_TOL, t_max: float = BETA_T_MAX,
             cfg: EvolutionConfig = DEFAULT_CONFIG) -> ChainClassification:
    times, betas, beta, ok, reason = _beta_samples(d, tol, t_max, cfg)
    thr = automorphism_threshold(d, tol, cfg, samples=(times, betas))
    diag = {"reason": reason, "samples": len(betas), "last_time": times[-1] if times else 0.0}
    if not ok:
        return ChainClassification(beta, "Unknown", math.inf, thr, False, diag)
    if beta <= tol:
        return ChainClassification(beta, "UniqueChain", math.inf, thr, True, diag)
    return ChainClassification(beta, "NonUnique", 1.0 / beta, thr, True, diag)


# --------------------------------------------------------------------------- standard chain


@dataclass(frozen=True)
class ChainValue:
    s: float
    z: complex
    f: complex
    horizon: float
    tail_estimate: float


def _neville_at_zero(xs, ys):
    """Value at x = 0 of the interpolating polynomial through (xs, ys) (arrays of complex ys)."""
    p = [np.asarray(y, dtype=complex) for y in ys]
    n = len(xs)
    for m in range(1, n):
        for i in range(n - m):
            x0, x1 = xs[i], xs[i + m]
            p[i] = (x1 * p[i] - x0 * p[i + 1]) / (x1 - x0)
    return p[0]


def _rational_at_zero(xs, ys):
    """Bulirsch-Stoer diagonal rational extrapolation to x = 0, elementwise over arrays.

    The raw horizon estimates behave like F / (1 + c*beta*F) near large |F|,
    which a polynomial in beta captures poorly and a rational function exactly.
    """
    xs = [float(x) for x in xs]
    prev = [np.asarray(y, dtype=complex) for y in ys]
    prev2 = [np.zeros_like(prev[0])] * len(xs)
    for k in range(1, len(xs)):
        cur = list(prev)
        for i in range(k, len(xs)):
            diff = prev[i] - prev[i - 1]
            back = prev[i] - prev2[i - 1]
            with np.errstate(all="ignore"):
                ratio = np.where(back != 0, diff / np.where(back != 0, back, 1), 0)
                den = (xs[i - k] / xs[i]) * (1 - ratio) - 1
                corr = np.where(den != 0, diff / np.where(den != 0, den, 1), 0)
            cur[i] = np.where(np.isfinite(corr), prev[i] + corr, prev[i])
        prev2, prev = prev, cur
    return prev[-1]


class StandardChain:
    """Evaluator (s, z) -> f_s(z) of the standard chain of a driver.

    ``tol`` is the Cauchy tolerance between successive horizon estimates,
    relative to max(1, |f|). ``t_max`` caps the horizon schedule.
    """

    def __init__(self, d: HerglotzDriver, tol: float = 1e-10, cfg: EvolutionConfig = DEFAULT_CONFIG,
                 t_max: float = T_MAX, cache: Optional[FrameCache] = None, use_tail_bound: bool = True):
        self.d = d
        self.tol = tol
        self.cfg = cfg
        self.t_max = t_max
        self.cache = cache if cache is not None else FrameCache(d, cfg)
        self.use_tail_bound = use_tail_bound and d.radial_normalized
        self._E_cache = {}
        self.last_horizon = None
        self.last_tail = None

    # -- tail bound for tau == 0 drivers
    def _log_E(self, t):
        """-int_0^t Re p(0, xi) dxi by adaptive quadrature split at breakpoints."""
        t = float(t)
        if t in self._E_cache:
            return self._E_cache[t]
        f = lambda x: float(np.real(self.d.herglotz_p(0j, x)))
        pts = [0.0] + list(self.d.breakpoints_in(0.0, t)) + [t]
        total = 0.0
        for lo, hi in zip(pts[:-1], pts[1:]):
            total += _quad.quad(f, lo, hi, limit=200, epsabs=1e-13, epsrel=1e-12)[0]
        self._E_cache[t] = -total
        return -total

    def tail_horizon(self, s, r):
        """Smallest doubling horizon T whose analytic tail bound meets tol, or None."""
        if r >= 1:
            return None
        T = max(2 * s, 1.0)
        logEs = self._log_E(s)
        growth = r / (1 - r) ** 2 * math.exp(-logEs)
        while T <= self.t_max:
            delta = 2.0 / (1 - r) ** 3 * math.exp(self._log_E(T) - logEs)
            if delta < 1:
                err = max(growth, 1.0) * math.e * delta
                if err <= self.tol:
                    return T, err
            T *= 2
        return None

    # -- integration of the (a, L, d) system
    def _march(self, s, zs, horizons):
        """Yield (T, a, L, u) at each horizon for the scaled offsets of zs."""
        a0, L0 = self.cache.state(s)
        n = zs.size
        y = np.concatenate([[a0, L0], (zs - a0) * cmath.exp(-L0)])
        cfg = self.cfg
        # The error in a only matters relative to the hyperbolic scale 1 - |a|^2,
        # so its tolerance is rescaled as the frame point drifts to the boundary.
        atol = np.concatenate([[cfg.abs_tol, cfg.rel_tol], np.full(n, cfg.abs_tol)])
        rtol = np.concatenate([[0.0], np.full(n + 1, cfg.rel_tol)])
        guard = _Guard(1, cfg)

        def check(t, y):
            w = y[0] + y[2:] * np.exp(y[1])
            guard(t, np.concatenate([[y[0]], w]))

        stepper = Stepper(atol, rtol, cfg.max_step, check=check)
        first = max(2 * s, 1.0)
        t = s
        for T in horizons:
            for lo, hi in segments(self.d, t, T, []):
                field_ = self.d.on_interval(lo, hi)

                def rhs(tt, y, field_=field_):
                    a, L = y[0], y[1]
                    v = cmath.exp(L)
                    dd = y[2:] * v
                    G = np.asarray(field_.vector_field(np.concatenate([[a], a + dd]), tt), dtype=complex)
                    dG0 = complex(np.asarray(field_.vector_field_dz(np.array([a]), tt)).ravel()[0])
                    return np.concatenate([[G[0], dG0], (G[1:] - G[0] - dd * dG0) / v])

                stepper.max_step = cfg.max_step if lo < first else max(cfg.max_step, LONG_HORIZON_STEP * lo)
                chunk = max(1.0, stepper.max_step)
                x = lo
                while x < hi:
                    x1 = hi if hi - x <= 1.5 * chunk else x + chunk
                    one_a = (1 - abs(y[0])) * (1 + abs(y[0]))
                    stepper.atol[0] = min(cfg.abs_tol, cfg.rel_tol * one_a)
                    y = stepper.advance(rhs, x, x1, y)
                    x = x1
            t = T
            yield T, y[0], y[1], y[2:].copy()

    @staticmethod
    def _estimate(a, L, u):
        v = cmath.exp(L)
        one_a = (1 - abs(a)) * (1 + abs(a))
        f = u / (1 - a.conjugate() * (u * v) / one_a)
        return f, abs(v) / one_a

    def values(self, s: float, zs):
        """f_s on an array of points; returns (f, horizon, tail_estimate)."""
        zs = np.atleast_1d(np.asarray(zs, dtype=complex)).ravel()
        s = float(s)
        _check_start(zs, self.cfg, 0.0, s)
        if zs.size == 0:
            return zs.copy(), 0.0, 0.0
        r = float(np.max(np.abs(zs)))
        if self.use_tail_bound:
            hit = self.tail_horizon(s, r)
            if hit is not None:
                T, err = hit
                (_, a, L, u), = self._march(s, zs, [T])
                f, _ = self._estimate(a, L, u)
                self.last_horizon, self.last_tail = T, err
                return f, T, err
        horizons = [max(2 * s, 1.0)]
        while horizons[-1] * 2 <= self.t_max:
            horizons.append(horizons[-1] * 2)
        raw, betas, ests = [], [], []
        poly, rat = [], []
        delta = math.inf
        try:
            for T, a, L, u in self._march(s, zs, horizons):
                f, beta = self._estimate(a, L, u)
                raw.append(f)
                betas.append(beta)
                k = len(betas)
                if k >= 3 and betas[-1] <= DECAY_RATIO * betas[-2] and betas[-2] <= DECAY_RATIO * betas[-3]:
                    m = min(NEVILLE_NODES, k)
                    poly.append(_neville_at_zero(betas[-m:], raw[-m:]))
                    rat.append(_rational_at_zero(betas[-m:], raw[-m:]))
                else:
                    poly.append(f)
                    rat.append(f)
                if len(poly) < 2:
                    ests.append(f)
                    continue
                # each point keeps whichever extrapolant has settled better
                dp = np.abs(poly[-1] - poly[-2]) / np.maximum(1.0, np.abs(poly[-1]))
                dr = np.abs(rat[-1] - rat[-2]) / np.maximum(1.0, np.abs(rat[-1]))
                est = np.where(dr <= dp, rat[-1], poly[-1])
                ests.append(est)
                delta = float(np.max(np.minimum(dp, dr)))
                if delta <= self.tol:
                    self.last_horizon, self.last_tail = T, delta
                    return est, T, delta
        except BoundaryEscape as exc:
            T_last = horizons[len(ests)] if len(ests) < len(horizons) else horizons[-1]
            raise NotConverged(T_last, delta, ests[-1] if ests else None) from exc
        raise NotConverged(horizons[-1], delta, ests[-1] if ests else None)

    def value(self, s: float, z) -> ChainValue:
        if abs(z) >= 1:
            raise ValueError("z must lie in the unit disk")
        f, T, tail = self.values(s, [z])
        return ChainValue(float(s), complex(z), complex(f[0]), T, tail)

    def __call__(self, s: float, z):
        if np.ndim(z) == 0:
            return complex(self.values(s, [z])[0][0])
        z = np.asarray(z, dtype=complex)
        return self.values(s, z.ravel())[0].reshape(z.shape)

    def derivative(self, s: float, z, h: float = 1e-3):
        """f_s'(z) by a fourth-order central difference (one batched evaluation)."""
        z = complex(z)
        f = self.values(s, [z - 2 * h, z - h, z + h, z + 2 * h])[0]
        return complex((f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * h))


def chain_value(d: HerglotzDriver, s: float, z, tol: float = 1e-10, cfg: EvolutionConfig = DEFAULT_CONFIG,
                t_max: float = T_MAX) -> ChainValue:
    return StandardChain(d, tol, cfg, t_max).value(s, z)


class FunctionChain:
    """Chain evaluator wrapping a closed-form f(s, z)."""

    def __init__(self, f: Callable, label: str = ""):
        self.f = f
        self.label = label

    def __call__(self, s, z):
        return self.f(s, z)

    def derivative(self, s, z, h=1e-3):
        z = complex(z)
        f = [self.f(s, z + k * h) for k in (-2, -1, 1, 2)]
        return (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * h)


# --------------------------------------------------------------------------- transport


class TransportedChain:
    """g_s(z) = h(beta f_s(z)) / beta for a class-S map h given as an expression in z."""

    def __init__(self, base, h, beta: float, spot_check: bool = True):
        if not 0 < beta <= 1:
            raise ValueError("beta must lie in (0, 1]")
        node = _expr.parse(h) if isinstance(h, str) else h
        if "t" in _expr.free_variables(node):
            raise ValueError("the transport map must not depend on t")
        self.base = base
        self.h_node = node
        self.h = _expr.compile_expr(node)
        self.beta = float(beta)
        if spot_check:
            self._spot_check()

    def _spot_check(self, n=64, r=1 - 1e-6, fd=1e-6):
        h = lambda w: complex(_expr.evaluate(self.h_node, w, 0.0))
        if abs(h(0j)) > 1e-12:
            raise ClassSpotCheckFailed(f"h(0) = {h(0j)} != 0")
        d1 = (h(fd) - h(-fd)) / (2 * fd)
        if abs(d1 - 1) > 1e-6:
            raise ClassSpotCheckFailed(f"h'(0) = {d1} != 1")
        ws = r * np.exp(2j * np.pi * (np.arange(n) + 0.5) / n)
        vals = np.array([h(w) for w in ws])
        gaps = np.where(np.eye(n, dtype=bool), np.inf, np.abs(vals[:, None] - vals[None, :]))
        if not np.min(gaps) > 0:
            raise ClassSpotCheckFailed("h is not injective on the boundary samples")

    def _apply(self, w):
        w = np.asarray(w, dtype=complex)
        if np.any(np.abs(w) >= 1):
            raise _expr.DomainError(_expr.to_source(self.h_node), complex(w.ravel()[np.argmax(np.abs(w))]), 0.0,
                                    "beta * f_s(z) leaves the unit disk, the domain of h")
        return self.h(w, 0.0) / self.beta

    def __call__(self, s, z):
        v = self._apply(self.beta * np.asarray(self.base(s, z)))
        return complex(v) if np.ndim(v) == 0 else v

    def derivative(self, s, z, h=1e-3):
        z = complex(z)
        f = [self(s, z + k * h) for k in (-2, -1, 1, 2)]
        return (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * h)


def transported_chain(base, h, beta: float) -> TransportedChain:
    return TransportedChain(base, h, beta)


# --------------------------------------------------------------------------- inversion


def induced_evolution(chain, s: float, t: float, z, tol: float = 1e-10, max_iter: int = 100,
                      fd_step: float = 1e-6) -> complex:
    """phi_{s,t}(z) = f_t^{-1}(f_s(z)) by damped Newton seeded at z."""
    if not 0 <= s <= t:
        raise ValueError("need 0 <= s <= t")
    z = complex(z)
    if s == t:
        return z
    target = complex(chain(s, z))
    h = fd_step

    def probe(w):
        """F(w) and the central-difference F'(w) from one batched chain call."""
        v = np.asarray(chain(t, np.array([w, w + h, w - h]))) - target
        return complex(v[0]), complex(v[1] - v[2]) / (2 * h)

    w = z
    Fw, dF = probe(w)
    iterates = [w]
    for _ in range(max_iter):
        if abs(Fw) <= tol * max(1.0, abs(target)):
            return w
        if dF == 0:
            raise NewtonStall(iterates, abs(Fw))
        step = Fw / dF
        lam = 1.0
        while True:
            w_new = w - lam * step
            if abs(w_new) + h < 1 - 1e-9:
                F_new, dF_new = probe(w_new)
                if abs(F_new) < abs(Fw):
                    break
            lam *= 0.5
            if lam < 1e-10:
                raise NewtonStall(iterates, abs(Fw))
        w, Fw, dF = w_new, F_new, dF_new
        iterates.append(w)
    if abs(Fw) <= tol * max(1.0, abs(target)):
        return w
    raise NewtonStall(iterates, abs(Fw))
