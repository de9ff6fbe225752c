"""Evolution families phi_{s,t}(z) by integrating dw/dt = G(w, t).

The spatial derivative phi'_{s,t}(z) comes from the variational equation,
integrated jointly with w in logarithmic form: L = log phi', dL/dt = dG/dz(w, t).
This keeps relative accuracy of phi' when it decays like e^{-t} or 1/t^2.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
import cmath
from typing import Optional, Sequence

import numpy as np

from .drivers import HerglotzDriver
from .integrate import IntegrationError, Stepper, StepUnderflow

__all__ = [
    "BoundaryEscape",
    "EvolutionConfig",
    "EvolutionResult",
    "StepUnderflow",
    "evolve_point",
    "evolve_with_derivative",
    "evolve_grid",
    "evolve_path",
    "iter_path",
    "trajectory",
    "evolve_array",
    "segments",
    "Stepper",
]


class BoundaryEscape(IntegrationError):
    def __init__(self, t, w, guard):
        self.t = t
        self.w = w
        self.guard = guard
        super().__init__(f"trajectory reached |w| = {abs(w):.15g} >= 1 - {guard:g} at t={t!r}")


@dataclass(frozen=True)
class EvolutionConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 0.1
    boundary_guard: float = 1e-9

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "boundary_guard"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.boundary_guard < 1e-3:
            raise ValueError("boundary_guard must be < 1e-3")

    def with_(self, **kw) -> "EvolutionConfig":
        return replace(self, **kw)


DEFAULT_CONFIG = EvolutionConfig()


@dataclass
class EvolutionResult:
    w: complex
    v: Optional[complex] = None
    steps: int = 0
    max_abs_w: float = 0.0
    t: Optional[float] = None


def segments(d: HerglotzDriver, s: float, t: float, stops: Sequence[float] = ()) -> list:
    """Split [s, t] at driver breakpoints and requested stop times."""
    cuts = {s, t}
    cuts.update(d.breakpoints_in(s, t))
    cuts.update(x for x in stops if s < x < t)
    pts = sorted(cuts)
    return list(zip(pts[:-1], pts[1:]))


def _check_start(z, cfg: EvolutionConfig, s, t):
    if not 0 <= s <= t:
        raise ValueError(f"need 0 <= s <= t, got s={s}, t={t}")
    if np.any(np.abs(z) >= 1 - cfg.boundary_guard):
        raise ValueError(f"start point(s) must satisfy |z| < 1 - {cfg.boundary_guard:g}")


class _Guard:
    def __init__(self, n_points, cfg):
        self.n = n_points
        self.limit = 1 - cfg.boundary_guard
        self.max_abs = 0.0

    def __call__(self, t, y):
        a = np.abs(y[: self.n])
        m = float(np.max(a))
        self.max_abs = max(self.max_abs, m)
        if m >= self.limit:
            k = int(np.argmax(a))
            raise BoundaryEscape(t, complex(y[k]), 1 - self.limit)


def _iter_run(d, zs, s, times, cfg, derivative):
    """Integrate a batch of points from s, yielding (t, state, stepper, guard) at each time."""
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    n = zs.size
    wanted = sorted(set(float(x) for x in times))
    t_end = wanted[-1] if wanted else s
    _check_start(zs, cfg, s, t_end)
    if derivative:
        y = np.concatenate([zs, np.zeros(n, dtype=complex)])
        atol = np.concatenate([np.full(n, cfg.abs_tol), np.full(n, cfg.rel_tol)])
    else:
        y = zs.copy()
        atol = np.full(n, cfg.abs_tol)
    guard = _Guard(n, cfg)
    guard.max_abs = float(np.max(np.abs(zs)))
    stepper = Stepper(atol, cfg.rel_tol, cfg.max_step, check=guard)
    if wanted and wanted[0] == s:
        yield s, y.copy(), stepper, guard
    pending = [x for x in wanted if x > s]
    for lo, hi in segments(d, s, t_end, wanted):
        field = d.on_interval(lo, hi)
        if derivative:
            def rhs(t, y, field=field):
                w = y[:n]
                return np.concatenate([field.vector_field(w, t), field.vector_field_dz(w, t)])
        else:
            def rhs(t, y, field=field):
                return np.asarray(field.vector_field(y, t), dtype=complex)
        y = stepper.advance(rhs, lo, hi, y)
        if pending and hi == pending[0]:
            pending.pop(0)
            yield hi, y.copy(), stepper, guard


def _run(d, zs, s, times, cfg, derivative):
    """Integrate a batch of points from s through every time in ``times``."""
    out = {}
    stepper = guard = None
    for t, y, stepper, guard in _iter_run(d, zs, s, times, cfg, derivative):
        out[t] = y
    return [out[float(x)] for x in times], stepper, guard


def iter_path(d: HerglotzDriver, z, s: float, times: Sequence[float], cfg: EvolutionConfig = DEFAULT_CONFIG,
              derivative: bool = False):
    """Lazily yield EvolutionResult for phi_{s,t}(z), t running through sorted ``times``."""
    for t, y, stepper, guard in _iter_run(d, [z], s, times, cfg, derivative):
        r = _result(y, 1, 0, derivative, stepper, guard, t)
        if derivative and t == s:
            r.v = 1 + 0j
        yield r


def _result(y, n, k, derivative, stepper, guard, t):
    w = complex(y[k])
    v = complex(cmath.exp(y[n + k])) if derivative else None
    return EvolutionResult(w, v, stepper.steps, guard.max_abs, t)


def evolve_point(d: HerglotzDriver, z, s: float, t: float, cfg: EvolutionConfig = DEFAULT_CONFIG) -> EvolutionResult:
    """phi_{s,t}(z); returns z exactly when s == t."""
    if s == t:
        _check_start(np.asarray([z]), cfg, s, t)
        return EvolutionResult(complex(z), None, 0, abs(z), t)
    (y,), stepper, guard = _run(d, [z], s, [t], cfg, False)
    return _result(y, 1, 0, False, stepper, guard, t)


def evolve_with_derivative(d: HerglotzDriver, z, s: float, t: float, cfg: EvolutionConfig = DEFAULT_CONFIG) -> EvolutionResult:
    """phi_{s,t}(z) together with phi'_{s,t}(z) from the variational equation."""
    if s == t:
        _check_start(np.asarray([z]), cfg, s, t)
        return EvolutionResult(complex(z), 1 + 0j, 0, abs(z), t)
    (y,), stepper, guard = _run(d, [z], s, [t], cfg, True)
    return _result(y, 1, 0, True, stepper, guard, t)


def evolve_path(d: HerglotzDriver, z, s: float, times: Sequence[float], cfg: EvolutionConfig = DEFAULT_CONFIG,
                derivative: bool = False) -> list:
    """phi_{s,t}(z) for every t in ``times`` (each >= s) from one integration."""
    by_time = {r.t: r for r in iter_path(d, z, s, times, cfg, derivative)}
    return [by_time[float(t)] for t in times]


def evolve_grid(d: HerglotzDriver, points, s: float, t: float, cfg: EvolutionConfig = DEFAULT_CONFIG,
                derivative: bool = False) -> list:
    """Element-wise phi_{s,t} over ``points``.

    The batch shares one step-size sequence (controlled by the worst point, so
    independent of ordering). If the batch fails, points are redone one by one
    and failures are returned in place as the exception instance.
    """
    pts = np.asarray(points, dtype=complex).ravel()
    if pts.size == 0:
        return []
    if s == t:
        return [EvolutionResult(complex(z), 1 + 0j if derivative else None, 0, abs(z), t) for z in pts]
    try:
        (y,), stepper, guard = _run(d, pts, s, [t], cfg, derivative)
    except (IntegrationError, ValueError, ArithmeticError):
        single = evolve_with_derivative if derivative else evolve_point
        out = []
        for z in pts:
            try:
                out.append(single(d, z, s, t, cfg))
            except (IntegrationError, ValueError, ArithmeticError) as exc:
                out.append(exc)
        return out
    n = pts.size
    return [_result(y, n, k, derivative, stepper, guard, t) for k in range(n)]


def evolve_array(d: HerglotzDriver, points, s: float, t: float, cfg: EvolutionConfig = DEFAULT_CONFIG):
    """phi_{s,t} on an array of points, returned as an array of the same shape (raises on failure)."""
    pts = np.asarray(points, dtype=complex)
    if s == t or pts.size == 0:
        return pts.copy()
    (y,), _, _ = _run(d, pts.ravel(), s, [t], cfg, False)
    return y.reshape(pts.shape)


def trajectory(d: HerglotzDriver, z, s: float, t: float, n: int, cfg: EvolutionConfig = DEFAULT_CONFIG) -> list:
    """n uniform samples (time, phi_{s,time}(z)) on [s, t]; the first is (s, z)."""
    if n < 2:
        raise ValueError("need n >= 2 samples")
    times = [s + k * (t - s) / (n - 1) for k in range(n)]
    times[-1] = t
    if t == s:
        _check_start(np.asarray([z]), cfg, s, t)
        return [(s, complex(z))] * n
    res = evolve_path(d, z, s, times, cfg)
    return [(tk, r.w) for tk, r in zip(times, res)]
