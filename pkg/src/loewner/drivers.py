"""Herglotz vector fields: Berkson-Porta data (p, tau), raw fields and built-in drivers.

Every driver evaluates ``G(z, t)`` and ``dG/dz(z, t)`` for scalar or array ``z``.
The Berkson-Porta form is ``G(z, t) = (z - tau(t)) (conj(tau(t)) z - 1) p(z, t)``.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence
import warnings

import numpy as np

from . import expr as _expr
from .disk import cayley_derivative, cayley_to_halfplane

RE_P_TOL = 1e-9
TAU_TOL = 1e-12
FD_STEP = 1e-6
FD_DISAGREE = 1e-5


def _fd_dz(f, z, t, h):
    """Fourth-order central difference in z."""
    return (-f(z + 2 * h, t) + 8 * f(z + h, t) - 8 * f(z - h, t) + f(z - 2 * h, t)) / (12 * h)


class PiecewiseLinear:
    """t -> value, linear between knots and constant outside them."""

    def __init__(self, times: Sequence[float], values: Sequence):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values)
        if times.ndim != 1 or len(times) == 0 or times.shape != values.shape:
            raise ValueError("sample times and values must be equal-length non-empty 1-d sequences")
        if np.any(np.diff(times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        self.times = times
        self.values = values
        self._complex = np.iscomplexobj(values)

    @property
    def knots(self) -> tuple:
        return tuple(float(x) for x in self.times)

    def __call__(self, t: float):
        ts, vs = self.times, self.values
        if t <= ts[0]:
            v = vs[0]
        elif t >= ts[-1]:
            v = vs[-1]
        else:
            k = bisect_right(ts, t) - 1
            lam = (t - ts[k]) / (ts[k + 1] - ts[k])
            v = vs[k] + lam * (vs[k + 1] - vs[k])
        return complex(v) if self._complex else float(v)


def _time_function(value, name: str, real: bool = True) -> tuple[Callable, tuple]:
    """Normalize a constant, callable, expression or PiecewiseLinear into (fn, knots)."""
    if isinstance(value, PiecewiseLinear):
        return value, value.knots
    if isinstance(value, str):
        value = _expr.parse(value)
    if _expr.is_node(value):
        if "z" in _expr.free_variables(value):
            raise ValueError(f"{name} may depend on t only")
        node = value

        def fn(t):
            v = _expr.evaluate(node, 0.0, t)
            if real:
                if abs(v.imag) > 1e-12 * max(1.0, abs(v.real)):
                    raise ValueError(f"{name}({t}) = {v} is not real")
                return v.real
            return v

        return fn, ()
    if callable(value):
        return value, ()
    c = complex(value)
    if real:
        if c.imag != 0:
            raise ValueError(f"{name} must be real")
        c = c.real
    return (lambda t: c), ()


class HerglotzDriver:
    """Base class. Subclasses implement ``vector_field``."""

    breakpoints: tuple = ()
    tau_hint: Optional[Callable] = None

    def vector_field(self, z, t: float):
        raise NotImplementedError

    def vector_field_dz(self, z, t: float):
        return _fd_dz(self.vector_field, z, t, FD_STEP)

    def on_interval(self, lo: float, hi: float) -> "HerglotzDriver":
        """The driver as seen from inside the open interval (lo, hi)."""
        return self

    def breakpoints_in(self, lo: float, hi: float) -> list:
        return [b for b in self.breakpoints if lo < b < hi]

    def herglotz_p(self, z, t):
        """p(z, t) recovered from G when tau is known; None otherwise."""
        if self.tau_hint is None:
            return None
        tau = self.tau_hint(t)
        return self.vector_field(z, t) / ((z - tau) * (np.conj(tau) * z - 1))

    @property
    def autonomous(self) -> bool:
        return False

    @property
    def radial_normalized(self) -> bool:
        """True when tau == 0 identically (so phi_{s,t}(0) = 0)."""
        return False


class BerksonPortaDriver(HerglotzDriver):
    def __init__(self, p, tau=0j, dp=None, breakpoints=(), autonomous=False, label=""):
        if isinstance(p, str):
            p = _expr.parse(p)
        if _expr.is_node(p):
            self.p_expr = p
            if dp is None:
                dp = _expr.compile_expr(_expr.differentiate_z(p))
            p = _expr.compile_expr(p)
            if "t" not in _expr.free_variables(self.p_expr):
                autonomous = True
        else:
            self.p_expr = None
        self.p = p
        self.dp = dp
        self.tau, knots = _time_function(tau, "tau", real=False)
        self._tau_constant = isinstance(tau, (int, float, complex, np.number))
        self.breakpoints = tuple(sorted(set(knots) | set(float(b) for b in breakpoints)))
        self.tau_hint = self.tau
        self._autonomous = autonomous and self._tau_constant
        self.label = label

    @property
    def autonomous(self):
        return self._autonomous

    @property
    def radial_normalized(self):
        return self._tau_constant and self.tau(0.0) == 0

    def herglotz_p(self, z, t):
        return self.p(z, t)

    def vector_field(self, z, t):
        tau = self.tau(t)
        return (z - tau) * (tau.conjugate() * z - 1) * self.p(z, t)

    def vector_field_dz(self, z, t):
        if self.dp is None:
            return _fd_dz(self.vector_field, z, t, FD_STEP)
        tau = self.tau(t)
        tc = tau.conjugate()
        return (2 * tc * z - 1 - abs(tau) ** 2) * self.p(z, t) + (z - tau) * (tc * z - 1) * self.dp(z, t)

    def __repr__(self):
        return f"BerksonPortaDriver({self.label or self.p_expr!r})"


class RawDriver(HerglotzDriver):
    def __init__(self, G, dG=None, breakpoints=(), tau_hint=None, autonomous=False, label=""):
        if isinstance(G, str):
            G = _expr.parse(G)
        if _expr.is_node(G):
            node = G
            if dG is None:
                dG = _expr.compile_expr(_expr.differentiate_z(node))
            G = _expr.compile_expr(node)
            autonomous = autonomous or "t" not in _expr.free_variables(node)
        self.G = G
        self.dG = dG
        self.breakpoints = tuple(sorted(float(b) for b in breakpoints))
        self.tau_hint = tau_hint
        self._autonomous = autonomous
        self.label = label

    @property
    def autonomous(self):
        return self._autonomous

    def vector_field(self, z, t):
        return self.G(z, t)

    def vector_field_dz(self, z, t):
        if self.dG is None:
            return _fd_dz(self.G, z, t, FD_STEP)
        return self.dG(z, t)

    def __repr__(self):
        return f"RawDriver({self.label})"


class PiecewiseDriver(HerglotzDriver):
    """Concatenation in time: ``pieces[k] = (start_k, driver_k)``, right-continuous.

    ``breakpoints`` defaults to the piece boundaries plus the sub-drivers' own
    breakpoints; passing an explicit sequence overrides (and may mis-declare) them.
    """

    def __init__(self, pieces, breakpoints=None, label=""):
        pieces = sorted(((float(s), d) for s, d in pieces), key=lambda x: x[0])
        if not pieces or pieces[0][0] != 0.0:
            raise ValueError("the first piece must start at t = 0")
        self.starts = [s for s, _ in pieces]
        self.drivers = [d for _, d in pieces]
        if breakpoints is None:
            bps = set(self.starts[1:])
            ends = self.starts[1:] + [np.inf]
            for s, e, d in zip(self.starts, ends, self.drivers):
                bps.update(b for b in d.breakpoints if s < b < e)
            breakpoints = bps
        self.breakpoints = tuple(sorted(float(b) for b in breakpoints))
        self.label = label

    def _piece(self, t):
        return self.drivers[max(bisect_right(self.starts, t) - 1, 0)]

    def on_interval(self, lo, hi):
        # a single piece only when no piece boundary falls inside (lo, hi);
        # otherwise (breakpoints mis-declared) fall back to lookup by time
        if any(lo < s < hi for s in self.starts[1:]):
            return self
        return self._piece(0.5 * (lo + hi)).on_interval(lo, hi)

    def vector_field(self, z, t):
        return self._piece(t).vector_field(z, t)

    def vector_field_dz(self, z, t):
        return self._piece(t).vector_field_dz(z, t)

    def herglotz_p(self, z, t):
        return self._piece(t).herglotz_p(z, t)

    @property
    def radial_normalized(self):
        return all(d.radial_normalized for d in self.drivers)

    def __repr__(self):
        return f"PiecewiseDriver({self.label})"


# --------------------------------------------------------------------------- catalog


def constant(c=1.0, tau=0j) -> BerksonPortaDriver:
    """p == c, tau == tau0."""
    c = complex(c)
    tau = complex(tau)

    def p(z, t):
        return c if np.ndim(z) == 0 else np.full(np.shape(z), c)

    def dp(z, t):
        return 0j if np.ndim(z) == 0 else np.zeros(np.shape(z), dtype=complex)

    return BerksonPortaDriver(p, tau=tau, dp=dp, autonomous=True, label=f"constant(c={c}, tau={tau})")


def radial(theta=0.0) -> BerksonPortaDriver:
    """Radial slit driver: tau == 0, p = (k + z) / (k - z), k = exp(i theta(t))."""
    theta_fn, knots = _time_function(theta, "theta", real=True)
    constant_theta = not knots and isinstance(theta, (int, float))

    def kappa(t):
        return complex(np.exp(1j * theta_fn(t)))

    def p(z, t):
        k = kappa(t)
        return (k + z) / (k - z)

    def dp(z, t):
        k = kappa(t)
        return 2 * k / (k - z) ** 2

    return BerksonPortaDriver(p, tau=0j, dp=dp, breakpoints=knots, autonomous=constant_theta, label="radial")


def chordal(xi=0.0) -> RawDriver:
    """Chordal driver dw/dt = 2 / (xi(t) - w) pulled back to the disk by the Cayley map."""
    xi_fn, knots = _time_function(xi, "xi", real=True)

    def G(z, t):
        return 2.0 / (xi_fn(t) - cayley_to_halfplane(z)) / cayley_derivative(z)

    def dG(z, t):
        u = xi_fn(t) - cayley_to_halfplane(z)
        return (-2 * (1 - z) * u + 2j) / (1j * u * u)

    return RawDriver(G, dG, breakpoints=knots, tau_hint=lambda t: 1 + 0j,
                     autonomous=not knots and isinstance(xi, (int, float)), label="chordal")


def sampled_path(times, values, kind="radial") -> HerglotzDriver:
    path = PiecewiseLinear(times, values)
    if kind == "radial":
        return radial(path)
    if kind == "chordal":
        return chordal(path)
    raise ValueError(f"unknown sampled path kind {kind!r}")


def bp(p, tau=0j, **kwargs) -> BerksonPortaDriver:
    return BerksonPortaDriver(p, tau=tau, **kwargs)


def oracle_catalog() -> dict:
    """The six drivers with closed-form evolution families."""
    return {
        "elliptic": constant(1.0, 0j),
        "rotation": constant(1j, 0j),
        "parabolic": constant(1.0, 1.0),
        "dilation": BerksonPortaDriver("(1+z)/(2*(1-z))", tau=1.0, label="dilation"),
        "radial": radial(0.0),
        "chordal": chordal(0.0),
    }


# --------------------------------------------------------------------------- validation


@dataclass
class ValidationReport:
    min_re_p: Optional[float]
    max_abs_tau: Optional[float]
    max_abs_G: dict
    passed: bool
    failures: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def as_dict(self):
        return {
            "pass": self.passed,
            "min_re_p": self.min_re_p,
            "max_abs_tau": self.max_abs_tau,
            "max_abs_G": {repr(float(r)): v for r, v in self.max_abs_G.items()},
            "failures": list(self.failures),
            "warnings": list(self.warnings),
        }


def validate(d: HerglotzDriver, radii=(0.25, 0.5, 0.75, 0.95), angles=32, times=(0.0, 0.5, 1.0, 2.0)) -> ValidationReport:
    """Check Re p >= 0, |tau| <= 1 and record max |G| per radius on a polar grid."""
    if np.ndim(angles) == 0:
        angles = np.linspace(0, 2 * np.pi, int(angles), endpoint=False)
    angles = np.asarray(angles, dtype=float)
    failures, notes = [], []
    min_re_p = None
    max_tau = None
    max_G = {}
    for r in radii:
        zs = r * np.exp(1j * angles)
        gmax = 0.0
        for t in times:
            try:
                G = np.asarray(d.vector_field(zs, t))
                p = d.herglotz_p(zs, t)
            except _expr.DomainError as exc:
                failures.append(f"evaluation failed: {exc}")
                continue
            if not np.all(np.isfinite(G)):
                failures.append(f"non-finite G at r={r}, t={t}")
                continue
            gmax = max(gmax, float(np.max(np.abs(G))))
            if p is not None:
                m = float(np.min(np.real(p)))
                min_re_p = m if min_re_p is None else min(min_re_p, m)
            if d.tau_hint is not None:
                a = abs(complex(d.tau_hint(t)))
                max_tau = a if max_tau is None else max(max_tau, a)
            h = FD_STEP
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                d1 = _fd_dz(d.vector_field, zs, t, h)
                d2 = _fd_dz(d.vector_field, zs, t, 2 * h)
            scale = np.maximum(np.abs(d1), 1.0)
            if np.max(np.abs(d1 - d2) / scale) > FD_DISAGREE:
                notes.append(f"finite-difference dG/dz unstable at r={r}, t={t}")
        max_G[float(r)] = gmax
    if min_re_p is not None and min_re_p < -RE_P_TOL:
        failures.append(f"Herglotz condition violated: min Re p = {min_re_p:.3e} < 0")
    if max_tau is not None and max_tau > 1 + TAU_TOL:
        failures.append(f"tau leaves the closed disk: max |tau| = {max_tau:.6g}")
    return ValidationReport(min_re_p, max_tau, max_G, not failures, failures, notes)
