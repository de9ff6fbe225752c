"""One-parameter semigroups: Denjoy-Wolff type, hyperbolic step and Koenigs functions.

A semigroup is generated by autonomous Berkson-Porta data (tau, p). The
generator is evaluated in the same product form as the non-autonomous drivers,
G(z) = (z - tau)(conj(tau) z - 1) p(z).
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
import math
from typing import Optional

import numpy as np
from scipy import integrate as _quad

from . import expr as _expr
from .chain import NotConverged, StandardChain, classify
from .disk import hyperbolic_distance
from .drivers import BerksonPortaDriver
from .engine import BoundaryEscape, EvolutionConfig, evolve_point, iter_path
from .integrate import Stepper

SEMIGROUP_CONFIG = EvolutionConfig(max_step=1.0)
JW_RADII = (0.9, 0.99, 0.999)
ZERO_FLOOR = 1e-4
POSITIVE_FLOOR = 1e-2
STABLE_SPREAD = 0.05


class ExtrapolationUnstable(RuntimeError):
    def __init__(self, quotients):
        self.quotients = list(quotients)
        super().__init__(f"Julia-Wolff quotients disagree: {self.quotients}")


class CalibrationDegenerate(RuntimeError):
    pass


class SemigroupModel:
    """Autonomous Berkson-Porta data; ``p`` is an expression in z or a callable p(z)."""

    def __init__(self, tau=0j, p="1", label: str = ""):
        self.tau = complex(tau)
        if abs(self.tau) > 1 + 1e-12:
            raise ValueError("tau must lie in the closed unit disk")
        if isinstance(p, (int, float, complex)):
            p = _expr.constant_node(p)
        if isinstance(p, str):
            p = _expr.parse(p)
        if not _expr.is_node(p):
            fn = p
            self.p_expr = None
            self.driver = BerksonPortaDriver(lambda z, t: fn(z), tau=self.tau, autonomous=True, label=label)
        else:
            if "t" in _expr.free_variables(p):
                raise ValueError("a semigroup generator must not depend on t")
            self.p_expr = p
            self.driver = BerksonPortaDriver(p, tau=self.tau, label=label)
        self.label = label

    @classmethod
    def from_driver(cls, driver: BerksonPortaDriver, label: str = ""):
        m = cls.__new__(cls)
        m.tau = complex(driver.tau(0.0))
        m.p_expr = driver.p_expr
        m.driver = driver
        m.label = label
        return m

    def p(self, z):
        return self.driver.p(z, 0.0)

    def generator(self, z):
        return self.driver.vector_field(z, 0.0)

    def __repr__(self):
        src = _expr.to_source(self.p_expr) if self.p_expr is not None else "<callable>"
        return f"SemigroupModel(tau={self.tau}, p={src})"


def phi(model: SemigroupModel, z, t: float, cfg: EvolutionConfig = SEMIGROUP_CONFIG) -> complex:
    """phi_t(z); phi_0 is the identity."""
    return evolve_point(model.driver, z, 0.0, t, cfg).w


# --------------------------------------------------------------------------- Denjoy-Wolff


@dataclass
class DWClass:
    kind: str  # "Elliptic" | "Hyperbolic" | "Parabolic"
    dw_point: complex
    derivative_estimate: Optional[float] = None
    quotients: list = field(default_factory=list)

    def as_dict(self):
        return {
            "kind": self.kind,
            "dw_re": self.dw_point.real,
            "dw_im": self.dw_point.imag,
            "derivative_estimate": self.derivative_estimate,
            "quotients": list(self.quotients),
        }


def _richardson(hs, qs):
    """Value at h = 0 of the polynomial in h through (hs, qs)."""
    V = np.vander(np.asarray(hs, dtype=float), len(hs), increasing=True)
    return float(np.linalg.solve(V, np.asarray(qs, dtype=float))[0])


def angular_derivative(model: SemigroupModel, t: float = 1.0, radii=JW_RADII, cfg: EvolutionConfig = SEMIGROUP_CONFIG):
    """Julia-Wolff radial quotients (1 - |phi_t(r tau)|) / (1 - r) and their extrapolation to r = 1."""
    tau = model.tau / abs(model.tau)
    qs = []
    for r in radii:
        w = phi(model, r * tau, t, cfg)
        qs.append((1 - abs(w)) / (1 - r))
    return _richardson([1 - r for r in radii], qs), qs


def classify_dw(model: SemigroupModel, tol: float = 1e-3, cfg: EvolutionConfig = SEMIGROUP_CONFIG) -> DWClass:
    if not 0 < tol < 0.1:
        raise ValueError("tol must lie in (0, 0.1)")
    if abs(model.tau) < 1 - 1e-12:
        return DWClass("Elliptic", model.tau)
    est, qs = angular_derivative(model, 1.0, JW_RADII, cfg)
    if any(abs(a - b) > 0.1 for a, b in zip(qs, qs[1:])):
        raise ExtrapolationUnstable(qs)
    tau = model.tau / abs(model.tau)
    kind = "Parabolic" if est >= 1 - tol else "Hyperbolic"
    return DWClass(kind, tau, est, qs)


# --------------------------------------------------------------------------- hyperbolic step


@dataclass
class StepResult:
    verdict: str  # "ZeroStep" | "PositiveStep" | "Inconclusive"
    distances: np.ndarray
    n: int

    def __repr__(self):
        last = self.distances[-1] if len(self.distances) else float("nan")
        return f"StepResult({self.verdict}, n={self.n}, last={last:.3e})"


def _decide_step(dist):
    q = dist[-max(2, len(dist) // 4):]
    non_increasing = bool(np.all(np.diff(q) <= 1e-9 * q[:-1] + 1e-15))
    if dist[-1] < ZERO_FLOOR and non_increasing:
        return "ZeroStep"
    lo, hi = float(np.min(q)), float(np.max(q))
    if lo > POSITIVE_FLOOR and (hi - lo) <= STABLE_SPREAD * lo:
        return "PositiveStep"
    return "Inconclusive"


def hyperbolic_step(model: SemigroupModel, z0, t0: float = 1.0, n: int = 64, max_n: Optional[int] = 16384,
                    cfg: EvolutionConfig = SEMIGROUP_CONFIG) -> StepResult:
    """Zero or positive hyperbolic step of the orbit z_k = phi_{k t0}(z0).

    The orbit is first sampled for n iterates; while the verdict is
    Inconclusive the number of iterates is doubled up to ``max_n``. Pass
    ``max_n=n`` for a fixed budget.
    """
    if n < 8:
        raise ValueError("need n >= 8 iterates")
    if not t0 > 0:
        raise ValueError("t0 must be positive")
    max_n = n if max_n is None else max(n, max_n)
    orbit = [complex(z0)]
    k = n
    escaped = False
    while True:
        times = [j * t0 for j in range(len(orbit), k + 1)]
        try:
            for r in iter_path(model.driver, orbit[-1], (len(orbit) - 1) * t0, times, cfg):
                orbit.append(r.w)
        except BoundaryEscape:
            # the orbit is numerically on the circle; judge the iterates we have
            escaped = True
        z = np.asarray(orbit)
        dist = hyperbolic_distance(z[:-1], z[1:])
        if len(dist) < 8:
            return StepResult("Inconclusive", dist, len(dist))
        verdict = _decide_step(dist)
        if verdict != "Inconclusive" or k >= max_n or escaped:
            return StepResult(verdict, dist, len(dist))
        k = min(2 * k, max_n)


# --------------------------------------------------------------------------- Koenigs functions


def conjugate_to_origin(model: SemigroupModel):
    """Move an interior Denjoy-Wolff point to 0.

    Returns (model0, m) with m(z) = (z - tau) / (1 - conj(tau) z); the
    semigroup of model0 is m o phi_t o m^{-1}, generated by
    p0(w) = (1 - |tau|^2) p(m^{-1}(w)) with tau = 0.
    """
    tau = model.tau
    if not abs(tau) < 1:
        raise ValueError("only an interior Denjoy-Wolff point can be moved to 0")
    k = (1 - abs(tau)) * (1 + abs(tau))
    p = model.driver.p

    def p0(w, t=0.0):
        return k * p((w + tau) / (1 + tau.conjugate() * w), t)

    def m(z):
        return (z - tau) / (1 - tau.conjugate() * z)

    return SemigroupModel.from_driver(BerksonPortaDriver(p0, tau=0j, autonomous=True, label="conjugated")), m


class KoenigsElliptic:
    """h(z) = lim e^{c t} phi_t(z), evaluated on a doubling horizon schedule."""

    def __init__(self, model: SemigroupModel, tol: float = 1e-10, start: float = 1.0, t_max: float = 2.0**10,
                 cfg: EvolutionConfig = SEMIGROUP_CONFIG):
        if abs(model.tau) != 0:
            raise ValueError("conjugate the Denjoy-Wolff point to 0 first (see conjugate_to_origin)")
        self.model = model
        self.c = complex(np.asarray(model.p(0j)).ravel()[0]) if np.ndim(model.p(0j)) else complex(model.p(0j))
        if not self.c.real > 0:
            raise NotConverged(0.0, math.inf)
        self.tol = tol
        self.start = start
        self.t_max = t_max
        self.cfg = cfg

    def __call__(self, z):
        scalar = np.ndim(z) == 0
        zs = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
        out = np.zeros_like(zs)
        nz = zs != 0
        if np.any(nz):
            out[nz] = self._limit(zs[nz])
        return complex(out[0]) if scalar else out.reshape(np.shape(z))

    def _limit(self, zs):
        # q = e^{ct} phi_t(z) obeys dq/dt = q (c - p(q e^{-ct})), whose right-hand
        # side dies out as t grows, so tolerances act on the converging quantity
        horizons = [self.start]
        while horizons[-1] * 2 <= self.t_max:
            horizons.append(horizons[-1] * 2)
        c, p = self.c, self.model.driver.p

        def rhs(t, q):
            return q * (c - p(q * cmath.exp(-c * t), t))

        stepper = Stepper(self.cfg.abs_tol, self.cfg.rel_tol, self.cfg.max_step)
        q, t = zs.copy(), 0.0
        prev, delta = None, math.inf
        for T in horizons:
            stepper.max_step = self.cfg.max_step if t < self.start else max(self.cfg.max_step, t / 8)
            q = stepper.advance(rhs, t, T, q)
            t = T
            if prev is not None:
                delta = float(np.max(np.abs(q - prev) / np.maximum(1.0, np.abs(q))))
                if delta <= self.tol:
                    return q
            prev = q
        raise NotConverged(horizons[-1], delta, prev)

    def derivative(self, z, h=1e-3):
        z = complex(z)
        f = self(np.array([z - 2 * h, z - h, z + h, z + 2 * h]))
        return complex((f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * h))


def koenigs_elliptic(model: SemigroupModel, tol: float = 1e-10, cfg: EvolutionConfig = SEMIGROUP_CONFIG):
    """(c, h) with c = p(0) and h o phi_t = e^{-c t} h, h(0) = 0, h'(0) = 1."""
    h = KoenigsElliptic(model, tol, cfg=cfg)
    return h.c, h


class KoenigsBoundary:
    """h with h o phi_t = h + t for a boundary Denjoy-Wolff point.

    When the standard chain is unique, h = mu f_0 with mu fixed by the unit
    time-1 increment at 0. Otherwise (the family is an automorphism group or
    has beta > 0, so f_0 carries no Koenigs information) h is the primitive
    of 1/G normalized by h(0) = 0, which solves the same equation.
    """

    def __init__(self, model: SemigroupModel, tol: float = 1e-10, cfg: EvolutionConfig = SEMIGROUP_CONFIG,
                 method: Optional[str] = None, probe: complex = 0j):
        if abs(abs(model.tau) - 1) > 1e-12:
            raise ValueError("koenigs_boundary needs |tau| = 1")
        self.model = model
        self.tol = tol
        self.cfg = cfg
        self.probe = complex(probe)
        if method is None:
            method = "chain" if classify(model.driver, cfg=cfg).verdict == "UniqueChain" else "primitive"
        self.method = method
        if method == "chain":
            self.chain = StandardChain(model.driver, tol=tol, cfg=cfg)
            p1 = phi(model, self.probe, 1.0, cfg)
            f = self.chain.values(0.0, [self.probe, p1])[0]
            inc = complex(f[1] - f[0])
            if abs(inc) < 1e-12:
                raise CalibrationDegenerate(f"time-1 increment of f_0 at {self.probe} is {abs(inc):.3e}")
            self.mu = 1 / inc
            self.offset = complex(f[0])
        elif method == "primitive":
            self.mu = 1.0
            self.offset = 0j
        else:
            raise ValueError(f"unknown method {method!r}")

    def _primitive(self, zs):
        G = self.model.generator

        def integrand(s):
            v = zs / G(s * zs)
            return np.concatenate([v.real, v.imag])

        val = _quad.quad_vec(integrand, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=400)[0]
        n = zs.size
        return val[:n] + 1j * val[n:]

    def __call__(self, z):
        scalar = np.ndim(z) == 0
        zs = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
        if self.method == "chain":
            out = self.mu * (self.chain.values(0.0, zs)[0] - self.offset)
        else:
            out = self._primitive(zs)
        return complex(out[0]) if scalar else out.reshape(np.shape(z))

    def residual(self, times=(0.5, 1.0, 2.0), radii=(0.0, 0.3, 0.6), angles=8):
        """max |h(phi_t(z)) - h(z) - t| over a polar grid."""
        zs = [0j] + [r * cmath.exp(2j * math.pi * k / angles) for r in radii if r > 0 for k in range(angles)]
        zs = np.asarray(zs)
        hz = self(zs)
        worst = 0.0
        for t in times:
            w = np.array([phi(self.model, z, t, self.cfg) for z in zs])
            worst = max(worst, float(np.max(np.abs(self(w) - hz - t))))
        return worst


def koenigs_boundary(model: SemigroupModel, tol: float = 1e-10, cfg: EvolutionConfig = SEMIGROUP_CONFIG,
                     method: Optional[str] = None) -> KoenigsBoundary:
    return KoenigsBoundary(model, tol, cfg, method)


def oracle_models() -> dict:
    """Closed-form semigroups used throughout the tests."""
    return {
        "elliptic": SemigroupModel(0j, "1", "elliptic"),
        "elliptic_nonlinear": SemigroupModel(0j, "1+z", "elliptic 1+z"),
        "parabolic": SemigroupModel(1.0, "1", "parabolic LFT"),
        "parabolic_automorphism": SemigroupModel(1.0, "i", "parabolic automorphism"),
        "hyperbolic": SemigroupModel(1.0, "(1+z)/(2*(1-z))", "hyperbolic dilation"),
    }
