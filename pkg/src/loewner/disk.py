"""Unit-disk geometry: automorphisms, hyperbolic metrics and the Cayley map."""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

BOUNDARY_EPS = 1e-12


@dataclass(frozen=True)
class DiskPoint:
    value: complex

    def __post_init__(self):
        v = complex(self.value)
        if not abs(v) < 1.0 - BOUNDARY_EPS:
            raise ValueError(f"{v} is not inside the unit disk (|z| must be < 1 - {BOUNDARY_EPS})")
        object.__setattr__(self, "value", v)

    def __complex__(self):
        return self.value


@dataclass(frozen=True)
class DiskAutomorphism:
    """The Moebius map z -> (b z + a) / (1 + b conj(a) z), |a| < 1, |b| = 1.

    ``b`` is normalized onto the unit circle at construction.
    """

    a: complex = 0j
    b: complex = 1 + 0j

    def __post_init__(self):
        a = complex(self.a)
        b = complex(self.b)
        if not abs(a) < 1.0:
            raise ValueError(f"automorphism centre a={a} must satisfy |a| < 1")
        if b == 0:
            raise ValueError("rotation factor b must be non-zero")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b / abs(b))

    def __call__(self, z):
        return apply(self, z)

    def inverse(self, z):
        return inverse_apply(self, z)

    def derivative(self, z):
        a, b = self.a, self.b
        return b * (1 - abs(a) ** 2) / (1 + b * a.conjugate() * z) ** 2


def apply(h: DiskAutomorphism, z):
    a, b = h.a, h.b
    return (b * z + a) / (1 + b * a.conjugate() * z)


def inverse_apply(h: DiskAutomorphism, z):
    a, b = h.a, h.b
    return b.conjugate() * (z - a) / (1 - a.conjugate() * z)


def pseudo_hyperbolic(z, w):
    """|z - w| / |1 - conj(w) z|, the Schwarz-Pick invariant distance."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    d = np.abs(z - w) / np.abs(1 - np.conj(w) * z)
    return float(d) if d.ndim == 0 else d


def hyperbolic_distance(z, w):
    """log((1 + r) / (1 - r)) with r the pseudo-hyperbolic distance.

    No factor 1/2: a disk of radius R about 0 has Euclidean radius
    (e^R - 1) / (e^R + 1).
    """
    r = np.asarray(pseudo_hyperbolic(z, w))
    d = np.log1p(r) - np.log1p(-r)
    return float(d) if d.ndim == 0 else d


def hyperbolic_radius_to_euclidean(R: float) -> float:
    return math.tanh(R / 2.0)


def cayley_to_halfplane(z):
    """i (1 + z) / (1 - z): disk onto the upper half-plane, 0 -> i, 1 -> infinity."""
    return 1j * (1 + z) / (1 - z)


def cayley_from_halfplane(w):
    w_arr = np.asarray(w, dtype=complex)
    if np.any(w_arr.imag <= 0):
        raise ValueError("Cayley inverse requires Im w > 0")
    return (w - 1j) / (w + 1j)


def cayley_derivative(z):
    return 2j / (1 - z) ** 2


def conjugating_automorphism(tau: complex) -> DiskAutomorphism:
    """Automorphism m with m(tau) = 0, as a DiskAutomorphism h with h = m^{-1}.

    h(0) = tau, so h.inverse sends tau to the origin.
    """
    return DiskAutomorphism(a=tau, b=1.0)
