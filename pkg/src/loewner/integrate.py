"""Dormand-Prince 5(4) with PI step-size control for complex state vectors."""

from __future__ import annotations

import numpy as np

from .expr import ExprError

# Butcher tableau, Hairer/Norsett/Wanner DOPRI5
C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
B = A[6] + (0.0,)
# B - B_hat, the embedded 4th-order error weights
E = (
    71 / 57600,
    0.0,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 10.0
BETA = 0.04
ALPHA = 0.2 - 0.75 * BETA
H_MIN_REL = 1e-14


class IntegrationError(RuntimeError):
    pass


class StepUnderflow(IntegrationError):
    def __init__(self, t, h, cause=None):
        self.t = t
        self.h = h
        self.cause = cause
        msg = f"adaptive step underflow at t={t!r} (h={h:.3e})"
        if cause is not None:
            msg += f": {cause}"
        super().__init__(msg)


class Stepper:
    """Integrates ``y' = f(t, y)`` segment by segment, carrying the step size.

    ``atol`` and ``rtol`` are arrays (or scalars) broadcast against the state;
    the error norm is the max over components so every component meets its
    own tolerance. ``check`` is called on each accepted state and may raise.
    """

    def __init__(self, atol, rtol, max_step=np.inf, check=None):
        self.atol = np.asarray(atol, dtype=float)
        self.rtol = np.asarray(rtol, dtype=float)
        self.max_step = float(max_step)
        self.check = check
        self.h = None
        self.steps = 0
        self.rejected = 0

    def _norm(self, err, y0, y1):
        sc = self.atol + self.rtol * np.maximum(np.abs(y0), np.abs(y1))
        return float(np.max(np.abs(err) / sc))

    def _initial_step(self, f, t0, y0, f0, span):
        sc = self.atol + self.rtol * np.abs(y0)
        d0 = float(np.max(np.abs(y0) / sc))
        d1 = float(np.max(np.abs(f0) / sc))
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h0 = min(h0, span, self.max_step)
        y1 = y0 + h0 * f0
        f1 = f(t0 + h0, y1)
        d2 = float(np.max(np.abs(f1 - f0) / sc)) / h0
        dm = max(d1, d2)
        h1 = max(1e-6, h0 * 1e-3) if dm <= 1e-15 else (0.01 / dm) ** 0.2
        # a tiny state component can drive the heuristic below the underflow
        # floor; 1e-6 is its own fallback and error control shrinks it if needed
        return min(max(100 * h0, 1e-6), h1, span, self.max_step)

    def advance(self, f, t0, t1, y0):
        """Integrate from t0 to t1 (t1 > t0) and return y(t1)."""
        y = np.array(y0, dtype=complex)
        t = float(t0)
        t1 = float(t1)
        if t1 <= t:
            return y
        with np.errstate(all="ignore"):
            k1 = f(t, y)
            h_prop = self.h if self.h is not None else self._initial_step(f, t, y, k1, t1 - t)
            err_prev = 1e-4
            last_reject = False
            while t < t1:
                h_prop = min(h_prop, self.max_step)
                carry = h_prop
                tiny = H_MIN_REL * max(1.0, abs(t))
                if t1 - t <= tiny:
                    h_prop = t1 - t  # what remains is below resolution: one step covers it
                elif h_prop < tiny:
                    raise StepUnderflow(t, h_prop)
                final = t1 - (t + h_prop) < tiny
                h = t1 - t if final else h_prop
                cause = None
                try:
                    k = [k1]
                    for i in range(1, 7):
                        yi = y.copy()
                        for j, aij in enumerate(A[i]):
                            if aij:
                                yi += (h * aij) * k[j]
                        k.append(f(t + h if i == 6 else t + C[i] * h, yi))
                    y_new = yi
                    err = h * sum(e * kk for e, kk in zip(E, k) if e)
                    en = self._norm(err, y, y_new)
                    if not np.isfinite(en):
                        en = np.inf
                except (ExprError, ZeroDivisionError, FloatingPointError, OverflowError) as exc:
                    en = np.inf
                    cause = exc
                if en <= 1.0:
                    t_new = t1 if final else t + h
                    if self.check is not None:
                        self.check(t_new, y_new)
                    t = t_new
                    y = y_new
                    k1 = k[6]
                    self.steps += 1
                    fac = SAFETY * max(en, 1e-10) ** -ALPHA * err_prev**BETA
                    fac = min(FAC_MAX, max(FAC_MIN, fac))
                    if last_reject:
                        fac = min(fac, 1.0)
                    err_prev = max(en, 1e-4)
                    last_reject = False
                    h_prop = max(h * fac, carry if final else 0.0)
                else:
                    self.rejected += 1
                    if np.isinf(en):
                        h_prop = 0.25 * h
                    else:
                        h_prop = h * max(FAC_MIN, SAFETY * en**-0.2)
                    last_reject = True
                    if h_prop < H_MIN_REL * max(1.0, abs(t)):
                        raise StepUnderflow(t, h_prop, cause)
        self.h = min(h_prop, self.max_step)
        return y
