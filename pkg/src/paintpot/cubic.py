"""Monotone cubic models mapping ADC counts to angles.

A sensor characterization is a cubic polynomial ``theta = p(V)`` declared
monotone on a voltage window.  Inversion is plain bisection: with a monotone
bracket it converges unconditionally, which matters more here than speed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from paintpot.errors import FitError, InversionError

_MONOTONE_GRID_POINTS = 1024
DEFAULT_ANGLE_TOL = 1e-9
_COEFFICIENT_FORMAT = ".17e"


@dataclass(frozen=True)
class CubicModel:
    """``theta = c3*V**3 + c2*V**2 + c1*V + c0`` on the window ``v_window``.

    Construction validates monotonicity by checking the derivative sign on a
    1024-point grid over the window; evaluation outside the window is legal
    arithmetic but only the window is trusted sensor behavior.
    """

    c3: float
    c2: float
    c1: float
    c0: float
    v_window: tuple[float, float]

    def __post_init__(self) -> None:
        lo, hi = float(self.v_window[0]), float(self.v_window[1])
        if not lo < hi:
            raise FitError(f"voltage window must satisfy lo < hi, got ({lo}, {hi})")
        object.__setattr__(self, "v_window", (lo, hi))
        grid = np.linspace(lo, hi, _MONOTONE_GRID_POINTS)
        slope = self.derivative(grid)
        if not (np.all(slope > 0.0) or np.all(slope < 0.0)):
            raise FitError("cubic is not monotone on its voltage window")

    def evaluate(self, v):
        return ((self.c3 * v + self.c2) * v + self.c1) * v + self.c0

    __call__ = evaluate

    def derivative(self, v):
        return (3.0 * self.c3 * v + 2.0 * self.c2) * v + self.c1

    @property
    def increasing(self) -> bool:
        return float(self.derivative(self.v_window[0])) > 0.0

    def angle_range(self) -> tuple[float, float]:
        """Angles reachable on the window, ordered (low, high)."""
        a = float(self.evaluate(self.v_window[0]))
        b = float(self.evaluate(self.v_window[1]))
        return (a, b) if a <= b else (b, a)

    def to_dict(self) -> dict:
        # Coefficients as decimal strings: 17 significant digits round-trip
        # float64 exactly and survive any JSON reader.
        return {
            "c3": format(self.c3, _COEFFICIENT_FORMAT),
            "c2": format(self.c2, _COEFFICIENT_FORMAT),
            "c1": format(self.c1, _COEFFICIENT_FORMAT),
            "c0": format(self.c0, _COEFFICIENT_FORMAT),
            "v_window": [self.v_window[0], self.v_window[1]],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CubicModel":
        window = data["v_window"]
        return cls(
            float(data["c3"]),
            float(data["c2"]),
            float(data["c1"]),
            float(data["c0"]),
            (float(window[0]), float(window[1])),
        )


def invert_cubic(
    model: CubicModel,
    theta_target: float,
    tol: float = DEFAULT_ANGLE_TOL,
    max_iter: int = 200,
) -> float:
    """Voltage V on the model's window with ``model(V) = theta_target``.

    Bisection over the monotone window; the result satisfies
    ``|model(V) - theta_target| < tol`` (tolerance in angle).

    Raises:
        InversionError: the target lies outside the model's range on its
            window, or the tolerance could not be met.
    """
    lo, hi = model.v_window
    f_lo = float(model.evaluate(lo)) - theta_target
    f_hi = float(model.evaluate(hi)) - theta_target
    if abs(f_lo) < tol:
        return lo
    if abs(f_hi) < tol:
        return hi
    if (f_lo > 0.0) == (f_hi > 0.0):
        low, high = model.angle_range()
        raise InversionError(
            f"target angle {theta_target!r} outside model range [{low!r}, {high!r}]"
        )
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        f_mid = float(model.evaluate(mid)) - theta_target
        if abs(f_mid) < tol:
            return mid
        if (f_mid > 0.0) == (f_hi > 0.0):
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid
    best = lo if abs(f_lo) <= abs(f_hi) else hi
    if abs(float(model.evaluate(best)) - theta_target) < tol:
        return best
    raise InversionError(
        f"bisection stalled before reaching |residual| < {tol!r} "
        f"for target {theta_target!r}"
    )
