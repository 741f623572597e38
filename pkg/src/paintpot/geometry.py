"""Angle conventions shared by the simulator, calibration, and filters.

Wheel angles live on the wrapped chart (-pi, pi]; tilt angles on the closed
interval [-pi/2, pi/2].  The wheel track has one gap span per wiper inside
which that wiper's voltage is meaningless, and each wiper's characterization
is continued past its gap by a full turn so angle stays a single-valued
function of voltage (the "shifted state").
"""

from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = math.tau


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi] with lo < hi."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise ValueError(f"empty interval: [{self.lo}, {self.hi}]")

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    @property
    def width(self) -> float:
        return self.hi - self.lo


# Angular spans where a wheel wiper rides the track gap and reports garbage.
GAP_WIPER0 = Interval(2.0 * math.pi / 3.0, 5.0 * math.pi / 6.0)
GAP_WIPER1 = Interval(-5.0 * math.pi / 6.0, -2.0 * math.pi / 3.0)

# Past these edges a wiper reads the far end of its track, so its reported
# state continues 2*pi away (downward for wiper 0, upward for wiper 1).
SHIFT_EDGE_WIPER0 = GAP_WIPER0.hi
SHIFT_EDGE_WIPER1 = GAP_WIPER1.lo

TILT_LIMIT = math.pi / 2.0


def wrap_angle(theta: float) -> float:
    """Reduce ``theta`` modulo 2*pi into (-pi, pi]."""
    wrapped = math.remainder(theta, TWO_PI)
    return math.pi if wrapped == -math.pi else wrapped


def wrapped_difference(a: float, b: float) -> float:
    """Signed angular difference a - b, wrapped into (-pi, pi]."""
    return wrap_angle(a - b)


def shift_state_for_wiper(theta: float, wiper: int, edge: float | None = None) -> float:
    """Shifted state wiper ``wiper`` reports for a wheel at ``theta``.

    ``edge`` overrides the standard shift boundary (the gap edge nearest the
    seam); simulators with non-standard gap geometry pass their own.
    """
    if wiper == 0:
        e = SHIFT_EDGE_WIPER0 if edge is None else edge
        return theta - TWO_PI if theta > e else theta
    if wiper == 1:
        e = SHIFT_EDGE_WIPER1 if edge is None else edge
        return theta + TWO_PI if theta < e else theta
    raise ValueError(f"wiper index must be 0 or 1, got {wiper}")
