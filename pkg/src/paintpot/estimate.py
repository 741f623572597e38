"""Scalar Kalman filters over converted angle measurements.

Raw counts are pushed through the fitted cubics into angle-space
"features", which makes the observation model linear: each available
feature measures the per-wiper shifted state directly, so no linearization
of the cubic is ever needed.  Wheel filters fuse up to two features per
step and keep their mean on the wrapped chart (-pi, pi]; tilt filters have
one always-on feature and no wrap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from paintpot.characterize import ModelBundle, ValidRange, WiperFitStats
from paintpot.cubic import CubicModel
from paintpot.errors import InitializationError, SpecError
from paintpot.geometry import shift_state_for_wiper, wrap_angle
from paintpot.sensor_sim import AdcReading

DEFAULT_SIGMA0 = 1e-4
DEFAULT_PROCESS_NOISE = 0.05
DEFAULT_TRANSMISSION_RATIO = 1.0
DEFAULT_TIMESTEP = 0.01


@dataclass(frozen=True)
class TransitionModel:
    """Random walk with velocity input: x' = x + (k*dt)*u + dt*n, n~N(0,q)."""

    k: float
    dt: float
    q: float

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise SpecError("dt must be positive")
        if self.q < 0.0:
            raise SpecError("q must be >= 0")

    @property
    def g(self) -> float:
        """Input gain: joint radians per commanded motor rad/s over one step."""
        return self.k * self.dt

    @property
    def u_gain(self) -> float:
        """Noise gain: one step integrates the rate noise over dt."""
        return self.dt


@dataclass(frozen=True)
class GaussianBelief:
    """Scalar Gaussian over a joint angle: mean (rad) and variance (rad^2)."""

    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if not self.sigma > 0.0:
            raise SpecError(f"belief variance must be positive, got {self.sigma!r}")


@dataclass(frozen=True)
class WheelObservationModel:
    """Per-wiper converted-measurement models with their count windows."""

    m0: CubicModel
    m1: CubicModel
    r0: float
    r1: float
    ranges: tuple[ValidRange, ValidRange]

    def __post_init__(self) -> None:
        if self.r0 <= 0.0 or self.r1 <= 0.0:
            raise SpecError("measurement variances must be positive")

    def model(self, wiper: int) -> CubicModel:
        return self.m0 if wiper == 0 else self.m1

    def variance(self, wiper: int) -> float:
        return self.r0 if wiper == 0 else self.r1


@dataclass(frozen=True)
class TiltObservationModel:
    m: CubicModel
    r: float

    def __post_init__(self) -> None:
        if self.r <= 0.0:
            raise SpecError("measurement variance must be positive")


@dataclass(frozen=True)
class Feature:
    """An available converted measurement from wiper ``index``."""

    index: int
    z: float
    r: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.z):
            raise SpecError("feature measurement must be finite")


def predict(belief: GaussianBelief, u: float, tm: TransitionModel) -> GaussianBelief:
    """Prediction step: mean moves by g*u, variance grows by u_gain**2 * q."""
    return GaussianBelief(belief.mu + tm.g * u, belief.sigma + tm.u_gain * tm.u_gain * tm.q)


def predicted_feature_measurement(mu_bar: float, index: int) -> float:
    """Predicted converted measurement: the mean on wiper ``index``'s chart."""
    return shift_state_for_wiper(mu_bar, index)


def extract_features(
    readings: Sequence[AdcReading], obs: WheelObservationModel
) -> list[Feature]:
    """Converted measurements from the readings that are usable this step.

    A reading contributes iff it is flagged available and its count lies
    strictly inside that wiper's valid range.  An empty list is legal; the
    update then degenerates to the prediction.
    """
    features: list[Feature] = []
    for reading in readings:
        wiper = reading.wiper_index
        if wiper not in (0, 1):
            raise SpecError(f"wiper index must be 0 or 1, got {wiper}")
        if reading.available and obs.ranges[wiper].admits(reading.count):
            z = float(obs.model(wiper).evaluate(reading.count))
            features.append(Feature(wiper, z, obs.variance(wiper)))
    return features


def wrap_wheel_belief(belief: GaussianBelief) -> GaussianBelief:
    """Wrap the mean into (-pi, pi]; variance is chart-independent."""
    return GaussianBelief(wrap_angle(belief.mu), belief.sigma)


def update_wheel(
    belief_bar: GaussianBelief,
    features: Sequence[Feature],
    predicted: Sequence[float],
) -> GaussianBelief:
    """Measurement update for a wheel joint, wrapped into (-pi, pi].

    ``predicted`` aligns with ``features`` and holds each feature's
    predicted measurement (the predicted mean pushed through that wiper's
    shift).  Innovations are plain differences: both values live on the
    same shifted chart, which is the whole point of the shift machinery.
    """
    if len(features) != len(predicted):
        raise SpecError("features and predicted measurements must align")
    mu, sigma = belief_bar.mu, belief_bar.sigma
    if len(features) == 0:
        return wrap_wheel_belief(belief_bar)
    if len(features) == 1:
        feat = features[0]
        gain = sigma / (sigma + feat.r)
        mu = mu + gain * (feat.z - predicted[0])
        sigma = sigma - gain * sigma
    elif len(features) == 2:
        f0, f1 = features
        # Row gain of the 2x2 innovation solve with C = [1, 1]^T and
        # R = diag(r0, r1), reduced to scalars.
        det = sigma * f0.r + sigma * f1.r + f0.r * f1.r
        k0 = sigma * f1.r / det
        k1 = sigma * f0.r / det
        mu = mu + k0 * (f0.z - predicted[0]) + k1 * (f1.z - predicted[1])
        sigma = sigma - (k0 + k1) * sigma
    else:
        raise SpecError("a wheel update takes at most two features")
    return wrap_wheel_belief(GaussianBelief(mu, sigma))


def update_tilt(
    belief_bar: GaussianBelief, reading: AdcReading, obs: TiltObservationModel
) -> tuple[GaussianBelief, bool]:
    """Scalar update for the tilt joint.

    Counts outside the model's trusted window are rejected (cubic
    extrapolation beyond calibration data is unbounded); the prediction is
    then returned unchanged with ``accepted=False``.
    """
    lo, hi = obs.m.v_window
    if not reading.available or not lo <= reading.count <= hi:
        return belief_bar, False
    z = float(obs.m.evaluate(reading.count))
    gain = belief_bar.sigma / (belief_bar.sigma + obs.r)
    mu = belief_bar.mu + gain * (z - belief_bar.mu)
    sigma = belief_bar.sigma - gain * belief_bar.sigma
    return GaussianBelief(mu, sigma), True


def init_wheel(
    readings: Sequence[AdcReading],
    obs: WheelObservationModel,
    sigma0: float = DEFAULT_SIGMA0,
) -> GaussianBelief:
    """Seed a wheel belief from the first usable wiper.

    Wiper 0 is preferred; its converted value is brought back onto
    (-pi, pi] by adding a turn if it landed below -pi.  Otherwise wiper 1
    is used, subtracting a turn if above pi.
    """
    by_index = {reading.wiper_index: reading for reading in readings}
    if set(by_index) != {0, 1}:
        raise SpecError("wheel initialization needs one reading per wiper")
    r0, r1 = by_index[0], by_index[1]
    if r0.available and obs.ranges[0].admits(r0.count):
        mu = float(obs.m0.evaluate(r0.count))
        if mu < -math.pi:
            mu += 2.0 * math.pi
    elif r1.available and obs.ranges[1].admits(r1.count):
        mu = float(obs.m1.evaluate(r1.count))
        if mu > math.pi:
            mu -= 2.0 * math.pi
    else:
        raise InitializationError(
            "neither wiper reading is inside its valid range; "
            "the sensor is miscalibrated or the counts are garbage"
        )
    return GaussianBelief(mu, sigma0)


def init_tilt(
    reading: AdcReading, obs: TiltObservationModel, sigma0: float = DEFAULT_SIGMA0
) -> GaussianBelief:
    """Seed a tilt belief by evaluating the model at the first count."""
    lo, hi = obs.m.v_window
    if not reading.available or not lo <= reading.count <= hi:
        raise InitializationError(
            f"tilt count {reading.count} outside the model window [{lo}, {hi}]"
        )
    return GaussianBelief(float(obs.m.evaluate(reading.count)), sigma0)


class WheelStep(NamedTuple):
    belief: GaussianBelief
    used: tuple[bool, bool]


class TiltStep(NamedTuple):
    belief: GaussianBelief
    used: bool


@dataclass
class WheelEstimator:
    """Stateful convenience wrapper: predict, extract, gate, update, wrap.

    The gate drops any feature whose innovation exceeds ``gate_sigmas``
    predicted standard deviations.  Right at a chart edge the true state
    and a lagging predicted mean can sit on opposite shift branches, which
    hands the linear update a full-turn-corrupted innovation; such a
    feature is unusable for one step and the filter rides the other wiper.
    """

    obs: WheelObservationModel
    tm: TransitionModel
    sigma0: float = DEFAULT_SIGMA0
    gate_sigmas: float = 6.0
    belief: GaussianBelief | None = None

    def initialize(self, readings: Sequence[AdcReading]) -> GaussianBelief:
        self.belief = init_wheel(readings, self.obs, self.sigma0)
        return self.belief

    def step(self, u: float, readings: Sequence[AdcReading]) -> WheelStep:
        if self.belief is None:
            raise InitializationError("call initialize() before step()")
        belief_bar = predict(self.belief, u, self.tm)
        kept: list[Feature] = []
        z_bars: list[float] = []
        for feat in extract_features(readings, self.obs):
            z_bar = predicted_feature_measurement(belief_bar.mu, feat.index)
            bound = self.gate_sigmas * math.sqrt(belief_bar.sigma + feat.r)
            if abs(feat.z - z_bar) <= bound:
                kept.append(feat)
                z_bars.append(z_bar)
        self.belief = update_wheel(belief_bar, kept, z_bars)
        used = (
            any(f.index == 0 for f in kept),
            any(f.index == 1 for f in kept),
        )
        return WheelStep(self.belief, used)


@dataclass
class TiltEstimator:
    obs: TiltObservationModel
    tm: TransitionModel
    sigma0: float = DEFAULT_SIGMA0
    belief: GaussianBelief | None = None

    def initialize(self, reading: AdcReading) -> GaussianBelief:
        self.belief = init_tilt(reading, self.obs, self.sigma0)
        return self.belief

    def step(self, u: float, reading: AdcReading) -> TiltStep:
        if self.belief is None:
            raise InitializationError("call initialize() before step()")
        belief_bar = predict(self.belief, u, self.tm)
        self.belief, used = update_tilt(belief_bar, reading, self.obs)
        return TiltStep(self.belief, used)


def default_measurement_variance(model: CubicModel, stats: WiperFitStats) -> float:
    """Residual-derived R, floored at the one-count angle equivalent squared."""
    lo, hi = model.v_window
    mean_slope = abs(float(model.evaluate(hi)) - float(model.evaluate(lo))) / (hi - lo)
    return max(stats.rms * stats.rms, mean_slope * mean_slope)


def transition_from_bundle(bundle: ModelBundle) -> TransitionModel:
    params = bundle.filter_params
    return TransitionModel(
        k=float(params.get("k", DEFAULT_TRANSMISSION_RATIO)),
        dt=float(params.get("dt", DEFAULT_TIMESTEP)),
        q=float(params.get("q", DEFAULT_PROCESS_NOISE)),
    )


def wheel_observation_from_bundle(bundle: ModelBundle) -> WheelObservationModel:
    if bundle.sensor_kind != "wheel" or len(bundle.models) != 2 or len(bundle.valid_ranges) != 2:
        raise SpecError("bundle does not describe a wheel sensor")
    params = bundle.filter_params
    if "r0" in params or "r1" in params:
        try:
            r0, r1 = float(params["r0"]), float(params["r1"])
        except KeyError as exc:
            raise SpecError("wheel bundles need both r0 and r1") from exc
    else:
        if len(bundle.report.wipers) != 2:
            raise SpecError("bundle carries neither r0/r1 nor a fit report")
        r0, r1 = (
            default_measurement_variance(bundle.models[i], bundle.report.wipers[i])
            for i in (0, 1)
        )
    return WheelObservationModel(
        m0=bundle.models[0],
        m1=bundle.models[1],
        r0=r0,
        r1=r1,
        ranges=(bundle.valid_ranges[0], bundle.valid_ranges[1]),
    )


def tilt_observation_from_bundle(bundle: ModelBundle) -> TiltObservationModel:
    if bundle.sensor_kind != "tilt" or len(bundle.models) != 1:
        raise SpecError("bundle does not describe a tilt sensor")
    r = bundle.filter_params.get("r")
    if r is None:
        if len(bundle.report.wipers) != 1:
            raise SpecError("bundle carries neither an r value nor a fit report")
        r = default_measurement_variance(bundle.models[0], bundle.report.wipers[0])
    return TiltObservationModel(m=bundle.models[0], r=float(r))
