"""Quintic rest-to-rest references and the closed-loop experiment harness.

The harness commands a joint along a quintic profile with a feedforward
velocity plus proportional position controller, drives the simulated plant
and sensor, and runs the matching estimator, logging truth, estimate,
reference, command, and feature availability at every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO

import numpy as np

from paintpot.errors import SpecError
from paintpot.estimate import (
    TiltEstimator,
    TiltObservationModel,
    TransitionModel,
    WheelEstimator,
    WheelObservationModel,
    extract_features,
)
from paintpot.geometry import wrap_angle, wrapped_difference
from paintpot.sensor_sim import (
    TiltSensorSpec,
    WheelSensorSpec,
    read_tilt,
    read_wheel,
    simulate_plant_step,
)


@dataclass(frozen=True)
class QuinticTrajectory:
    """Fifth-order profile from rest at ``x0`` to rest at ``xf``."""

    a0: float
    a1: float
    a2: float
    a3: float
    a4: float
    a5: float
    t_total: float
    x0: float
    xf: float

    def position(self, t: float) -> float:
        return ((((self.a5 * t + self.a4) * t + self.a3) * t + self.a2) * t + self.a1) * t + self.a0

    def velocity(self, t: float) -> float:
        return (((5.0 * self.a5 * t + 4.0 * self.a4) * t + 3.0 * self.a3) * t + 2.0 * self.a2) * t + self.a1

    def acceleration(self, t: float) -> float:
        return ((20.0 * self.a5 * t + 12.0 * self.a4) * t + 6.0 * self.a3) * t + 2.0 * self.a2


def plan_quintic(x0: float, xf: float, t_total: float) -> QuinticTrajectory:
    """The unique quintic with zero velocity and acceleration at both ends."""
    if t_total <= 0.0:
        raise SpecError("t_total must be positive")
    delta = xf - x0
    t3 = t_total**3
    return QuinticTrajectory(
        a0=x0,
        a1=0.0,
        a2=0.0,
        a3=10.0 * delta / t3,
        a4=-15.0 * delta / (t3 * t_total),
        a5=6.0 * delta / (t3 * t_total * t_total),
        t_total=t_total,
        x0=x0,
        xf=xf,
    )


def sample(traj: QuinticTrajectory, t: float) -> tuple[float, float]:
    """(position, velocity) at ``t``, clamped to the profile endpoints."""
    if t <= 0.0:
        return traj.x0, 0.0
    if t >= traj.t_total:
        return traj.xf, 0.0
    return traj.position(t), traj.velocity(t)


@dataclass(frozen=True)
class ControllerGains:
    kp: float
    omega_max: float = 10.0

    def __post_init__(self) -> None:
        if self.kp < 0.0 or self.omega_max <= 0.0:
            raise SpecError("kp must be >= 0 and omega_max > 0")


def control_step(
    est_mu: float,
    ref_pos: float,
    ref_vel: float,
    gains: ControllerGains,
    tm: TransitionModel,
    kind: str = "wheel",
) -> float:
    """Motor speed command: feedforward velocity plus P position correction.

    Wheel position error is the wrapped difference so a seam crossing never
    produces a full-turn correction; tilt error is the plain difference.
    """
    if tm.k == 0.0:
        raise SpecError("transmission ratio must be nonzero to command the motor")
    if kind == "wheel":
        err = wrapped_difference(ref_pos, est_mu)
    elif kind == "tilt":
        err = ref_pos - est_mu
    else:
        raise SpecError(f"unknown joint kind {kind!r}")
    omega = (ref_vel + gains.kp * err) / tm.k
    return min(max(omega, -gains.omega_max), gains.omega_max)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one closed-loop run needs; deterministic given ``seed``."""

    kind: str
    sensor: WheelSensorSpec | TiltSensorSpec
    obs: WheelObservationModel | TiltObservationModel
    tm: TransitionModel
    traj: QuinticTrajectory
    gains: ControllerGains
    rate_hz: float
    seed: int
    plant_q: float | None = None
    sigma0: float = 1e-4


@dataclass(frozen=True)
class ExperimentResult:
    """Closed-loop trace plus its error summary.

    ``avg_abs_error``/``max_abs_error`` compare estimate against reference
    over the commanded window; wheel errors are wrapped differences so a
    seam crossing is not counted as a full turn.
    """

    kind: str
    t: np.ndarray
    theta_true: np.ndarray
    theta_est: np.ndarray
    theta_ref: np.ndarray
    u_cmd: np.ndarray
    f0_avail: np.ndarray
    f1_avail: np.ndarray
    avg_abs_error: float
    max_abs_error: float
    seed: int

    def __len__(self) -> int:
        return len(self.t)

    def estimate_step_jumps(self) -> np.ndarray:
        """|change in estimate| between consecutive steps (wrapped for wheels)."""
        if self.kind == "wheel":
            return np.abs(
                [wrapped_difference(a, b) for a, b in zip(self.theta_est[1:], self.theta_est[:-1])]
            )
        return np.abs(np.diff(self.theta_est))

    def write_trace(self, handle: IO[str], comment: str | None = None) -> None:
        if comment is not None:
            handle.write(f"# {comment}\n")
        handle.write("t,theta_true,theta_est,theta_ref,u_cmd,f0_avail,f1_avail\n")
        for i in range(len(self.t)):
            handle.write(
                f"{self.t[i]:.17g},{self.theta_true[i]:.17g},{self.theta_est[i]:.17g},"
                f"{self.theta_ref[i]:.17g},{self.u_cmd[i]:.17g},"
                f"{int(self.f0_avail[i])},{int(self.f1_avail[i])}\n"
            )

    def summary_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "n_steps": int(len(self.t)),
            "avg_abs_error": self.avg_abs_error,
            "max_abs_error": self.max_abs_error,
        }


def _angle_error(kind: str, est: float, ref: float) -> float:
    if kind == "wheel":
        return abs(wrapped_difference(est, ref))
    return abs(est - ref)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run one closed-loop trajectory-tracking experiment.

    Per step: sample the reference, command the motor, advance the plant,
    read the sensor, predict, then update with whatever features are
    available.  Deterministic for a fixed seed.
    """
    kind = config.kind
    if kind == "wheel":
        if not isinstance(config.sensor, WheelSensorSpec) or not isinstance(
            config.obs, WheelObservationModel
        ):
            raise SpecError("wheel experiment requires wheel sensor spec and observation model")
    elif kind == "tilt":
        if not isinstance(config.sensor, TiltSensorSpec) or not isinstance(
            config.obs, TiltObservationModel
        ):
            raise SpecError("tilt experiment requires tilt sensor spec and observation model")
    else:
        raise SpecError(f"unknown joint kind {kind!r}")
    if config.rate_hz <= 0.0:
        raise SpecError("rate_hz must be positive")
    dt = 1.0 / config.rate_hz
    if abs(config.tm.dt - dt) > 1e-9 * dt:
        raise SpecError("transition model dt must equal the loop period 1/rate_hz")
    plant_q = config.tm.q if config.plant_q is None else config.plant_q

    rng = np.random.default_rng(config.seed)
    n_steps = int(round(config.traj.t_total * config.rate_hz))
    if n_steps < 1:
        raise SpecError("trajectory shorter than one loop period")

    theta = wrap_angle(config.traj.x0) if kind == "wheel" else config.traj.x0
    if kind == "tilt" and abs(theta) > config.sensor.angle_limit:
        raise SpecError("tilt trajectory starts outside the mechanical range")

    if kind == "wheel":
        estimator = WheelEstimator(config.obs, config.tm, config.sigma0)
        readings = read_wheel(theta, config.sensor, rng)
        estimator.initialize(readings)
        feats = extract_features(readings, config.obs)
        used = (any(f.index == 0 for f in feats), any(f.index == 1 for f in feats))
    else:
        estimator = TiltEstimator(config.obs, config.tm, config.sigma0)
        reading = read_tilt(theta, config.sensor, rng)
        estimator.initialize(reading)
        lo, hi = config.obs.m.v_window
        used = (lo <= reading.count <= hi, False)

    size = n_steps + 1
    t_log = np.zeros(size)
    true_log = np.zeros(size)
    est_log = np.zeros(size)
    ref_log = np.zeros(size)
    u_log = np.zeros(size)
    f0_log = np.zeros(size, dtype=bool)
    f1_log = np.zeros(size, dtype=bool)

    ref0, _ = sample(config.traj, 0.0)
    t_log[0], true_log[0], est_log[0] = 0.0, theta, estimator.belief.mu
    ref_log[0], u_log[0] = ref0, 0.0
    f0_log[0], f1_log[0] = used

    for step in range(1, size):
        t = step * dt
        ref_pos, ref_vel = sample(config.traj, t)
        u = control_step(estimator.belief.mu, ref_pos, ref_vel, config.gains, config.tm, kind)
        theta, _ = simulate_plant_step(
            theta,
            u,
            config.tm.k,
            dt,
            plant_q,
            rng,
            kind=kind,
            angle_limit=getattr(config.sensor, "angle_limit", math.pi / 2.0),
        )
        if kind == "wheel":
            readings = read_wheel(theta, config.sensor, rng)
            belief, used = estimator.step(u, readings)
        else:
            reading = read_tilt(theta, config.sensor, rng)
            belief, accepted = estimator.step(u, reading)
            used = (accepted, False)
        t_log[step], true_log[step], est_log[step] = t, theta, belief.mu
        ref_log[step], u_log[step] = ref_pos, u
        f0_log[step], f1_log[step] = used

    errors = np.array(
        [_angle_error(kind, est_log[i], ref_log[i]) for i in range(size)]
    )
    return ExperimentResult(
        kind=kind,
        t=t_log,
        theta_true=true_log,
        theta_est=est_log,
        theta_ref=ref_log,
        u_cmd=u_log,
        f0_avail=f0_log,
        f1_avail=f1_log,
        avg_abs_error=float(errors.mean()),
        max_abs_error=float(errors.max()),
        seed=config.seed,
    )
