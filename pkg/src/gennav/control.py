"""Two-level actuation control with battery-droop compensation.

The high level nudges the commanded twist by the observed tracking error;
the low level converts the twist to per-actuator speed setpoints (the only
plant-specific unit in the stack), runs one PID per actuator in normalized
speed units, and corrects the resulting PWM duty for supply droop with

    k' = k * (2 V - V') / V

which cancels the droop to first order in (V - V') / V. Measured actuator
speeds are always reconstructed from the scan-odometry twist, never read
from the plant, so the feedback path stays sensor-only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BatterySenseFaultError, NonHolonomicCommandError
from .geometry import Twist2D
from .sim import DIFFDRIVE, PlantConfig


def inverse_kinematics(plant: PlantConfig, twist: Twist2D) -> np.ndarray:
    """Per-actuator speed setpoints for a body twist.

    Differential drive returns wheel angular speeds (rad/s) as
    [left, right]; the planar quad returns the 4 mixed actuator speeds.
    """
    if plant.kind == DIFFDRIVE:
        if abs(twist.vy) > 1e-9:
            raise NonHolonomicCommandError("differential drive cannot produce vy")
        half = plant.track_width / 2.0
        return np.array([
            (twist.vx - twist.omega * half) / plant.wheel_radius,
            (twist.vx + twist.omega * half) / plant.wheel_radius,
        ])
    return plant.mixing_matrix @ twist.as_array()


def forward_kinematics(plant: PlantConfig, speeds: np.ndarray) -> Twist2D:
    """Body twist produced by per-actuator speeds (pseudo-inverse for quads)."""
    speeds = np.asarray(speeds, dtype=float)
    if plant.kind == DIFFDRIVE:
        left, right = speeds
        v = plant.wheel_radius * (left + right) / 2.0
        omega = plant.wheel_radius * (right - left) / plant.track_width
        return Twist2D(v, 0.0, omega)
    vx, vy, omega = np.linalg.pinv(plant.mixing_matrix) @ speeds
    return Twist2D(vx, vy, omega)


def actuator_speed_scale(plant: PlantConfig, v_nominal: float) -> float:
    """Full-duty actuator speed at nominal voltage; normalizes PID units."""
    scale = plant.gamma * v_nominal
    if plant.kind == DIFFDRIVE:
        scale /= plant.wheel_radius
    return scale


def clamp_twist(twist: Twist2D, plant: PlantConfig) -> Twist2D:
    return Twist2D(
        max(-plant.v_max, min(plant.v_max, twist.vx)),
        max(-plant.v_max, min(plant.v_max, twist.vy)),
        max(-plant.omega_max, min(plant.omega_max, twist.omega)),
    )


@dataclass
class HighLevelState:
    """Reference-vs-observed twist correction gains and dropout bookkeeping."""

    gain: float = 0.5
    dropout_count: int = 0


def high_level_step(state: HighLevelState, v_r: Twist2D, v_o: Twist2D,
                    plant: PlantConfig) -> Twist2D:
    """Commanded twist = reference + gain * (reference - observed), clamped.

    A non-finite observation counts as an odometry dropout: the reference
    passes through unmodified.
    """
    if not v_o.is_finite():
        state.dropout_count += 1
        return clamp_twist(v_r, plant)
    k = state.gain
    cmd = Twist2D(
        v_r.vx + k * (v_r.vx - v_o.vx),
        v_r.vy + k * (v_r.vy - v_o.vy),
        v_r.omega + k * (v_r.omega - v_o.omega),
    )
    return clamp_twist(cmd, plant)


class PidController:
    """One PID loop with clamped integral (anti-windup) and clamped output."""

    def __init__(self, kp: float = 0.5, ki: float = 1.5, kd: float = 0.0,
                 output_limit: float = 1.0, windup_limit: float = 1.0):
        self.kp = kp
        self.ki = ki
        self.kd = kd
        self.output_limit = output_limit
        # Bound on |ki * integral|, i.e. the integral term's output share.
        self.windup_limit = windup_limit
        self.integral = 0.0
        self.prev_error: float | None = None

    def reset(self) -> None:
        self.integral = 0.0
        self.prev_error = None

    def step(self, setpoint: float, measured: float, dt: float) -> float:
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        error = setpoint - measured
        self.integral += error * dt
        if self.ki > 0.0:
            bound = self.windup_limit / self.ki
            self.integral = max(-bound, min(bound, self.integral))
        derivative = 0.0 if self.prev_error is None else (error - self.prev_error) / dt
        self.prev_error = error
        out = self.kp * error + self.ki * self.integral + self.kd * derivative
        return max(-self.output_limit, min(self.output_limit, out))


@dataclass
class BatteryCompensator:
    """First-order PWM correction for supply droop below nominal voltage."""

    v_nominal: float = 14.8
    clamp_events: int = 0

    def correct(self, duty: float, v_measured: float) -> float:
        if not math.isfinite(v_measured) or v_measured <= 0.0:
            raise BatterySenseFaultError(f"battery sense read {v_measured!r} V")
        corrected = duty * (2.0 * self.v_nominal - v_measured) / self.v_nominal
        if abs(corrected) > 1.0:
            self.clamp_events += 1
            corrected = math.copysign(1.0, corrected)
        return corrected


class ActuationController:
    """Full chain: high-level correction, IK, per-actuator PID, duty correction.

    Measured per-actuator speeds come from the odometry twist pushed through
    the same inverse kinematics as the setpoints, so both sides share units.
    """

    def __init__(self, plant: PlantConfig, v_nominal: float = 14.8,
                 hl_gain: float = 0.5, kp: float = 0.5, ki: float = 1.5,
                 kd: float = 0.0, correction_on: bool = True):
        self.plant = plant
        self.high_level = HighLevelState(gain=hl_gain)
        self.pids = [PidController(kp, ki, kd) for _ in range(plant.n_actuators)]
        self.compensator = BatteryCompensator(v_nominal=v_nominal)
        self.correction_on = correction_on
        self.speed_scale = actuator_speed_scale(plant, v_nominal)
        self.last_duties = np.zeros(plant.n_actuators)
        self.last_duties_pre = np.zeros(plant.n_actuators)

    def reset(self) -> None:
        for pid in self.pids:
            pid.reset()
        self.last_duties = np.zeros(self.plant.n_actuators)
        self.last_duties_pre = np.zeros(self.plant.n_actuators)

    def step(self, v_r: Twist2D, v_o: Twist2D, v_battery: float,
             dt: float) -> np.ndarray:
        """One control tick: reference twist + observed twist -> PWM duties."""
        cmd = high_level_step(self.high_level, v_r, v_o, self.plant)
        setpoints = inverse_kinematics(self.plant, cmd) / self.speed_scale
        if v_o.is_finite():
            observed = inverse_kinematics(self.plant, self._project(v_o)) / self.speed_scale
        else:
            # Odometry dropout: hold the previous command.
            return self.last_duties.copy()
        duties = np.array([
            pid.step(sp, ob, dt) for pid, sp, ob in zip(self.pids, setpoints, observed)
        ])
        self.last_duties_pre = duties
        if self.correction_on:
            duties = np.array([self.compensator.correct(d, v_battery) for d in duties])
        self.last_duties = duties
        return duties

    def _project(self, twist: Twist2D) -> Twist2D:
        """Drop components the plant cannot measure about itself."""
        if self.plant.kind == DIFFDRIVE:
            return Twist2D(twist.vx, 0.0, twist.omega)
        return twist
