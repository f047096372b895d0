"""Continuous vehicle kinematics, perceptual two-point steering, and headway-based
acceleration control, plus fine-grained simulation of lane keeping and lane changes.

All functions are pure; no module-level mutable state.  The lane-change
integration loop is compiled with numba: building an abstraction simulates
tens of thousands of maneuvers at a few-millisecond step, which is far too
hot for interpreted code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import InvalidStateError, ManeuverDivergenceError


@dataclass(frozen=True)
class VehicleState:
    """Continuous pose of the ego vehicle."""

    x: float            # longitudinal position (m)
    y: float            # lateral position (m)
    v: float            # speed (m/s), >= 0
    psi: float = 0.0    # heading angle (rad), |psi| < pi/2
    rho: float = 0.0    # steering angle (rad)
    a: float = 0.0      # current acceleration (m/s^2)


@dataclass(frozen=True)
class ControlInput:
    rho: float          # steering angle (rad)
    a: float            # acceleration (m/s^2)


@dataclass(frozen=True)
class DynamicsParams:
    """Vehicle geometry, control gains, and simulation step sizes.

    ``dt`` is the duration of one control+decision cycle; ``dt_sim`` is the
    fine integration step used inside compressed maneuvers (dt_sim <= dt).
    """

    l: float = 5.0                  # vehicle length (m)
    dt_sim: float = 0.004           # fine integration step (s)
    dt: float = 0.5                 # cycle duration (s)
    k_far: float = 15.0             # steering gain on far-point angle change
    k_near: float = 3.0             # steering gain on near-point angle change
    k_i: float = 5.0                # steering gain on integrated near-point angle
    theta_max: float = 0.5          # cap on the integral term's angle (rad)
    k_car: float = 3.0              # accel gain on headway change
    k_follow: float = 1.0           # accel gain on headway error
    thw_follow: float = 2.0         # target following time headway (s)
    thw_cap: float = 10.0           # headway when no lead exists (s)
    a_min: float = -4.0             # acceleration lower bound (m/s^2)
    a_max: float = 2.0              # acceleration upper bound (m/s^2)
    lane_width: float = 3.6         # lateral spacing between lane centers (m)
    d_near: float = 10.0            # near-point look-ahead distance (m)
    d_far: float = 40.0             # far-point look-ahead distance (m)
    eps_y: float = 0.05             # lateral convergence tolerance (m)
    eps_psi: float = 0.005          # heading convergence tolerance (rad)
    t_maneuver_max: float = 15.0    # lane-change time budget (s)
    symmetric_theta_cap: bool = False  # also cap the integral angle at -theta_max

    def validate(self):
        if not self.dt_sim <= self.dt:
            raise ValueError("dt_sim must not exceed dt")
        if not (self.a_min < 0.0 < self.a_max):
            raise ValueError("acceleration bounds must straddle zero")
        if not self.lane_width > 0.0:
            raise ValueError("lane_width must be positive")
        for name in ("k_far", "k_near", "k_i", "k_car", "k_follow"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"gain {name} must be finite")
        return self


@dataclass(frozen=True)
class OtherVehicle:
    """The other (predictable) vehicle: constant speed, fixed lane."""

    x0: float           # position at t=0 (m)
    v: float            # constant speed (m/s)
    lane: int = 0

    def x_at(self, t: float) -> float:
        return self.x0 + self.v * t


@dataclass(frozen=True)
class ManeuverOutcome:
    """Result of a compressed lane-change maneuver."""

    end_state: VehicleState
    duration: float                 # elapsed time (s), > 0
    collided: bool
    labels_seen: frozenset[str]


@dataclass(frozen=True)
class ManeuverTrajectory:
    """Fine-grained record of a lane-change integration.

    ``steps`` holds one (t_rel, x, y, v, psi, a) tuple per integration step,
    starting after the first step.  ``status`` is one of 'converged',
    'collided', 'diverged'.
    """

    steps: tuple
    status: str
    duration: float
    end_v: float
    end_a: float


def lane_center(lane: int, params: DynamicsParams) -> float:
    return lane * params.lane_width


def lane_of(y: float, params: DynamicsParams) -> int:
    """Index of the lane whose center is nearest to lateral position y."""
    return int(round(y / params.lane_width))


def clamp_accel(a: float, params: DynamicsParams) -> float:
    return max(min(a, params.a_max), params.a_min)


def vehicles_collide(x_ego: float, y_ego: float, x_other: float, y_other: float,
                     params: DynamicsParams) -> bool:
    """Rectangle-overlap approximation with a single length parameter."""
    return (abs(y_ego - y_other) < params.lane_width / 2.0
            and abs(x_ego - x_other) < params.l)


def _check_finite(s: VehicleState):
    for name in ("x", "y", "v", "psi", "rho", "a"):
        if not math.isfinite(getattr(s, name)):
            raise InvalidStateError(f"non-finite vehicle state field '{name}'")


def step_kinematics(s: VehicleState, u: ControlInput, dt: float,
                    params: DynamicsParams) -> VehicleState:
    """Advance the pose by one step of the difference equations.

    dx = v cos(psi+rho) dt, dy = v sin(psi+rho) dt,
    dv = a dt (speed clamped at 0), dpsi = (2v/l) sin(rho) dt.
    """
    _check_finite(s)
    if not (math.isfinite(u.rho) and math.isfinite(u.a)):
        raise InvalidStateError("non-finite control input")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    return VehicleState(
        x=s.x + s.v * math.cos(s.psi + u.rho) * dt,
        y=s.y + s.v * math.sin(s.psi + u.rho) * dt,
        v=max(s.v + u.a * dt, 0.0),
        psi=s.psi + (2.0 * s.v / params.l) * math.sin(u.rho) * dt,
        rho=u.rho,
        a=u.a,
    )


def perception_angles(s: VehicleState, target_lane: int,
                      lead: tuple[float, int] | None,
                      params: DynamicsParams) -> tuple[float, float]:
    """Visual angles to the near and far reference points of the target lane.

    The near point is the target-lane center at look-ahead d_near.  The far
    point is the lead vehicle when it is in the target lane and closer than
    d_far ahead, otherwise the lane center at d_far.
    """
    y_t = lane_center(target_lane, params)
    theta_near = math.atan2(y_t - s.y, params.d_near) - s.psi
    far_dist = params.d_far
    if lead is not None:
        lead_x, lead_lane = lead
        ahead = lead_x - s.x
        if lead_lane == target_lane and 0.0 < ahead < params.d_far:
            far_dist = ahead
    theta_far = math.atan2(y_t - s.y, far_dist) - s.psi
    return theta_near, theta_far


def steering_delta(dtheta_near: float, dtheta_far: float, theta_near: float,
                   params: DynamicsParams, dt: float,
                   gains: tuple[float, float, float] | None = None) -> float:
    """Two-point steering law: change in steering angle over one step of dt.

    ``gains`` overrides (k_far, k_near, k_i), e.g. with human+assist sums.
    """
    k_far, k_near, k_i = gains if gains is not None else (
        params.k_far, params.k_near, params.k_i)
    if params.symmetric_theta_cap:
        capped = math.copysign(min(abs(theta_near), params.theta_max), theta_near)
    else:
        capped = min(theta_near, params.theta_max)
    return k_far * dtheta_far + k_near * dtheta_near + k_i * capped * dt


def accel_delta(dthw: float, thw: float, params: DynamicsParams, dt: float) -> float:
    """Headway-tracking acceleration law: change in acceleration over dt."""
    if thw < 0.0:
        raise ValueError("time headway must be non-negative")
    return params.k_car * dthw + params.k_follow * (thw - params.thw_follow) * dt


def time_headway(gap: float | None, v: float, params: DynamicsParams) -> float:
    """Time headway to the lead, in [0, thw_cap].

    ``gap`` is bumper gap (lead position - ego position - l); None means no
    lead.  The cap also applies when the ego is (nearly) stationary.
    """
    if gap is None or v < 1e-9:
        return params.thw_cap
    return min(max(gap / v, 0.0), params.thw_cap)


def headway_rate(gap: float | None, v: float, v_lead: float, a: float,
                 params: DynamicsParams) -> float:
    """Instantaneous d/dt of the time headway; 0 when the headway is capped."""
    if gap is None or v < 1e-9:
        return 0.0
    thw = gap / v
    if thw <= 0.0 or thw >= params.thw_cap:
        return 0.0
    return (v_lead - v) / v - thw * a / v


def _lead_gap(x_ego: float, y_ego: float, t: float, other: OtherVehicle,
              params: DynamicsParams) -> float | None:
    """Bumper gap to the other vehicle if it acts as lead for the ego.

    The other vehicle counts as lead when it is ahead and inside the ego's
    collision corridor (lateral offset below lane_width/2); None otherwise.
    """
    if abs(lane_center(other.lane, params) - y_ego) >= params.lane_width / 2.0:
        return None
    x_o = other.x_at(t)
    if x_o <= x_ego:
        return None
    return x_o - x_ego - params.l


def simulate_lane_follow(s: VehicleState, t0: float, other: OtherVehicle | None,
                         params: DynamicsParams, a_extra: float = 0.0) -> VehicleState:
    """One control cycle of lane keeping: acceleration law plus straight motion.

    The human acceleration update is applied once at the cycle start,
    ``a_extra`` (active assist increment, 0 for human-only) is added, the sum
    is clamped to [a_min, a_max], and the pose advances one dt step with zero
    steering.  y and psi are unchanged.
    """
    _check_finite(s)
    gap = _lead_gap(s.x, s.y, t0, other, params) if other is not None else None
    thw = time_headway(gap, s.v, params)
    v_lead = other.v if (other is not None and gap is not None) else s.v
    dthw = headway_rate(gap, s.v, v_lead, s.a, params) * params.dt
    a_h = clamp_accel(s.a + accel_delta(dthw, thw, params, params.dt), params)
    a_cmd = clamp_accel(a_h + a_extra, params)
    return VehicleState(
        x=s.x + s.v * params.dt,
        y=s.y,
        v=max(s.v + a_cmd * params.dt, 0.0),
        psi=s.psi,
        rho=0.0,
        a=a_cmd,
    )


_DIVERGED, _COLLIDED, _CONVERGED = 0, 1, 2


@njit(cache=True)
def _lane_change_kernel(x, y, v, psi, rho, a0, y_t, dt, n_max, record_every,
                        d_near, d_far, k_far, k_near, k_i, theta_max,
                        symmetric, k_car, k_follow, thw_follow, thw_cap,
                        a_min, a_max, half_width, length, eps_y, eps_psi,
                        has_other, x_o, v_o, y_o, a_extra, out):
    """Fine integration of one lane change; records every k-th step into
    ``out`` rows (t, x, y, v, psi, a) and returns (status, rows, elapsed)."""
    two_over_l = 2.0 / length
    psi_limit = math.pi / 2.0
    a_h = a0        # human acceleration integrator
    a_app = a0      # acceleration actually applied (human + assist, clamped)

    # re-anchor the reference points to the destination lane
    dy0 = y_t - y
    prev_near = math.atan2(dy0, d_near) - psi
    if has_other and 0.0 < x_o - x < d_far and y_o == y_t:
        prev_far = math.atan2(dy0, x_o - x) - psi
    else:
        prev_far = math.atan2(dy0, d_far) - psi

    rows = 0
    elapsed = 0.0
    status = _DIVERGED
    for step_no in range(1, n_max + 1):
        dy = y_t - y
        near = math.atan2(dy, d_near) - psi
        if has_other and 0.0 < x_o - x < d_far and y_o == y_t:
            far = math.atan2(dy, x_o - x) - psi
        else:
            far = math.atan2(dy, d_far) - psi
        if symmetric:
            capped = min(abs(near), theta_max)
            if near < 0.0:
                capped = -capped
        else:
            capped = near if near < theta_max else theta_max
        rho += (k_far * (far - prev_far) + k_near * (near - prev_near)
                + k_i * capped * dt)
        prev_near = near
        prev_far = far

        # headway control against the vehicle ahead in the collision corridor
        has_lead = has_other and x_o > x and abs(y_o - y) < half_width
        if not has_lead or v < 1e-9:
            thw = thw_cap
            dthw = 0.0
        else:
            thw = (x_o - x - length) / v
            if thw < 0.0:
                thw = 0.0
            elif thw > thw_cap:
                thw = thw_cap
            if thw <= 0.0 or thw >= thw_cap:
                dthw = 0.0
            else:
                dthw = ((v_o - v) / v - thw * a_app / v) * dt
        a_h += k_car * dthw + k_follow * (thw - thw_follow) * dt
        if a_h > a_max:
            a_h = a_max
        elif a_h < a_min:
            a_h = a_min
        a_app = a_h + a_extra
        if a_app > a_max:
            a_app = a_max
        elif a_app < a_min:
            a_app = a_min

        x += v * math.cos(psi + rho) * dt
        y += v * math.sin(psi + rho) * dt
        psi += two_over_l * v * math.sin(rho) * dt
        v += a_app * dt
        if v < 0.0:
            v = 0.0
        x_o += v_o * dt
        elapsed = step_no * dt

        done = False
        if psi >= psi_limit or psi <= -psi_limit:
            status = _DIVERGED
            done = True
        elif has_other and abs(y - y_o) < half_width and abs(x - x_o) < length:
            status = _COLLIDED
            done = True
        elif -eps_y < y - y_t < eps_y and -eps_psi < psi < eps_psi:
            status = _CONVERGED
            done = True
        if done or step_no % record_every == 0:
            out[rows, 0] = elapsed
            out[rows, 1] = x
            out[rows, 2] = y
            out[rows, 3] = v
            out[rows, 4] = psi
            out[rows, 5] = a_app
            rows += 1
        if done:
            break
    if rows == 0 or out[rows - 1, 0] != elapsed:
        out[rows, 0] = elapsed
        out[rows, 1] = x
        out[rows, 2] = y
        out[rows, 3] = v
        out[rows, 4] = psi
        out[rows, 5] = a_app
        rows += 1
    return status, rows, elapsed


def lane_change_trajectory(s: VehicleState, target_lane: int,
                           gains: tuple[float, float, float],
                           other: OtherVehicle | None, t0: float,
                           params: DynamicsParams,
                           a_extra: float = 0.0,
                           record_every: int = 1) -> ManeuverTrajectory:
    """Integrate a full lane-change maneuver at step dt_sim.

    Both control laws run every step with the perception points aimed at the
    target lane; the driver re-anchors to the destination-lane points at the
    start, so the angle differences begin at zero and steering builds through
    the integral term.  Integration stops on convergence
    (|y - y_target| < eps_y and |psi| < eps_psi), collision, or divergence
    (time budget exhausted or the heading leaving (-pi/2, pi/2)).

    ``record_every`` keeps only every k-th integration step in ``steps`` (the
    final step is always kept); the dynamics are unaffected.
    """
    _check_finite(s)
    if not all(math.isfinite(g) for g in gains):
        raise InvalidStateError("non-finite gain triple")
    n_max = int(math.ceil(params.t_maneuver_max / params.dt_sim))
    record_every = max(1, int(record_every))
    out = np.empty((n_max // record_every + 2, 6))
    if other is not None:
        has_other = True
        x_o = other.x0 + other.v * t0
        v_o = other.v
        y_o = lane_center(other.lane, params)
    else:
        has_other, x_o, v_o, y_o = False, 0.0, 0.0, 0.0
    status_code, rows, elapsed = _lane_change_kernel(
        s.x, s.y, s.v, s.psi, s.rho, s.a, lane_center(target_lane, params),
        params.dt_sim, n_max, record_every,
        params.d_near, params.d_far, gains[0], gains[1], gains[2],
        params.theta_max, params.symmetric_theta_cap,
        params.k_car, params.k_follow, params.thw_follow, params.thw_cap,
        params.a_min, params.a_max, params.lane_width / 2.0, params.l,
        params.eps_y, params.eps_psi, has_other, x_o, v_o, y_o, a_extra, out)
    status = ("diverged", "collided", "converged")[status_code]
    steps = tuple(tuple(float(c) for c in row) for row in out[:rows])
    last = steps[-1]
    return ManeuverTrajectory(steps=steps, status=status, duration=elapsed,
                              end_v=last[3], end_a=last[5])


def simulate_lane_change(s: VehicleState, target_lane: int,
                         gains: tuple[float, float, float],
                         other: OtherVehicle | None, t0: float,
                         params: DynamicsParams,
                         labeler=None, a_extra: float = 0.0) -> ManeuverOutcome:
    """Run a compressed lane-change maneuver and report its outcome.

    ``labeler``, if given, is called as labeler(x, y, v, t_abs) for every
    integration step and must return an iterable of atomic propositions; all
    propositions that become true at any point are collected.  Raises
    ManeuverDivergenceError if the maneuver does not converge in time (model
    builders map that to a crash).
    """
    traj = lane_change_trajectory(s, target_lane, gains, other, t0, params,
                                  a_extra=a_extra)
    labels = set()
    if labeler is not None:
        for (t_rel, x, y, v, psi, a) in traj.steps:
            labels.update(labeler(x, y, v, t0 + t_rel))
    if traj.status == "diverged":
        raise ManeuverDivergenceError(
            f"lane change did not converge within {params.t_maneuver_max} s",
            elapsed=traj.duration)
    if traj.status == "collided":
        labels.add("crash")
    _, x, y, v, psi, a = traj.steps[-1]
    if traj.status == "converged":
        end = VehicleState(x=x, y=lane_center(target_lane, params), v=v,
                           psi=0.0, rho=0.0, a=a)
    else:
        end = VehicleState(x=x, y=y, v=v, psi=psi, rho=0.0, a=a)
    return ManeuverOutcome(end_state=end, duration=traj.duration,
                           collided=(traj.status == "collided"),
                           labels_seen=frozenset(labels))
