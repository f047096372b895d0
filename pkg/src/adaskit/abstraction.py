"""Finite Markov abstraction of the driver-vehicle system.

A state is the tuple (kind, mu, x, lam, a, v, t, pending, pending_gain):
``mu`` alternates between the control phase (1) and the decision phase (2);
``x``, ``a``, ``v`` are grid indices; ``t`` counts control cycles; ``pending``
carries the intent selected at the previous decision (none / lane change with
a gain-set index / decelerate) into the control phase that executes it.
``kind`` distinguishes live states from the absorbing crash / end-of-road /
time-out states.

Control-phase transitions are deterministic per action and come from a cached
lookup table of one-cycle lane keeping, one-cycle deceleration, or compressed
lane-change maneuvers simulated by the continuous model.  Decision-phase
transitions are stochastic with the smoothed lane-change probability, and in
the assistance MDP follow the suggestion/compliance table parameterized by
the responsiveness gamma.
"""

from __future__ import annotations

import csv
import math
import re
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .driver import DecisionParams, noisy_decision_prob, p_change_from_right
from .dynamics import (
    DynamicsParams,
    OtherVehicle,
    VehicleState,
    lane_center,
    lane_change_trajectory,
    simulate_lane_follow,
)
from .errors import LabelingError, StateSpaceLimitError
from .models import MarkovChain, Mdp

KIND_LIVE, KIND_CRASH, KIND_GOAL, KIND_TIMEOUT = 0, 1, 2, 3
MU_CONTROL, MU_DECISION = 1, 2
PENDING_NONE, PENDING_LANE_CHANGE, PENDING_DECELERATE = 0, 1, 2

OTHER_VEHICLE_LANE = 0  # the predictable vehicle drives the right lane

BASE_PROPOSITIONS = frozenset({"crash", "goal", "lane0", "lane1", "timeout"})
FEATURE_VARS = ("t", "x", "v", "a", "lane", "mu")


class AbstractState(NamedTuple):
    kind: int
    mu: int
    x: int
    lam: int
    a: int
    v: int
    t: int
    pending: int
    pending_gain: int


@dataclass(frozen=True)
class Scenario:
    """Initial conditions: ego lane/position/speed, other vehicle, road length."""

    lambda0: int = 0
    x0: float = 0.0
    v0: float = 25.0
    x0_ov: float = 50.0
    v0_ov: float = 15.0
    x_max: float = 500.0

    def validate(self):
        if self.lambda0 not in (0, 1):
            raise ValueError("lambda0 must be 0 (right) or 1 (left)")
        if not self.x0 < self.x0_ov:
            raise ValueError("the other vehicle must start ahead (x0 < x0_ov)")
        if self.v0 < 0.0 or self.v0_ov < 0.0:
            raise ValueError("speeds must be non-negative")
        if not self.x_max > self.x0_ov:
            raise ValueError("x_max must exceed the other vehicle's start")
        return self


@dataclass(frozen=True)
class AdasConfig:
    """Assistance features: passive suggestions and incremental active control."""

    gamma: float = 0.5                  # responsiveness to suggestions
    a_d: float = -2.0                   # deceleration applied on the decelerate intent
    accel_increments: tuple = (-1.0, 0.0, 1.0)
    gain_sets: tuple = ((0.0, 0.0, 0.0), (2.0, 0.0, 1.0))
    passive_enabled: bool = True
    active_accel_enabled: bool = True
    active_steer_enabled: bool = True
    # deceleration suggestions and nonzero acceleration increments are offered
    # only while the other vehicle is ahead within this range: intervening
    # against a long-gone lead is vacuous, and pruning it keeps the explicit
    # state space from exploding with arbitrarily slow drift trajectories
    assist_range: float = 75.0

    def validate(self, dyn: DynamicsParams):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be within [0, 1]")
        if not self.assist_range > 0.0:
            raise ValueError("assist_range must be positive")
        if self.active_accel_enabled:
            if not self.accel_increments:
                raise ValueError("accel_increments must not be empty")
            if 0.0 not in self.accel_increments:
                raise ValueError("accel_increments must contain 0")
            if not (dyn.a_min < min(self.accel_increments)
                    and max(self.accel_increments) < dyn.a_max):
                raise ValueError(
                    "accel increments must lie strictly inside [a_min, a_max]")
        if self.active_steer_enabled:
            if (0.0, 0.0, 0.0) not in tuple(tuple(g) for g in self.gain_sets):
                raise ValueError("gain_sets must contain (0, 0, 0)")
        return self


HUMAN_ONLY = AdasConfig(gamma=0.0, accel_increments=(0.0,),
                        gain_sets=((0.0, 0.0, 0.0),),
                        passive_enabled=False, active_accel_enabled=False,
                        active_steer_enabled=False)


@dataclass(frozen=True)
class AbstractionParams:
    """Quantization grids, horizon padding, and the state-count cap.

    The maneuver_* steps form a coarser sub-grid on which compressed
    lane-change simulations are keyed and evaluated: entry speed,
    acceleration, and gap to the other vehicle are snapped to it before
    simulating, which bounds the number of distinct fine-grained simulations
    a model build needs.
    """

    x_step: float = 2.5
    v_step: float = 0.5
    a_step: float = 0.5
    horizon_extra: float = 15.0
    state_cap: int = 2_000_000
    maneuver_v_step: float = 2.0
    maneuver_a_step: float = 2.0
    maneuver_gap_step: float = 5.0

    def validate(self):
        for name in ("x_step", "v_step", "a_step", "maneuver_v_step",
                     "maneuver_a_step", "maneuver_gap_step"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.state_cap < 1:
            raise ValueError("state_cap must be positive")
        return self


def quantize(value: float, step: float) -> int:
    """Grid index by round-to-nearest with ties toward zero."""
    q = value / step
    if q >= 0.0:
        return int(math.ceil(q - 0.5))
    return int(math.floor(q + 0.5))


def suggestion_distribution(suggestion: str, gamma: float, p: float) -> dict:
    """Outcome distribution of one decision under a suggestion.

    Outcomes: 'lc' (change lane), 'con' (continue), 'dec' (decelerate).
    A gamma-compliant draw follows the suggestion; otherwise the driver
    decides naturally (lane change with probability p).
    """
    natural = {"lc": p, "con": 1.0 - p}
    out = {"lc": 0.0, "con": 0.0, "dec": 0.0}
    if suggestion == "lc":
        out["lc"] += gamma
    elif suggestion == "con":
        out["con"] += gamma
    elif suggestion == "dec":
        out["dec"] += gamma
    elif suggestion != "human":
        raise ValueError(f"unknown suggestion {suggestion!r}")
    weight = (1.0 - gamma) if suggestion != "human" else 1.0
    for key, q in natural.items():
        out[key] += weight * q
    return {k: v for k, v in out.items() if v > 0.0}


@dataclass(frozen=True)
class ManeuverProfile:
    """Cached summary of one simulated lane change, in the relative frame
    (ego starts at x=0; samples hold (t_rel, x_rel, y, v))."""

    status: str
    duration: float
    end_x: float
    end_v: float
    end_a: float
    samples: tuple


class ControlTable:
    """Deterministic control-phase successors, backed by cached simulations.

    One instance serves one (scenario, dynamics, assistance) combination;
    the exploration in build_mc / build_mdp drives it lazily.
    """

    SAMPLE_EVERY = 0.1  # (s) trajectory sample spacing kept for event cuts

    def __init__(self, scenario: Scenario, dyn: DynamicsParams,
                 adas: AdasConfig, grids: AbstractionParams):
        self.scenario = scenario
        self.dyn = dyn
        self.adas = adas
        self.grids = grids
        self.other = OtherVehicle(scenario.x0_ov, scenario.v0_ov,
                                  OTHER_VEHICLE_LANE)
        self.x_goal_idx = quantize(scenario.x_max, grids.x_step)
        floor_speed = max(min(scenario.v0, scenario.v0_ov), 1.0)
        self.t_horizon = scenario.x_max / floor_speed + grids.horizon_extra
        self.max_t_idx = int(math.ceil(self.t_horizon / dyn.dt))
        # gain set 0 is always the zero increment (human-only maneuver)
        sets = [tuple(float(g) for g in gs) for gs in adas.gain_sets]
        zero = (0.0, 0.0, 0.0)
        if adas.active_steer_enabled:
            self.gain_sets = (zero,) + tuple(g for g in sets if g != zero)
        else:
            self.gain_sets = (zero,)
        if adas.active_accel_enabled:
            incs = tuple(float(i) for i in adas.accel_increments)
            self.increments = (0.0,) + tuple(i for i in incs if i != 0.0)
        else:
            self.increments = (0.0,)
        self._profiles = {}      # gap-keyed exact simulations
        self._free = {}          # gap-independent simulations + relevance data
        self._relevance = {}     # (free_key, gap_q) -> bool

    # -- dequantization helpers

    def dx(self, idx: int) -> float:
        return idx * self.grids.x_step

    def dv(self, idx: int) -> float:
        return idx * self.grids.v_step

    def da(self, idx: int) -> float:
        return idx * self.grids.a_step

    def dtime(self, idx: int) -> float:
        return idx * self.dyn.dt

    def effective_gains(self, gain_idx: int):
        inc = self.gain_sets[gain_idx]
        return (self.dyn.k_far + inc[0], self.dyn.k_near + inc[1],
                self.dyn.k_i + inc[2])

    # -- successor computation

    def successor(self, st: AbstractState, incr_idx: int) -> AbstractState:
        """Unique successor of a control-phase state under an accel increment."""
        if st.pending == PENDING_LANE_CHANGE:
            return self._lane_change_successor(st, incr_idx)
        return self._follow_successor(st, incr_idx)

    def _follow_successor(self, st: AbstractState, incr_idx: int) -> AbstractState:
        # closed-form mirror of simulate_lane_follow, inlined for the
        # exploration hot path (cross-checked against it in the test suite)
        dyn = self.dyn
        x, v, a = self.dx(st.x), self.dv(st.v), self.da(st.a)
        t_abs = self.dtime(st.t)
        a_extra = self.increments[incr_idx]
        if st.pending == PENDING_DECELERATE:
            a_cmd = max(min(self.adas.a_d + a_extra, dyn.a_max), dyn.a_min)
        else:
            gap = None
            if self.other.lane == st.lam:
                x_o = self.other.x_at(t_abs)
                if x_o > x:
                    gap = x_o - x - dyn.l
            if gap is None or v < 1e-9:
                thw, dthw = dyn.thw_cap, 0.0
            else:
                thw = min(max(gap / v, 0.0), dyn.thw_cap)
                if thw <= 0.0 or thw >= dyn.thw_cap:
                    dthw = 0.0
                else:
                    dthw = ((self.other.v - v) / v - thw * a / v) * dyn.dt
            delta = dyn.k_car * dthw + dyn.k_follow * (thw - dyn.thw_follow) * dyn.dt
            a_h = max(min(a + delta, dyn.a_max), dyn.a_min)
            a_cmd = max(min(a_h + a_extra, dyn.a_max), dyn.a_min)
        x_new = x + v * dyn.dt
        v_new = max(v + a_cmd * dyn.dt, 0.0)
        a_new = a_cmd

        crash_t = self._follow_crash_time(x, v, st.lam, t_abs)
        goal_t = None
        if v > 0.0 and x_new >= self.scenario.x_max:
            goal_t = (self.scenario.x_max - x) / v
        if crash_t is not None and (goal_t is None or crash_t <= goal_t):
            return AbstractState(KIND_CRASH, MU_DECISION,
                                 quantize(x + v * crash_t, self.grids.x_step),
                                 st.lam, st.a, st.v, st.t + 1, 0, 0)
        if goal_t is not None:
            return AbstractState(KIND_GOAL, MU_DECISION, self.x_goal_idx,
                                 st.lam, quantize(a_new, self.grids.a_step),
                                 st.v, st.t + 1, 0, 0)
        new = AbstractState(KIND_LIVE, MU_DECISION,
                            quantize(x_new, self.grids.x_step), st.lam,
                            quantize(a_new, self.grids.a_step),
                            quantize(v_new, self.grids.v_step),
                            st.t + 1, 0, 0)
        return self._timeout_collapse(new)

    def _follow_crash_time(self, x, v, lam, t_abs):
        """Earliest in-cycle time at which the collision rectangle overlaps,
        assuming straight-line motion of both vehicles; None if no overlap."""
        dyn = self.dyn
        if self.other.lane != lam:
            return None
        g0 = self.other.x_at(t_abs) - x
        rel = self.other.v - v  # d(gap)/dt
        g1 = g0 + rel * dyn.dt
        if abs(g0) < dyn.l:
            return 0.0
        if g0 >= dyn.l and g1 < dyn.l:
            return (g0 - dyn.l) / (-rel)
        if g0 <= -dyn.l and g1 > -dyn.l:
            return (-dyn.l - g0) / rel
        return None

    def _lane_change_successor(self, st: AbstractState, incr_idx: int) -> AbstractState:
        profile = self._maneuver_profile(st, incr_idx)
        x0 = self.dx(st.x)
        t_abs = self.dtime(st.t)
        target = 1 - st.lam
        crash_t = profile.duration if profile.status != "converged" else None
        goal_t = None
        goal_v = profile.end_v
        if x0 + profile.end_x >= self.scenario.x_max:
            goal_t, goal_v = self._goal_crossing(profile, x0)
        if goal_t is not None and (crash_t is None or goal_t < crash_t):
            lane_at_goal = st.lam
            for (tr, xr, y, v) in profile.samples:
                if tr >= goal_t:
                    lane_at_goal = int(round(y / self.dyn.lane_width))
                    break
            cycles = max(1, quantize(goal_t, self.dyn.dt))
            return AbstractState(KIND_GOAL, MU_DECISION, self.x_goal_idx,
                                 lane_at_goal,
                                 quantize(profile.end_a, self.grids.a_step),
                                 quantize(goal_v, self.grids.v_step),
                                 st.t + cycles, 0, 0)
        if crash_t is not None:
            cycles = max(1, quantize(crash_t, self.dyn.dt))
            return AbstractState(KIND_CRASH, MU_DECISION,
                                 quantize(x0 + profile.end_x, self.grids.x_step),
                                 target, st.a, st.v, st.t + cycles, 0, 0)
        cycles = max(1, quantize(profile.duration, self.dyn.dt))
        new = AbstractState(KIND_LIVE, MU_DECISION,
                            quantize(x0 + profile.end_x, self.grids.x_step),
                            target,
                            quantize(profile.end_a, self.grids.a_step),
                            quantize(profile.end_v, self.grids.v_step),
                            st.t + cycles, 0, 0)
        return self._timeout_collapse(new)

    def _goal_crossing(self, profile: ManeuverProfile, x0: float):
        """Linear-interpolated (time, speed) at which x reaches the road end."""
        target = self.scenario.x_max - x0
        prev = (0.0, 0.0, None, None)
        for (tr, xr, y, v) in profile.samples:
            if xr >= target:
                t0, x_prev = prev[0], prev[1]
                span = xr - x_prev
                frac = (target - x_prev) / span if span > 0 else 0.0
                return t0 + frac * (tr - t0), v
            prev = (tr, xr, y, v)
        return profile.duration, profile.end_v

    def _maneuver_profile(self, st: AbstractState, incr_idx: int) -> ManeuverProfile:
        """Maneuver outcome for a lane-change control state.

        Entry speed, acceleration, and the gap to the other vehicle are
        snapped to the maneuver sub-grid.  A gap-independent (free) profile
        per entry condition is simulated first; it is reused verbatim for
        every gap at which the other vehicle provably never influences the
        trajectory (neither headway braking, nor the far-point snap, nor a
        collision) -- if the other vehicle stays irrelevant along the free
        trajectory, the true trajectory never departs from it.  Only the
        remaining interacting gaps get their own simulation.
        """
        g = self.grids
        gap = self.other.x_at(self.dtime(st.t)) - self.dx(st.x)
        v_q = quantize(self.dv(st.v), g.maneuver_v_step) * g.maneuver_v_step
        a_q = quantize(self.da(st.a), g.maneuver_a_step) * g.maneuver_a_step
        gap_q = quantize(gap, g.maneuver_gap_step) * g.maneuver_gap_step
        free_key = (st.lam, v_q, a_q, st.pending_gain, incr_idx)
        entry = self._free.get(free_key)
        if entry is None:
            profile = self._simulate_profile(st.lam, v_q, a_q, st.pending_gain,
                                             incr_idx, None)
            tau = np.array([s[0] for s in profile.samples])
            dx = np.array([s[1] for s in profile.samples])
            yy = np.array([s[2] for s in profile.samples])
            entry = (profile, tau, dx, yy)
            self._free[free_key] = entry
        free_profile, tau, dx, yy = entry
        rel_key = (free_key, gap_q)
        relevant = self._relevance.get(rel_key)
        if relevant is None:
            relevant = self._other_relevant(st.lam, gap_q, tau, dx, yy)
            self._relevance[rel_key] = relevant
        if not relevant:
            return free_profile
        key = free_key + (gap_q,)
        profile = self._profiles.get(key)
        if profile is None:
            profile = self._simulate_profile(st.lam, v_q, a_q,
                                             st.pending_gain, incr_idx, gap_q)
            self._profiles[key] = profile
        return profile

    def _other_relevant(self, src_lane, gap0, tau, dx, yy) -> bool:
        """Whether the other vehicle could influence the free trajectory.

        Conservative margins absorb the 0.1 s sampling of the free profile;
        a True here only costs an extra simulation, never correctness.
        """
        dyn = self.dyn
        rel = gap0 + self.other.v * tau - dx     # other center minus ego center
        y_o = lane_center(self.other.lane, dyn)
        corridor = abs(yy - y_o) < dyn.lane_width / 2.0 + 1.0
        if bool((corridor & (rel > -(dyn.l + 3.0))).any()):
            return True
        if self.other.lane == 1 - src_lane:
            snap = (rel > -3.0) & (rel < dyn.d_far + 3.0)
            if bool(snap.any()):
                return True
        return False

    def _simulate_profile(self, lam, v, a, gain_idx, incr_idx, gap) -> ManeuverProfile:
        dyn = self.dyn
        start = VehicleState(x=0.0, y=lane_center(lam, dyn), v=v, a=a)
        shifted = None if gap is None else OtherVehicle(
            x0=gap, v=self.other.v, lane=self.other.lane)
        record = max(1, round(self.SAMPLE_EVERY / dyn.dt_sim))
        traj = lane_change_trajectory(start, 1 - lam,
                                      self.effective_gains(gain_idx),
                                      shifted, 0.0, dyn,
                                      a_extra=self.increments[incr_idx],
                                      record_every=record)
        samples = tuple((tr, xr, y, vv) for (tr, xr, y, vv, _, _) in traj.steps)
        last = traj.steps[-1]
        return ManeuverProfile(status=traj.status, duration=traj.duration,
                               end_x=last[1], end_v=traj.end_v,
                               end_a=traj.end_a, samples=samples)

    def _timeout_collapse(self, st: AbstractState) -> AbstractState:
        if st.t > self.max_t_idx:
            return AbstractState(KIND_TIMEOUT, MU_DECISION, st.x, st.lam,
                                 st.a, st.v, self.max_t_idx + 1, 0, 0)
        return st

    # -- export

    def export_maneuvers_csv(self, path):
        """Inspection dump of every cached maneuver simulation."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["v", "source_lane", "gain_set", "duration",
                             "end_v", "collided", "labels",
                             "a", "accel_increment", "gap"])
            for (lam, v_q, a_q, gain_idx, incr_idx, gap_q), prof in \
                    sorted(self._profiles.items()):
                collided = prof.status != "converged"
                labels = "crash" if collided else ""
                writer.writerow([
                    f"{v_q:.12g}", lam, gain_idx,
                    f"{prof.duration:.12g}", f"{prof.end_v:.12g}",
                    int(collided), labels,
                    f"{a_q:.12g}",
                    f"{self.increments[incr_idx]:.12g}", f"{gap_q:.12g}",
                ])


def build_control_table(scenario: Scenario, dyn: DynamicsParams,
                        adas: AdasConfig,
                        grids: AbstractionParams | None = None) -> ControlTable:
    """Lazy lookup table of control-phase successors for a scenario."""
    grids = (grids or AbstractionParams()).validate()
    return ControlTable(scenario.validate(), dyn.validate(),
                        adas.validate(dyn), grids)


# ---------------------------------------------------------------------------
# state labeling


def state_labels(st: AbstractState) -> frozenset:
    if st.kind == KIND_CRASH:
        return frozenset({"crash"})
    if st.kind == KIND_TIMEOUT:
        return frozenset({"timeout"})
    lane = "lane0" if st.lam == 0 else "lane1"
    if st.kind == KIND_GOAL:
        return frozenset({"goal", lane})
    return frozenset({lane})


def state_features(st: AbstractState, table: ControlTable) -> dict:
    return {
        "t": table.dtime(st.t),
        "x": min(table.dx(st.x), table.scenario.x_max),
        "v": table.dv(st.v),
        "a": table.da(st.a),
        "lane": float(st.lam),
        "mu": float(st.mu),
    }


_THRESHOLD_RE = re.compile(
    r"^\s*([A-Za-z_][A-Za-z_0-9]*)\s*(<=|>=|<|>|=)\s*([-+0-9.eE]+)\s*$")

_CMP = {
    "<=": lambda a, b: a <= b,
    "<": lambda a, b: a < b,
    ">=": lambda a, b: a >= b,
    ">": lambda a, b: a > b,
    "=": lambda a, b: a == b,
}


def label_states(states, predicates, table: ControlTable):
    """Label sets for the given predicates over abstract states.

    Predicates are base propositions (crash, goal, lane0, lane1, timeout) or
    threshold expressions over state variables such as ``t<=21`` or
    ``x>=500``.  Unknown names raise a LabelingError listing the known ones.
    """
    checks = []
    for pred in predicates:
        if pred in BASE_PROPOSITIONS:
            checks.append((pred, None))
            continue
        m = _THRESHOLD_RE.match(pred)
        if m and m.group(1) in FEATURE_VARS:
            checks.append((pred, (m.group(1), _CMP[m.group(2)],
                                  float(m.group(3)))))
            continue
        known = sorted(BASE_PROPOSITIONS) + [f"{v}<op><number>"
                                             for v in FEATURE_VARS]
        raise LabelingError(
            f"unknown predicate {pred!r}; known predicates: {', '.join(known)}")
    out = []
    for st in states:
        base = state_labels(st)
        feats = state_features(st, table)
        labs = set()
        for pred, thr in checks:
            if thr is None:
                if pred in base:
                    labs.add(pred)
            else:
                var, cmp, value = thr
                if cmp(feats[var], value):
                    labs.add(pred)
        out.append(frozenset(labs))
    return out


# ---------------------------------------------------------------------------
# exploration


def _initial_state(table: ControlTable) -> AbstractState:
    sc = table.scenario
    return AbstractState(KIND_LIVE, MU_CONTROL,
                         quantize(sc.x0, table.grids.x_step), sc.lambda0,
                         0, quantize(sc.v0, table.grids.v_step), 0,
                         PENDING_NONE, 0)


class _Explorer:
    def __init__(self, table: ControlTable, decision: DecisionParams):
        self.table = table
        self.decision = decision
        self.index = {}
        self.states = []
        self.queue = deque()
        self._p_memo = {}

    def intern(self, st: AbstractState) -> int:
        idx = self.index.get(st)
        if idx is None:
            idx = len(self.states)
            if idx >= self.table.grids.state_cap:
                g = self.table.grids
                raise StateSpaceLimitError(
                    f"state count exceeded cap {g.state_cap} at grids "
                    f"x_step={g.x_step}, v_step={g.v_step}, "
                    f"a_step={g.a_step}, dt={self.table.dyn.dt}")
            self.index[st] = idx
            self.states.append(st)
            self.queue.append(st)
        return idx

    def lane_change_probability(self, st: AbstractState) -> float:
        """Smoothed probability that the driver decides to change lane."""
        table = self.table
        x = table.dx(st.x)
        x_ov = table.other.x_at(table.dtime(st.t))
        v = table.dv(st.v)
        if st.lam == 0:
            if x_ov <= x:
                # no lead to measure: headway saturates at the cap
                return p_change_from_right(table.dyn.thw_cap, self.decision)
            d = x_ov - x
        else:
            d = max(x - x_ov, 0.0)
        key = (st.lam, d, v)
        p = self._p_memo.get(key)
        if p is None:
            p = noisy_decision_prob(d, v, st.lam, self.decision)
            self._p_memo[key] = p
        return p

    def other_ahead_within(self, st: AbstractState, rng: float) -> bool:
        d = self.table.other.x_at(self.table.dtime(st.t)) - self.table.dx(st.x)
        return 0.0 < d <= rng

    def decision_targets(self, st: AbstractState, gain_idx: int):
        base = (KIND_LIVE, MU_CONTROL, st.x, st.lam, st.a, st.v, st.t)
        lc = AbstractState(*base, PENDING_LANE_CHANGE, gain_idx)
        con = AbstractState(*base, PENDING_NONE, 0)
        dec = AbstractState(*base, PENDING_DECELERATE, 0)
        return {"lc": lc, "con": con, "dec": dec}


def _finish(explorer: _Explorer, cls, transitions, actions=None):
    table = explorer.table
    states = explorer.states
    labels = [state_labels(st) for st in states]
    arr = np.array(states, dtype=np.float64)  # columns follow AbstractState
    features = {
        "t": arr[:, 6] * table.dyn.dt,
        "x": np.minimum(arr[:, 2] * table.grids.x_step, table.scenario.x_max),
        "v": arr[:, 5] * table.grids.v_step,
        "a": arr[:, 4] * table.grids.a_step,
        "lane": arr[:, 3],
        "mu": arr[:, 1],
    }
    common = dict(states=states, initial=0, labels=labels, features=features,
                  vocabulary=BASE_PROPOSITIONS)
    if cls is MarkovChain:
        model = MarkovChain(transitions=transitions, **common)
    else:
        model = Mdp(transitions=transitions, actions=actions, **common)
    return model.validate()


def build_mc(scenario: Scenario, dyn: DynamicsParams,
             decision: DecisionParams, grids: AbstractionParams | None = None,
             table: ControlTable | None = None) -> MarkovChain:
    """Markov chain of the human-only system for a scenario.

    Control states step deterministically through the control table with
    zero assistance; decision states branch between the lane-change intent
    and continuing with the smoothed decision probability.
    """
    if table is None:
        table = build_control_table(scenario, dyn, HUMAN_ONLY, grids)
    explorer = _Explorer(table, decision.validate())
    rows = []
    explorer.intern(_initial_state(table))
    while explorer.queue:
        st = explorer.queue.popleft()
        idx = explorer.index[st]
        if st.kind != KIND_LIVE:
            row = [(idx, 1.0)]
        elif st.mu == MU_CONTROL:
            row = [(explorer.intern(table.successor(st, 0)), 1.0)]
        else:
            p = explorer.lane_change_probability(st)
            targets = explorer.decision_targets(st, 0)
            row = []
            if p > 0.0:
                row.append((explorer.intern(targets["lc"]), p))
            if p < 1.0:
                row.append((explorer.intern(targets["con"]), 1.0 - p))
        rows.append(row)
    return _finish(explorer, MarkovChain, rows)


def build_mdp(scenario: Scenario, dyn: DynamicsParams,
              decision: DecisionParams, adas: AdasConfig,
              grids: AbstractionParams | None = None,
              table: ControlTable | None = None) -> Mdp:
    """MDP of the human-vehicle-assistance system.

    Decision states expose one action per (suggestion, steering gain set)
    pair with the compliance-weighted outcome distribution; control states
    expose the acceleration increments as deterministic actions.  Disabled
    features collapse to singleton action sets.
    """
    if table is None:
        table = build_control_table(scenario, dyn, adas, grids)
    explorer = _Explorer(table, decision.validate())
    gain_indices = tuple(range(len(table.gain_sets)))
    rows, actions = [], []
    explorer.intern(_initial_state(table))
    while explorer.queue:
        st = explorer.queue.popleft()
        idx = explorer.index[st]
        if st.kind != KIND_LIVE:
            rows.append([[(idx, 1.0)]])
            actions.append(["stay"])
        elif st.mu == MU_CONTROL:
            in_range = explorer.other_ahead_within(st, adas.assist_range)
            n_incr = len(table.increments) if in_range else 1
            choices, labels = [], []
            for incr_idx in range(n_incr):
                succ = explorer.intern(table.successor(st, incr_idx))
                choices.append([(succ, 1.0)])
                labels.append(("accel", table.increments[incr_idx]))
            rows.append(choices)
            actions.append(labels)
        else:
            if not adas.passive_enabled:
                suggestions = ("human",)
            elif explorer.other_ahead_within(st, adas.assist_range):
                suggestions = ("lc", "con", "dec")
            else:
                suggestions = ("lc", "con")
            p = explorer.lane_change_probability(st)
            choices, labels = [], []
            for suggestion in suggestions:
                for gain_idx in gain_indices:
                    targets = explorer.decision_targets(st, gain_idx)
                    dist = [(explorer.intern(targets[outcome]), prob)
                            for outcome, prob in
                            suggestion_distribution(suggestion, adas.gamma, p).items()]
                    choices.append(dist)
                    labels.append((suggestion, gain_idx))
            rows.append(choices)
            actions.append(labels)
    return _finish(explorer, Mdp, rows, actions)
