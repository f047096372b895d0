"""Probabilistic lane-change decision making with perception-noise smoothing.

The decision to leave the right lane decays exponentially with the time
headway to the lead; the decision to return from the left lane grows with a
normalized logarithm of the distance already gained.  Perceived distance is
noisy: the published probabilities are smoothed by a Gaussian window before
they enter the abstraction, which matches what a driver who misjudges
distance (but not their own speed) would do.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass


@dataclass(frozen=True)
class DecisionParams:
    alpha: float = 1.0      # exponential decay rate (1/s)
    beta: float = 0.05      # logarithmic shape (1/m)
    d_max: float = 500.0    # maximum scenario distance (m)
    sigma: float = 2.0      # perception noise standard deviation (m)
    delta: float = 1.0      # integral resolution (m)
    L: int = 10             # one-sided count of discrete offset steps

    def validate(self):
        if not self.alpha > 0.0:
            raise ValueError("alpha must be positive")
        if not self.beta > 0.0:
            raise ValueError("beta must be positive")
        if not self.d_max > 0.0:
            raise ValueError("d_max must be positive")
        if self.sigma < 0.0:
            raise ValueError("sigma must be non-negative")
        if not self.delta > 0.0:
            raise ValueError("delta must be positive")
        if self.L < 0:
            raise ValueError("L must be non-negative")
        return self


def p_change_from_right(thw: float, params: DecisionParams) -> float:
    """Probability of leaving the right lane given time headway thw: e^(-alpha*thw)."""
    if thw < 0.0:
        raise ValueError("time headway must be non-negative")
    return math.exp(-params.alpha * thw)


def p_change_from_left(d: float, params: DecisionParams) -> float:
    """Probability of returning to the right lane at distance-gained d.

    Normalized logarithm log(beta*d + 1)/log(beta*d_max + 1); arguments
    outside [0, d_max] are clamped to the scenario bounds.
    """
    d = min(max(d, 0.0), params.d_max)
    return math.log(params.beta * d + 1.0) / math.log(params.beta * params.d_max + 1.0)


def _std_normal_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def gaussian_interval_mass(offset: float, params: DecisionParams) -> float:
    """Mass of N(0, sigma) noise falling within delta/2 of the given offset."""
    if params.sigma <= 0.0:
        raise ValueError("sigma must be positive for interval masses")
    hi = (offset + params.delta / 2.0) / params.sigma
    lo = (offset - params.delta / 2.0) / params.sigma
    return _std_normal_cdf(hi) - _std_normal_cdf(lo)


def _p_lane_change(d: float, v: float, lane: int, params: DecisionParams) -> float:
    """Noiseless lane-change probability for the given lane.

    Distances outside [0, d_max] are clamped to the scenario bounds.
    """
    d = min(max(d, 0.0), params.d_max)
    if lane == 0:
        thw = d / v if v > 1e-9 else math.inf
        return p_change_from_right(thw, params)
    return p_change_from_left(d, params)


def noisy_decision_prob(d: float, v: float, lane: int, params: DecisionParams) -> float:
    """Lane-change probability smoothed over Gaussian distance-measurement noise.

    Weighted sum of the noiseless probability at offsets i*delta,
    i in [-L, L], with weights given by gaussian_interval_mass, renormalized
    by the total mass captured in the finite window.  sigma below 1e-9
    degenerates to the noiseless probability.
    """
    if d < 0.0:
        raise ValueError("distance must be non-negative")
    if params.sigma < 1e-9:
        return _p_lane_change(d, v, lane, params)
    total = 0.0
    mass = 0.0
    for i in range(-params.L, params.L + 1):
        w = gaussian_interval_mass(i * params.delta, params)
        total += _p_lane_change(d + i * params.delta, v, lane, params) * w
        mass += w
    return total / mass


def decision_table(d_values, v_values, params: DecisionParams):
    """Precomputed smoothed probabilities: rows (lane, d, v, p)."""
    rows = []
    for lane in (0, 1):
        for d in d_values:
            for v in v_values:
                rows.append((lane, d, v, noisy_decision_prob(d, v, lane, params)))
    return rows


def write_decision_table_csv(path, d_values, v_values, params: DecisionParams):
    """Export the smoothed decision table with columns lane, d, v, p_lc."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lane", "d", "v", "p_lc"])
        for lane, d, v, p in decision_table(d_values, v_values, params):
            writer.writerow([lane, f"{d:.12g}", f"{v:.12g}", f"{p:.12g}"])
