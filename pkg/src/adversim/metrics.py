"""Effectiveness and realism metrics: attack success rate, acceleration KL
divergence, abnormal jerk rate."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput, TooShort

ACCEL_RANGE = (-8.0, 8.0)
ACCEL_BINS = 21
JERK_THRESHOLD = 10.0


def attack_success_rate(results) -> float:
    """Collision fraction over rollout results."""
    results = list(results)
    if not results:
        raise EmptyInput("no rollout results")
    return sum(1 for r in results if r.collided) / len(results)


@dataclass
class Histogram:
    """Fixed-range acceleration histogram with Laplace smoothing."""
    bin_edges: np.ndarray = field(
        default_factory=lambda: np.linspace(ACCEL_RANGE[0], ACCEL_RANGE[1],
                                            ACCEL_BINS + 1))
    counts: np.ndarray = field(default_factory=lambda: np.zeros(ACCEL_BINS, dtype=int))
    laplace_alpha: float = 1.0

    def add(self, samples) -> None:
        x = np.clip(np.asarray(samples, dtype=float),
                    self.bin_edges[0], self.bin_edges[-1])
        c, _ = np.histogram(x, bins=self.bin_edges)
        self.counts = self.counts + c

    def probabilities(self, smoothed: bool = True) -> np.ndarray:
        n = int(self.counts.sum())
        k = len(self.counts)
        if smoothed:
            return (self.counts + self.laplace_alpha) / (n + self.laplace_alpha * k)
        if n == 0:
            raise EmptyInput("empty histogram")
        return self.counts / n


def kl_divergence(p, q) -> float:
    """KL(p || q) in nats for raw probability vectors (unsmoothed path)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    out = 0.0
    for pi, qi in zip(p, q):
        if pi > 0:
            out += pi * math.log(pi / qi)
    return out


def track_accels(track) -> np.ndarray:
    """Accelerations by finite difference of speed."""
    v = np.array([s.speed for s in track.samples])
    if len(v) < 2:
        raise TooShort("need at least 2 samples for accelerations")
    return np.diff(v) / _dt_of(track)


def _dt_of(track, default: float = 0.1) -> float:
    return getattr(track, "dt", default) or default


def accel_kl(generated, reference, dt: float = 0.1) -> float:
    """KL divergence (generated || reference) of acceleration distributions,
    both Laplace-smoothed over the fixed histogram."""
    hg, hr = Histogram(), Histogram()
    got_g = got_r = False
    for t in generated:
        v = np.array([s.speed for s in t.samples])
        if len(v) >= 2:
            hg.add(np.diff(v) / dt)
            got_g = True
    for t in reference:
        v = np.array([s.speed for s in t.samples])
        if len(v) >= 2:
            hr.add(np.diff(v) / dt)
            got_r = True
    if not got_g or not got_r:
        raise EmptyInput("both track sets must yield acceleration samples")
    return kl_divergence(hg.probabilities(), hr.probabilities())


def abnormal_jerk_rate(tracks, threshold: float = JERK_THRESHOLD,
                       dt: float = 0.1) -> float:
    """Fraction of jerk samples (second difference of speed) beyond the threshold."""
    tracks = list(tracks)
    if not tracks:
        raise EmptyInput("no tracks")
    total = 0
    abnormal = 0
    for t in tracks:
        v = np.array([s.speed for s in t.samples])
        if len(v) < 3:
            raise TooShort("need at least 3 samples for jerk")
        jerk = np.diff(v, n=2) / (dt * dt)
        total += len(jerk)
        abnormal += int(np.sum(np.abs(jerk) > threshold))
    return abnormal / total


def mean_and_half_variance(values) -> tuple[float, float]:
    """Mean and half the sample variance (n-1 denominator); 0 spread for n <= 1."""
    vals = list(values)
    if not vals:
        raise EmptyInput("no values")
    mean = sum(vals) / len(vals)
    if len(vals) < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
    return mean, var / 2.0
