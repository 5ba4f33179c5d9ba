"""Threshold binning, coincidence statistics, bounded correlations and
CHSH assembly, plus the ideal single-photon reference curve.

Binning rule: outcome 0 when x < -T, outcome 1 when x > T, discard
otherwise, independently per arm; a record survives only if both arms do.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .decoy import (
    BoundedEstimate,
    DecoyIntensitySet,
    GainVector,
    bound_statistic,
    estimate_single_photon_statistic,
)
from .homodyne import SampleBatch, joint_pdf_fock

OUTCOME_PAIRS = ((0, 0), (0, 1), (1, 0), (1, 1))

# CHSH setting combinations in the order they enter S: the (a1, b1) term is
# subtracted (its correlation is negative for the entangled state).
CHSH_COMBOS = ((0, 0), (1, 0), (0, 1), (1, 1))


class EmptySurvivorError(RuntimeError):
    """All records fell inside the discard window."""


@dataclass(frozen=True)
class CoincidenceCounts:
    n00: int
    n01: int
    n10: int
    n11: int
    n_discarded: int
    total: int

    def __post_init__(self):
        if self.n00 + self.n01 + self.n10 + self.n11 + self.n_discarded != self.total:
            raise ValueError("coincidence counts do not add up to total")

    @property
    def survivors(self) -> int:
        return self.total - self.n_discarded

    def probabilities(self) -> dict:
        """Unconditional coincidence probabilities P_ij = n_ij / total
        (these are the gains fed to the decoy estimator)."""
        return {
            (0, 0): self.n00 / self.total,
            (0, 1): self.n01 / self.total,
            (1, 0): self.n10 / self.total,
            (1, 1): self.n11 / self.total,
        }


@dataclass(frozen=True)
class CorrelationBound:
    e_est: float
    e_lower: float
    e_upper: float

    def __post_init__(self):
        if not (self.e_lower - 1e-12 <= self.e_est <= self.e_upper + 1e-12):
            raise ValueError("correlation estimate outside its bounds")


@dataclass(frozen=True)
class ChshResult:
    threshold: float
    s_est: float
    s_lower: float
    s_upper: float
    valid: bool = True

    def __post_init__(self):
        if self.valid:
            if not (self.s_lower - 1e-12 <= self.s_est <= self.s_upper + 1e-12):
                raise ValueError("S estimate outside its bounds")
            if abs(self.s_est) > 4.0 + 1e-12:
                raise ValueError("|S| exceeds algebraic maximum 4")


def bin_coincidences(batch: SampleBatch, T: float) -> CoincidenceCounts:
    if T < 0:
        raise ValueError("threshold must be non-negative")
    lo_a, hi_a = batch.x_a < -T, batch.x_a > T
    lo_b, hi_b = batch.x_b < -T, batch.x_b > T
    n00 = int(np.count_nonzero(lo_a & lo_b))
    n01 = int(np.count_nonzero(lo_a & hi_b))
    n10 = int(np.count_nonzero(hi_a & lo_b))
    n11 = int(np.count_nonzero(hi_a & hi_b))
    total = len(batch)
    return CoincidenceCounts(n00, n01, n10, n11, total - n00 - n01 - n10 - n11, total)


def correlation(counts: CoincidenceCounts) -> float:
    surv = counts.n00 + counts.n01 + counts.n10 + counts.n11
    if surv == 0:
        raise EmptySurvivorError("no surviving coincidences at this threshold")
    return (counts.n00 + counts.n11 - counts.n01 - counts.n10) / surv


def correlation_bounds(
    p00: BoundedEstimate,
    p01: BoundedEstimate,
    p10: BoundedEstimate,
    p11: BoundedEstimate,
) -> CorrelationBound:
    """Exact interval bounds on E = (A - B) / (A + B) with A = P00 + P11 and
    B = P01 + P10: E is increasing in A and decreasing in B on A, B >= 0, so
    the extremes sit at the box corners (A high, B low) and (A low, B high).
    The resulting interval always contains the point estimate and is already
    inside [-1, 1]."""
    den_est = p00.estimate + p11.estimate + p01.estimate + p10.estimate
    if den_est == 0:
        raise ZeroDivisionError("all coincidence probability estimates are zero")
    e_est = (p00.estimate + p11.estimate - p01.estimate - p10.estimate) / den_est
    e_est = min(max(e_est, -1.0), 1.0)

    a_lo, a_hi = p00.lower + p11.lower, p00.upper + p11.upper
    b_lo, b_hi = p01.lower + p10.lower, p01.upper + p10.upper
    if a_hi + b_lo == 0 or a_lo + b_hi == 0:
        raise ZeroDivisionError("zero denominator in correlation bound")
    e_upper = (a_hi - b_lo) / (a_hi + b_lo)
    e_lower = (a_lo - b_hi) / (a_lo + b_hi)
    # A raw estimate built from out-of-box (clamped) probabilities can stray
    # outside the rigorous interval; snap it back in.
    e_est = min(max(e_est, e_lower), e_upper)
    return CorrelationBound(e_est=e_est, e_lower=e_lower, e_upper=e_upper)


def chsh_from_correlations(
    e00: CorrelationBound,
    e10: CorrelationBound,
    e01: CorrelationBound,
    e11: CorrelationBound,
    threshold: float = 0.0,
) -> ChshResult:
    """S = E(a0,b0) + E(a1,b0) + E(a0,b1) - E(a1,b1); the subtracted term
    keeps its own lower bound in S^+ (it is expected negative, so the bounds
    do not flip there)."""
    s_est = e00.e_est + e10.e_est + e01.e_est - e11.e_est
    s_upper = e00.e_upper + e10.e_upper + e01.e_upper - e11.e_lower
    s_lower = e00.e_lower + e10.e_lower + e01.e_lower - e11.e_upper
    return ChshResult(threshold, s_est, s_lower, s_upper)


@lru_cache(maxsize=4096)
def _quadrant_probs_single_photon(T: float):
    """2-D Gauss-Legendre integrals of the n=1 joint pdf over the four
    quadrant windows, split into the dtheta-independent and cos(dtheta)
    pieces (the pdf is p0 + p_c * cos dtheta with both pieces factorizable,
    but we integrate the full 2-D grid as an independent route)."""
    x_max = 10.0
    order = 160
    nodes, weights = np.polynomial.legendre.leggauss(order)
    # Map to [T, x_max] (the x > T window); mirror symmetry covers x < -T.
    half = 0.5 * (x_max - T)
    xs = T + half * (nodes + 1.0)
    ws = half * weights
    # pdf(xa, xb, dth) = base(xa, xb) + cross(xa, xb) cos(dth)
    xa = xs[:, None]
    xb = xs[None, :]
    p_at_0 = joint_pdf_fock(1, xa, xb, 0.0)
    p_at_pi = joint_pdf_fock(1, xa, xb, np.pi)
    w2 = ws[:, None] * ws[None, :]
    base = float(np.sum(w2 * 0.5 * (p_at_0 + p_at_pi)))
    cross = float(np.sum(w2 * 0.5 * (p_at_0 - p_at_pi)))
    return base, cross


def ideal_single_photon_correlation(dtheta: float, T: float) -> float:
    """Reference E(dtheta, T) for a true single-photon input, by numerical
    quadrature of the exact joint density over the quadrant windows."""
    if T < 0:
        raise ValueError("threshold must be non-negative")
    base, cross = _quadrant_probs_single_photon(float(T))
    c = np.cos(dtheta)
    # Same-sign quadrants pick +cross, opposite-sign quadrants -cross
    # (mirroring one axis flips the odd interference term).
    p_same = base + cross * c
    p_opp = base - cross * c
    den = 2.0 * (p_same + p_opp)
    if den <= 0:
        raise ArithmeticError("quadrature produced non-positive total mass")
    return float(2.0 * (p_same - p_opp) / den)


def ideal_single_photon_chsh(T: float) -> float:
    """Reference S(T) assembled from the ideal correlation at the four
    CHSH phase combinations."""
    from .homodyne import MeasurementSettings

    total = 0.0
    for idx, (la, lb) in enumerate(CHSH_COMBOS):
        e = ideal_single_photon_correlation(MeasurementSettings.chsh(la, lb).dtheta, T)
        total += -e if idx == 3 else e
    return total


def decoy_coincidence_bounds(
    batches_by_intensity: dict,
    intensity_set: DecoyIntensitySet,
    T: float,
) -> dict:
    """Per-outcome decoy-bounded single-photon coincidence probabilities.

    `batches_by_intensity` maps intensity label (0 = vacuum, 1..L = decoy
    levels in increasing order) to a SampleBatch at a single fixed setting.
    """
    probs = {
        label: bin_coincidences(batch, T).probabilities()
        for label, batch in batches_by_intensity.items()
    }
    out = {}
    for pair in OUTCOME_PAIRS:
        gains = GainVector(
            vacuum=probs[0][pair],
            gains=tuple(probs[j][pair] for j in range(1, intensity_set.num_levels + 1)),
        )
        est = estimate_single_photon_statistic(gains, intensity_set)
        out[pair] = bound_statistic(est, intensity_set, probability=True)
    return out


def decoy_correlation(
    batches_by_intensity: dict, intensity_set: DecoyIntensitySet, T: float
) -> CorrelationBound:
    p = decoy_coincidence_bounds(batches_by_intensity, intensity_set, T)
    return correlation_bounds(p[(0, 0)], p[(0, 1)], p[(1, 0)], p[(1, 1)])


def scan_threshold(
    batches: dict,
    intensity_set: DecoyIntensitySet,
    t_grid,
) -> list[ChshResult]:
    """Full decoy CHSH pipeline per threshold.

    `batches` maps ((label_a, label_b), intensity_label) -> SampleBatch over
    the 4 CHSH settings and intensity labels 0..L. Thresholds where any
    setting loses all survivors are marked invalid rather than NaN.
    """
    expected = {
        (combo, j) for combo in CHSH_COMBOS for j in range(intensity_set.num_levels + 1)
    }
    missing = expected - set(batches)
    if missing:
        raise ValueError(f"missing batches for {sorted(missing)}")
    results = []
    for T in t_grid:
        try:
            bounds = [
                decoy_correlation(
                    {j: batches[(combo, j)] for j in range(intensity_set.num_levels + 1)},
                    intensity_set,
                    T,
                )
                for combo in CHSH_COMBOS
            ]
        except (ZeroDivisionError, EmptySurvivorError):
            results.append(ChshResult(float(T), 0.0, 0.0, 0.0, valid=False))
            continue
        results.append(
            chsh_from_correlations(*bounds, threshold=float(T))
        )
    return results
