"""Decoy-intensity linear estimator for the single-photon yield, with
rigorous parity-dependent bounds.

The same machinery serves scalar coincidence probabilities and per-bin
densities: the gain entries may be numpy arrays and everything broadcasts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class DecoyIntensitySet:
    """Strictly increasing positive intensities mu_1 < ... < mu_L.

    The vacuum intensity mu_0 = 0 is implicit; measured vacuum gains travel
    separately in the GainVector.
    """

    intensities: tuple

    def __post_init__(self):
        mus = tuple(float(m) for m in self.intensities)
        if len(mus) < 1:
            raise ValueError("need at least one decoy intensity")
        if any(m <= 0 for m in mus):
            raise ValueError("decoy intensities must be positive")
        if any(b <= a for a, b in zip(mus, mus[1:])):
            raise ValueError("decoy intensities must be strictly increasing")
        object.__setattr__(self, "intensities", mus)

    @property
    def num_levels(self) -> int:
        return len(self.intensities)

    def estimator_coefficients(self) -> tuple[np.ndarray, float]:
        """Linear weights (w_1..w_L, w_0) so the single-photon estimate is
        sum_j w_j Q_{mu_j} + w_0 Q_{mu_0}."""
        mus = np.asarray(self.intensities)
        L = len(mus)
        prod = np.prod(mus)
        w = np.empty(L)
        for j in range(L):
            den = np.prod([mus[i] - mus[j] for i in range(L) if i != j]) if L > 1 else 1.0
            w[j] = prod * np.exp(mus[j]) / (mus[j] ** 2 * den)
        w0 = float(-np.sum(w * np.exp(-mus)))
        return w, w0


@dataclass(frozen=True)
class GainVector:
    """Measured statistics per intensity: vacuum first, then mu_1..mu_L.

    Entries may be scalars (probabilities) or arrays (binned densities).
    Sample counts are carried for external standard-error computation only.
    """

    vacuum: np.ndarray | float
    gains: tuple
    counts: tuple = field(default=())


@dataclass(frozen=True)
class BoundedEstimate:
    estimate: float
    lower: float
    upper: float

    def __post_init__(self):
        if not (self.lower <= self.upper + 1e-15):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def width(self) -> float:
        return self.upper - self.lower


def estimate_single_photon_statistic(gains: GainVector, intensity_set: DecoyIntensitySet):
    """Linear decoy estimate of the single-photon yield Y_1.

    mu_1...mu_L * sum_j mu_j^-2 (e^{mu_j} Q_{mu_j} - Q_0) / prod_{i!=j}(mu_i - mu_j).
    Exact when Y_n vanishes for n >= 2; linear in the gains; broadcasts over
    array-valued gains.
    """
    if len(gains.gains) != intensity_set.num_levels:
        raise ValueError("gain vector does not cover all decoy intensities")
    w, w0 = intensity_set.estimator_coefficients()
    q0 = np.asarray(gains.vacuum, dtype=float)
    est = w0 * q0
    for wj, qj in zip(w, gains.gains):
        est = est + wj * np.asarray(qj, dtype=float)
    return est if est.ndim else float(est)


def bound_interval(intensity_set: DecoyIntensitySet) -> float:
    """Worst-case gap Delta_L between the estimate and the true Y_1.

    Delta_L = (-1)^(L+1) * (mu_1...mu_L * sum_j mu_j^-2 (e^{mu_j} - 1)
    / prod_{i!=j}(mu_i - mu_j)  -  1), i.e. the estimator applied to the
    all-ones yield sequence minus its exact single-photon answer, saturated
    by Y_n = 1 for all n >= 2. Always non-negative for a valid set.
    """
    w, w0 = intensity_set.estimator_coefficients()
    # Gains for Y_n = 1 (all n): Q_mu = 1 for every intensity including vacuum.
    all_ones = float(np.sum(w) + w0)
    sign = -1.0 if intensity_set.num_levels % 2 == 0 else 1.0
    delta = sign * (all_ones - 1.0)
    if delta < -1e-12:
        raise ArithmeticError(f"negative bound interval {delta:.3e}: implementation fault")
    return max(delta, 0.0)


def bound_statistic(
    estimate: float, intensity_set: DecoyIntensitySet, probability: bool = True
) -> BoundedEstimate:
    """Parity rule: L odd -> [estimate - Delta_L, estimate]; L even ->
    [estimate, estimate + Delta_L]. Bounds (not the raw estimate) are clamped
    to [0, 1] in probability mode."""
    delta = bound_interval(intensity_set)
    if intensity_set.num_levels % 2 == 1:
        lower, upper = estimate - delta, estimate
    else:
        lower, upper = estimate, estimate + delta
    if probability:
        lower = min(max(lower, 0.0), 1.0)
        upper = min(max(upper, 0.0), 1.0)
        if lower > upper:  # estimate itself outside [0, 1]
            lower = upper = min(max(estimate, 0.0), 1.0)
    return BoundedEstimate(estimate=float(estimate), lower=float(lower), upper=float(upper))


def exact_gains(yields: np.ndarray, mu: float, n_max: int | None = None):
    """Oracle helper: gain Q_mu = sum_n Y_n mu^n e^-mu / n! from a truncated
    yield sequence (series summed over the full provided range)."""
    from scipy.stats import poisson

    yields = np.asarray(yields, dtype=float)
    top = yields.shape[0] - 1 if n_max is None else min(n_max, yields.shape[0] - 1)
    n = np.arange(top + 1)
    w = poisson.pmf(n, mu)
    return np.tensordot(w, yields[: top + 1], axes=(0, 0))
