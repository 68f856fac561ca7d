"""Capacity-outage probability table on a fixed MW grid.

The distribution of total available capacity of independent two-state units
is built by unit-by-unit convolution.  Cumulative forms support O(1)
per-hour queries of loss probability P(available < r) and expected shortfall
E[(r - available)+].
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["CapacityDistribution", "outage_distribution"]


@dataclass
class CapacityDistribution:
    """Distribution of available capacity on the grid k*step, k = 0..kmax."""

    step: float
    pmf: np.ndarray
    cdf_pad: np.ndarray   # cdf_pad[j] = P(available <= (j-1)*step), cdf_pad[0] = 0
    wsum_pad: np.ndarray  # running sum of value*probability, same padding

    @property
    def kmax(self) -> int:
        return self.pmf.size - 1

    def loss_stats(self, residual: np.ndarray):
        """Per-hour loss probability and expected shortfall against ``residual`` MW.

        Strict comparison: a shortfall occurs when available capacity is
        strictly below the residual demand.
        """
        r = np.asarray(residual, dtype=np.float64)
        cnt = np.ceil(r / self.step - 1e-9).astype(np.int64)
        cnt = np.clip(cnt, 0, self.kmax + 1)
        p_short = self.cdf_pad[cnt]
        e_short = np.maximum(r, 0.0) * p_short - self.wsum_pad[cnt]
        return p_short, np.maximum(e_short, 0.0)


def outage_distribution(capacities, availabilities, step: float = 1.0) -> CapacityDistribution:
    """Convolve independent two-state units into a capacity distribution.

    Unit capacities are rounded to the nearest grid point; with a 1 MW step
    and integer capacities the table is exact.
    """
    if step <= 0:
        raise ValueError("step must be > 0")
    caps = np.rint(np.asarray(capacities, dtype=np.float64) / step).astype(np.int64)
    avail = np.asarray(availabilities, dtype=np.float64)
    if np.any((avail < 0) | (avail > 1)):
        raise ValueError("availabilities outside [0, 1]")
    kmax = int(caps.sum())
    dist = np.zeros(kmax + 1)
    dist[0] = 1.0
    top = 0
    for k, a in zip(caps, avail):
        k = int(k)
        shifted = np.zeros(top + k + 1)
        shifted[k:top + k + 1] = dist[:top + 1] * a
        dist[:top + 1] *= 1.0 - a
        dist[:top + k + 1] += shifted
        top += k
    cdf = np.cumsum(dist)
    values = np.arange(kmax + 1, dtype=np.float64) * step
    wsum = np.cumsum(dist * values)
    return CapacityDistribution(
        step=float(step),
        pmf=dist,
        cdf_pad=np.concatenate([[0.0], cdf]),
        wsum_pad=np.concatenate([[0.0], wsum]),
    )
