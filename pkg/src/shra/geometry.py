"""Cell partitioning into timing-advance annuli.

The cell is a disk of radius R around the base station, sliced into
concentric rings ("annuli") indexed by the quantized round-trip distance.
A device at distance d belongs to annulus

    j = floor(2*d / quantization_unit) + 1

so each ring is quantization_unit/2 wide (the outermost ring may be
truncated at the cell edge).  Devices in annulus j send their preamble on
subcarrier 262 + j, which is what lets the receiver tell same-preamble
devices in different rings apart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

BASE_SUBCARRIER = 262


@dataclass(frozen=True)
class CellGeometry:
    """Cell radius plus the round-trip distance quantization unit, in meters."""

    radius_m: float
    quantization_unit_m: float = 157.0
    base_subcarrier: int = BASE_SUBCARRIER

    def __post_init__(self):
        if self.radius_m <= 0:
            raise ValueError(f"radius_m must be positive, got {self.radius_m}")
        if self.quantization_unit_m <= 0:
            raise ValueError(
                f"quantization_unit_m must be positive, got {self.quantization_unit_m}"
            )

    @property
    def annulus_count(self) -> int:
        """Number of annuli needed to cover distances 0..radius."""
        return math.floor(2.0 * self.radius_m / self.quantization_unit_m) + 1

    @property
    def annulus_width_m(self) -> float:
        return self.quantization_unit_m / 2.0


def ta_index(distance_m: float, geometry: CellGeometry) -> int:
    """Map a device's distance from the base station to its 1-based annulus index.

    Raises ValueError for distances outside [0, radius].
    """
    if not 0.0 <= distance_m <= geometry.radius_m:
        raise ValueError(
            f"distance {distance_m} m outside cell of radius {geometry.radius_m} m"
        )
    return math.floor(2.0 * distance_m / geometry.quantization_unit_m) + 1


def ta_indices(distances_m: np.ndarray, geometry: CellGeometry) -> np.ndarray:
    """Vectorized ta_index for an array of in-cell distances."""
    d = np.asarray(distances_m, dtype=float)
    if d.size and (d.min() < 0.0 or d.max() > geometry.radius_m):
        raise ValueError("distances outside cell")
    return np.floor(2.0 * d / geometry.quantization_unit_m).astype(np.int64) + 1


def subcarrier_for_annulus(j: int) -> int:
    """Subcarrier index 262 + j carrying annulus j's preamble transmissions."""
    if j < 1:
        raise ValueError(f"annulus index must be >= 1, got {j}")
    return BASE_SUBCARRIER + j
