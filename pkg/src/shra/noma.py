"""Receive-power ladder and successive interference cancellation.

Uplink messages on a shared resource block arrive at one of A discrete
receive-power targets

    a_i = gamma * (gamma + 1)**(A - i),   i = 1..A,  a_1 > a_2 > ... > a_A

with noise power normalized to 1.  The ladder telescopes: the power at
level i equals gamma times (sum of all lower level powers + noise), so a
fully laddered block decodes stage by stage at SINR exactly gamma.

The decoder scans levels from the highest power down.  At each occupied
level it decodes the sole occupant when its SINR clears gamma, where the
interference term is the sum of the *occupied* level powers below the
current one (a level contributes its nominal power once, however many
messages sit on it; duplicates on one level are indistinguishable
superpositions of the same target power, not separable signals).  Two or
more messages on one level are a power-level collision: none of them can
be detected, and by default the whole remaining chain is abandoned.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SINR_TOLERANCE = 1e-9


def power_levels(gamma: float, count: int) -> "PowerLevelSet":
    """Build the receive-power ladder for target SINR ``gamma`` and ``count`` levels."""
    return PowerLevelSet(gamma=float(gamma), count=int(count))


@dataclass(frozen=True)
class PowerLevelSet:
    """The A receive-power targets, strictly decreasing, unit noise power."""

    gamma: float
    count: int
    levels: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.count < 1:
            raise ValueError(f"level count must be >= 1, got {self.count}")
        i = np.arange(1, self.count + 1)
        levels = self.gamma * (self.gamma + 1.0) ** (self.count - i)
        levels.setflags(write=False)
        object.__setattr__(self, "levels", levels)

    def level(self, index: int) -> float:
        """Power of 1-based level ``index`` (1 is the strongest)."""
        if not 1 <= index <= self.count:
            raise ValueError(f"level index {index} outside 1..{self.count}")
        return float(self.levels[index - 1])


@dataclass(frozen=True)
class UplinkMessage:
    device_id: int
    resource_block: int
    power_level_index: int  # 1-based, 1 = strongest


@dataclass
class SicResult:
    decoded: list  # device ids in decode order (strongest level first)
    failed: list   # device ids, input order


def sic_scan(
    counts: np.ndarray,
    levels: np.ndarray,
    gamma: float,
    noise_power: float = 1.0,
    collision_policy: str = "abort",
) -> np.ndarray:
    """Run the SIC level scan over many resource blocks at once.

    counts: (n_blocks, A) integer occupancy per power level.
    Returns a (n_blocks, A) bool array marking the levels whose sole
    occupant was decoded.  ``collision_policy`` is "abort" (a collision
    kills the rest of that block's chain) or "skip" (the collided level
    fails but lower levels are still attempted, with the collided level
    still counted as interference).
    """
    if collision_policy not in ("abort", "skip"):
        raise ValueError(f"unknown collision_policy {collision_policy!r}")
    counts = np.asarray(counts)
    n_blocks, n_levels = counts.shape
    if n_levels != len(levels):
        raise ValueError("occupancy width does not match the level count")

    occupied = counts > 0
    weighted = occupied * levels[np.newaxis, :]
    # interference below level i = sum of occupied level powers strictly below it
    tail = np.cumsum(weighted[:, ::-1], axis=1)[:, ::-1] - weighted

    decoded = np.zeros_like(occupied)
    alive = np.ones(n_blocks, dtype=bool)
    for i in range(n_levels):
        cnt = counts[:, i]
        if collision_policy == "abort":
            alive &= cnt < 2
        sole = alive & (cnt == 1)
        sinr_ok = levels[i] / (tail[:, i] + noise_power) >= gamma - SINR_TOLERANCE
        decoded[:, i] = sole & sinr_ok
    return decoded


def sic_decode(
    messages: Sequence[UplinkMessage],
    levels: PowerLevelSet,
    noise_power: float = 1.0,
    collision_policy: str = "abort",
) -> SicResult:
    """Decode the messages sharing one resource block, strongest level first."""
    messages = list(messages)
    if not messages:
        return SicResult(decoded=[], failed=[])
    blocks = {m.resource_block for m in messages}
    if len(blocks) > 1:
        raise ValueError(f"messages span multiple resource blocks: {sorted(blocks)}")
    for m in messages:
        if not 1 <= m.power_level_index <= levels.count:
            raise ValueError(
                f"power level {m.power_level_index} outside 1..{levels.count}"
            )

    counts = np.zeros((1, levels.count), dtype=np.int64)
    for m in messages:
        counts[0, m.power_level_index - 1] += 1
    decoded_levels = sic_scan(
        counts, levels.levels, levels.gamma,
        noise_power=noise_power, collision_policy=collision_policy,
    )[0]

    decoded = [
        m.device_id
        for i in range(levels.count)
        if decoded_levels[i]
        for m in messages
        if m.power_level_index == i + 1
    ]
    decoded_set = set(decoded)
    failed = [m.device_id for m in messages if m.device_id not in decoded_set]
    return SicResult(decoded=decoded, failed=failed)
