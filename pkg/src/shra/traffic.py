"""Device population and activation sampling, reproducible from a seed.

Per slot the active-device count is drawn from the configured arrival
model (Poisson, fixed, or a recorded trace), positions are placed
uniformly by area over the cell disk, and each device gets its annulus
index, small-scale fading gain, and service class.  All randomness flows
through an explicitly passed numpy Generator so identical seeds give
identical device streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import CellGeometry, ta_indices
from .protocol import Device

ARRIVAL_MODELS = ("poisson", "fixed", "trace")
FADING_MODELS = ("constant", "uniform")


class TraceExhausted(RuntimeError):
    """Raised when a trace-driven run asks for a slot past the trace end."""


@dataclass(frozen=True)
class TrafficConfig:
    geometry: CellGeometry
    arrival_model: str = "poisson"
    rate: float = 3.0                  # Poisson mean
    count: int = 0                     # fixed-model active devices per slot
    trace: tuple = ()                  # trace-model counts, one per slot
    urllc_fraction: float = 0.0
    fading_model: str = "constant"
    seed: int | None = None

    def __post_init__(self):
        if self.arrival_model not in ARRIVAL_MODELS:
            raise ValueError(f"unknown arrival model {self.arrival_model!r}")
        if self.arrival_model == "poisson" and self.rate <= 0:
            raise ValueError("poisson rate must be positive")
        if self.arrival_model == "fixed" and self.count < 0:
            raise ValueError("fixed count must be nonnegative")
        if not 0.0 <= self.urllc_fraction <= 1.0:
            raise ValueError("urllc_fraction must lie in [0, 1]")
        if self.fading_model not in FADING_MODELS:
            raise ValueError(f"unknown fading model {self.fading_model!r}")


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def draw_count(config: TrafficConfig, slot: int, rng: np.random.Generator) -> int:
    """Active-device count for one slot under the configured arrival model."""
    if config.arrival_model == "poisson":
        return int(rng.poisson(config.rate))
    if config.arrival_model == "fixed":
        return config.count
    if slot >= len(config.trace):
        raise TraceExhausted(
            f"trace has {len(config.trace)} slots, slot {slot} requested"
        )
    return int(config.trace[slot])


def sample_activity(config: TrafficConfig, slot: int, rng: np.random.Generator):
    """Array form of one slot's active population.

    Returns (distances, annuli, fading, is_urllc); the draw order is
    fixed (count, positions, fading if random, class if mixed) so object
    and array callers consume the generator identically.
    """
    n = draw_count(config, slot, rng)
    radius = config.geometry.radius_m
    distances = radius * np.sqrt(rng.random(n))
    annuli = ta_indices(distances, config.geometry)
    if config.fading_model == "uniform":
        fading = rng.random(n)
    else:
        fading = np.ones(n)
    if config.urllc_fraction > 0.0:
        is_urllc = rng.random(n) < config.urllc_fraction
    else:
        is_urllc = np.zeros(n, dtype=bool)
    return distances, annuli, fading, is_urllc


def sample_active(config: TrafficConfig, slot: int, rng: np.random.Generator) -> list[Device]:
    """One slot's active device set, positions uniform by area over the disk."""
    distances, annuli, fading, is_urllc = sample_activity(config, slot, rng)
    return [
        Device(
            id=i,
            distance_m=float(distances[i]),
            annulus=int(annuli[i]),
            device_class="urllc" if is_urllc[i] else "massive",
            fading=float(fading[i]),
            state="active",
        )
        for i in range(len(distances))
    ]


def generate_training_traces(config: TrafficConfig, n_slots: int, window: int):
    """Per-slot active counts plus sliding (window, next-count) training pairs."""
    if n_slots <= window:
        raise ValueError(f"need more than window={window} slots, got {n_slots}")
    rng = make_rng(config.seed)
    counts = np.array(
        [draw_count(config, slot, rng) for slot in range(n_slots)], dtype=np.int64
    )
    pairs = [
        (counts[i : i + window].copy(), int(counts[i + window]))
        for i in range(n_slots - window)
    ]
    return counts, pairs


def load_trace(path) -> tuple:
    """Read a trace file: one integer active count per line."""
    counts = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                counts.append(int(line))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: not an integer: {line!r}") from None
    return tuple(counts)


def save_trace(counts, path) -> None:
    with open(path, "w") as fh:
        for c in counts:
            fh.write(f"{int(c)}\n")
