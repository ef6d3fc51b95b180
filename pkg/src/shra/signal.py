"""Zadoff-Chu preambles and the per-annulus received-signal model.

Each of the G preambles is a constant-amplitude Zadoff-Chu sequence of odd
prime length D_p, one distinct root per preamble.  Devices in annulus j
transmit on subcarrier 262 + j, so the receiver sees one superposed
sequence per annulus:

    r_j = sum_f  sqrt(beta_f * psi_f) * h_f * zeta_u(f)  +  noise

with i.i.d. complex Gaussian noise of the configured variance per sample.
Cross-correlating r_j against each normalized preamble yields a peak of
magnitude sqrt(D_p) * sum of channel gains for the devices that picked
that preamble, which is thresholded into per-(preamble, annulus) activity
and an amplitude-based multiplicity estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import CellGeometry, subcarrier_for_annulus


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in range(2, int(math.isqrt(n)) + 1):
        if n % p == 0:
            return False
    return True


def zadoff_chu(root: int, length: int) -> np.ndarray:
    """Zadoff-Chu sequence exp(-i*pi*root*n*(n+1)/length), n = 0..length-1.

    ``length`` must be an odd prime and ``root`` in 1..length-1 (hence
    coprime to it).  Every sample has unit magnitude; cyclic
    autocorrelation is zero at all nonzero shifts, and two sequences with
    distinct roots correlate with magnitude sqrt(length).
    """
    if not _is_prime(length) or length == 2:
        raise ValueError(f"length must be an odd prime, got {length}")
    if not 1 <= root < length:
        raise ValueError(f"root must be in 1..{length - 1}, got {root}")
    n = np.arange(length, dtype=np.float64)
    phase = -np.pi * root * n * (n + 1.0) / length
    return np.exp(1j * phase)


def add_cyclic_prefix(sequence: np.ndarray, cp_length: int) -> np.ndarray:
    """Prepend the last ``cp_length`` samples as a cyclic prefix."""
    if cp_length < 0:
        raise ValueError("cp_length must be nonnegative")
    if cp_length == 0:
        return sequence
    if cp_length > len(sequence):
        raise ValueError("cp_length longer than the sequence")
    return np.concatenate([sequence[-cp_length:], sequence])


@dataclass(frozen=True)
class PreambleSet:
    """The G Zadoff-Chu preambles, one distinct root per preamble."""

    sequences: np.ndarray  # (G, D_p) complex
    roots: tuple
    cp_length: int = 0

    def __post_init__(self):
        if self.sequences.ndim != 2 or self.sequences.shape[0] < 1:
            raise ValueError("need at least one preamble sequence")
        if len(set(self.roots)) != len(self.roots):
            raise ValueError("preamble roots must be pairwise distinct")
        self.sequences.setflags(write=False)

    @property
    def count(self) -> int:
        return self.sequences.shape[0]

    @property
    def length(self) -> int:
        return self.sequences.shape[1]

    def sequence(self, preamble_index: int) -> np.ndarray:
        """The sequence for a 1-based preamble index."""
        if not 1 <= preamble_index <= self.count:
            raise ValueError(f"preamble index {preamble_index} outside 1..{self.count}")
        return self.sequences[preamble_index - 1]


def make_preamble_set(count: int, length: int = 839, cp_length: int = 0) -> PreambleSet:
    """Generate ``count`` preambles of prime ``length`` with roots 1..count."""
    if count < 1:
        raise ValueError("preamble count must be >= 1")
    if count >= length:
        raise ValueError(f"at most {length - 1} distinct roots exist for length {length}")
    roots = tuple(range(1, count + 1))
    sequences = np.stack([zadoff_chu(r, length) for r in roots])
    return PreambleSet(sequences=sequences, roots=roots, cp_length=cp_length)


@dataclass(frozen=True)
class PreambleTransmission:
    """One device's preamble transmission and its channel state."""

    device_id: int
    preamble_index: int          # 1-based, u(f)
    annulus: int                 # 1-based TA index
    tx_power: float = 1.0        # beta
    large_scale_fading: float = 1.0  # psi; sqrt(beta*psi) = 1 is the usual normalization
    small_scale_fading: float = 1.0  # h in [0, 1]

    @property
    def amplitude(self) -> float:
        return math.sqrt(self.tx_power * self.large_scale_fading) * self.small_scale_fading


@dataclass(frozen=True)
class NoiseModel:
    """Complex Gaussian noise with per-sample variance sigma^2."""

    variance: float = 0.0

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("noise variance must be nonnegative")


@dataclass(frozen=True)
class CorrelationOutput:
    value: complex
    preamble_index: int
    annulus: int


def synthesize_received(
    transmissions: Sequence[PreambleTransmission],
    preambles: PreambleSet,
    geometry: CellGeometry,
    noise: NoiseModel = NoiseModel(0.0),
    rng: np.random.Generator | None = None,
) -> dict[int, np.ndarray]:
    """Superpose the slot's preamble transmissions per annulus subcarrier.

    Returns {subcarrier index: received sequence}; every annulus of the
    cell gets an entry so that noise-only subcarriers are represented too.
    """
    if noise.variance > 0 and rng is None:
        raise ValueError("a random generator is required for nonzero noise")

    n_annuli = geometry.annulus_count
    length = preambles.length
    received = {
        subcarrier_for_annulus(j): np.zeros(length, dtype=complex)
        for j in range(1, n_annuli + 1)
    }
    for tx in transmissions:
        if not 1 <= tx.annulus <= n_annuli:
            raise ValueError(f"annulus {tx.annulus} outside 1..{n_annuli}")
        seq = preambles.sequence(tx.preamble_index)  # validates the index
        received[subcarrier_for_annulus(tx.annulus)] += tx.amplitude * seq
    if noise.variance > 0:
        sigma = math.sqrt(noise.variance / 2.0)
        for sc in received:
            received[sc] += sigma * (
                rng.standard_normal(length) + 1j * rng.standard_normal(length)
            )
    return received


def correlate(received: np.ndarray, preamble: np.ndarray) -> complex:
    """Inner product of the received signal with the normalized preamble.

    For a noiseless single transmitter with channel gain h the magnitude
    is sqrt(D_p) * h.
    """
    if len(received) != len(preamble):
        raise ValueError(
            f"length mismatch: received {len(received)} vs preamble {len(preamble)}"
        )
    return complex(np.vdot(preamble, received) / np.linalg.norm(preamble))


def correlate_all(
    received: dict[int, np.ndarray],
    preambles: PreambleSet,
    geometry: CellGeometry,
) -> list[CorrelationOutput]:
    """Correlate every annulus subcarrier against every preamble."""
    outputs = []
    norm = math.sqrt(preambles.length)
    conj = preambles.sequences.conj()
    for j in range(1, geometry.annulus_count + 1):
        signal = received[subcarrier_for_annulus(j)]
        values = conj @ signal / norm
        outputs.extend(
            CorrelationOutput(value=complex(values[s]), preamble_index=s + 1, annulus=j)
            for s in range(preambles.count)
        )
    return outputs


def detection_threshold(preamble_length: int, mean_channel_gain: float = 1.0) -> float:
    """Default decision threshold: half the expected single-device peak."""
    return 0.5 * math.sqrt(preamble_length) * mean_channel_gain


def detect(
    correlations: Sequence[CorrelationOutput],
    threshold: float,
    preamble_length: int,
    mean_channel_gain: float = 1.0,
) -> list[tuple[int, int, int]]:
    """Threshold correlation outputs into (preamble, annulus, multiplicity) triples.

    A pair is reported active when its correlation magnitude reaches
    ``threshold``; the multiplicity estimate divides the magnitude by the
    expected single-device peak sqrt(D_p) * mean_channel_gain and rounds,
    clamped to at least 1.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    peak = math.sqrt(preamble_length) * mean_channel_gain
    detections = []
    for corr in correlations:
        magnitude = abs(corr.value)
        if magnitude >= threshold:
            k_hat = max(1, round(magnitude / peak))
            detections.append((corr.preamble_index, corr.annulus, k_hat))
    return detections


def export_sequence_csv(sequence: np.ndarray, path) -> None:
    """Dump a complex sequence as real,imag rows for offline inspection."""
    with open(path, "w") as fh:
        fh.write("real,imag\n")
        for sample in sequence:
            fh.write(f"{sample.real:.17g},{sample.imag:.17g}\n")
