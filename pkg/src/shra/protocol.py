"""Slot-level random access engines.

Two contention engines run one access cycle per slot:

* conventional 4-step access: every active device picks one of G
  preambles; a preamble chosen by exactly one device succeeds, any
  multiply-chosen preamble is a collision and all its devices fail.

* smart hybrid access: devices additionally signal their annulus by
  subcarrier, so the receiver resolves (preamble, annulus) cells.  Each
  singly-occupied cell gets its own RAR and resource block; its device
  answers on that block at the strongest power level.  A device whose
  cell collided but whose preamble earned RARs elsewhere gambles on a
  random one of those blocks at a random power level, and the block is
  separated by successive interference cancellation.  When the
  predicted active count falls short of the true one the multi-user
  detection parameters are inadequate and the random-power gamblers all
  fail; dedicated sole occupants survive.

Latency-critical devices bypass contention entirely through a reserved,
pre-assigned preamble pool (two message exchanges instead of four).

Engines are deterministic given the passed generator; the array core is
shared between the per-device object API and the sweep harness.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import CellGeometry
from .noma import PowerLevelSet, sic_scan
from .signal import (
    CorrelationOutput,
    NoiseModel,
    PreambleSet,
    PreambleTransmission,
    correlate_all,
    detect,
    detection_threshold,
    synthesize_received,
)

# per-device cycle dispositions
CONNECTED_DEDICATED = 0   # own (preamble, annulus) cell had a RAR; decoded at top power
CONNECTED_CONTENTION = 1  # won a random block/power gamble through SIC
FAIL_NO_RAR = 2           # preamble earned no RAR in any annulus
FAIL_SIC = 3              # msg3 sent but not decoded (level collision or SINR)
FAIL_PREDICTION = 4       # decoded, then voided by underestimated load
FAIL_PREAMBLE_COLLISION = 5  # conventional scheme msg1 collision

DISPOSITION_NAMES = {
    CONNECTED_DEDICATED: "connected_dedicated",
    CONNECTED_CONTENTION: "connected_contention",
    FAIL_NO_RAR: "fail_no_rar",
    FAIL_SIC: "fail_sic",
    FAIL_PREDICTION: "fail_prediction",
    FAIL_PREAMBLE_COLLISION: "fail_preamble_collision",
}

CONTENTION_EXCHANGES = 4
CONTENTION_FREE_EXCHANGES = 2


@dataclass
class Device:
    id: int
    distance_m: float
    annulus: int
    device_class: str = "massive"  # "massive" or "urllc"
    fading: float = 1.0
    state: str = "idle"


@dataclass(frozen=True)
class Rar:
    """Random access response for one singly-occupied (preamble, annulus) cell."""

    preamble_id: int
    ta_index: int
    resource_block: int
    predicted_active: int
    detection_levels: int
    mcs_tag: str = "adaptive"


@dataclass
class SlotOutcome:
    slot: int
    n_active: int
    n_success: int = 0
    n_preamble_collisions: int = 0
    n_sic_failures: int = 0
    n_prediction_failures: int = 0
    n_urllc_success: int = 0
    n_deferred: int = 0
    n_dropped_rars: int = 0
    message_exchanges: int = CONTENTION_EXCHANGES
    dispositions: dict = field(default_factory=dict)  # device id -> disposition name


def combine_outcomes(a: SlotOutcome, b: SlotOutcome) -> SlotOutcome:
    """Sum two outcome fragments of the same slot (e.g. contention + urllc)."""
    if a.slot != b.slot:
        raise ValueError(f"cannot combine outcomes of slots {a.slot} and {b.slot}")
    merged = SlotOutcome(slot=a.slot, n_active=a.n_active + b.n_active)
    for name in (
        "n_success",
        "n_preamble_collisions",
        "n_sic_failures",
        "n_prediction_failures",
        "n_urllc_success",
        "n_deferred",
        "n_dropped_rars",
    ):
        setattr(merged, name, getattr(a, name) + getattr(b, name))
    merged.dispositions = {**a.dispositions, **b.dispositions}
    return merged


class ResourceAllocator:
    """Hands out resource-block indices, optionally up to a finite budget."""

    def __init__(self, budget: int | None = None):
        if budget is not None and budget < 0:
            raise ValueError("budget must be nonnegative")
        self.budget = budget
        self.next_block = 0
        self.dropped = 0

    def allocate(self) -> int | None:
        if self.budget is not None and self.next_block >= self.budget:
            self.dropped += 1
            return None
        block = self.next_block
        self.next_block += 1
        return block


def build_rars(occupancy, predicted_active: int, allocator: ResourceAllocator,
               detection_levels: int = 3) -> list[Rar]:
    """One RAR with a fresh resource block per singly-occupied cell.

    ``occupancy`` is an iterable of (preamble, annulus, multiplicity)
    triples; entries with multiplicity != 1 get no RAR.  When the
    allocator budget runs out the surplus cells are dropped and counted
    on ``allocator.dropped``.
    """
    rars = []
    for s, j, k in sorted(occupancy):
        if k != 1:
            continue
        block = allocator.allocate()
        if block is None:
            continue
        rars.append(
            Rar(
                preamble_id=s,
                ta_index=j,
                resource_block=block,
                predicted_active=predicted_active,
                detection_levels=detection_levels,
            )
        )
    return rars


def _require_contention_devices(devices):
    for d in devices:
        if d.device_class != "massive":
            raise ValueError(
                f"device {d.id} is {d.device_class!r}; only massive-class devices "
                "enter the contention path"
            )


def run_slot_conventional(devices, preamble_count: int,
                          rng: np.random.Generator, slot: int = 0,
                          msg3_collision_model: bool = False) -> SlotOutcome:
    """One conventional 4-step cycle: singleton preambles win, collisions lose.

    With ``msg3_collision_model`` the same devices fail, but at the
    connection-request stage (the receiver answers a collided preamble
    with one RAR and the copies clash on the shared uplink block); the
    success counts are identical either way.
    """
    if preamble_count < 1:
        raise ValueError("need at least one preamble")
    _require_contention_devices(devices)

    n = len(devices)
    outcome = SlotOutcome(slot=slot, n_active=n)
    if n == 0:
        return outcome

    picks = rng.integers(0, preamble_count, size=n)
    per_preamble = np.bincount(picks, minlength=preamble_count)
    success = per_preamble[picks] == 1

    outcome.n_success = int(success.sum())
    outcome.n_preamble_collisions = int((per_preamble >= 2).sum())
    fail_name = "fail_msg3_collision" if msg3_collision_model else \
        DISPOSITION_NAMES[FAIL_PREAMBLE_COLLISION]
    for dev, ok in zip(devices, success):
        dev.state = "connected" if ok else "failed"
        outcome.dispositions[dev.id] = "connected" if ok else fail_name
    return outcome


def shra_cycle_arrays(
    preamble_picks: np.ndarray,
    annuli: np.ndarray,
    n_preambles: int,
    n_annuli: int,
    levels: PowerLevelSet,
    predicted_active: int,
    rng: np.random.Generator,
    rar_cells: np.ndarray | None = None,
    noise_power: float = 1.0,
    collision_policy: str = "abort",
    prediction_failure_all: bool = False,
    resource_budget: int | None = None,
):
    """Vectorized smart hybrid cycle over parallel device arrays.

    ``preamble_picks`` and ``annuli`` are 1-based.  ``rar_cells``, when
    given, is the sorted array of cell ids ((s-1)*n_annuli + j-1) that
    received a RAR (e.g. from signal-level detection); otherwise ideal
    detection derives it from the true occupancy.  Returns
    (status, n_preamble_collisions, n_dropped_rars) with one disposition
    code per device.
    """
    n = preamble_picks.size
    status = np.full(n, FAIL_NO_RAR, dtype=np.int8)
    cell = (preamble_picks.astype(np.int64) - 1) * n_annuli + (annuli.astype(np.int64) - 1)

    occupied_cells, counts = np.unique(cell, return_counts=True)
    n_collisions = int((counts >= 2).sum())

    if rar_cells is None:
        rar_cells = occupied_cells[counts == 1]
    else:
        rar_cells = np.asarray(rar_cells, dtype=np.int64)

    n_dropped = 0
    if resource_budget is not None and rar_cells.size > resource_budget:
        n_dropped = int(rar_cells.size - resource_budget)
        rar_cells = rar_cells[:resource_budget]

    n_blocks = rar_cells.size
    if n == 0 or n_blocks == 0:
        return status, n_collisions, n_dropped

    # dedicated path: the device's own cell has a RAR
    pos = np.searchsorted(rar_cells, cell)
    in_range = pos < n_blocks
    matched = np.zeros(n, dtype=bool)
    matched[in_range] = rar_cells[pos[in_range]] == cell[in_range]
    own_block = pos  # valid where matched

    # contention path: no TA match, but the preamble has RARs in other annuli
    rar_preambles = rar_cells // n_annuli  # 0-based, sorted
    block_start = np.searchsorted(rar_preambles, np.arange(n_preambles))
    block_stop = np.searchsorted(rar_preambles, np.arange(n_preambles), side="right")
    blocks_per_preamble = block_stop - block_start

    pick0 = preamble_picks.astype(np.int64) - 1
    contender = ~matched & (blocks_per_preamble[pick0] > 0)

    n_contenders = int(contender.sum())
    n_levels = levels.count
    if n_contenders:
        c_pick0 = pick0[contender]
        choice = rng.integers(0, blocks_per_preamble[c_pick0])
        contender_block = block_start[c_pick0] + choice
        contender_level = rng.integers(1, n_levels + 1, size=n_contenders)
    else:
        contender_block = np.empty(0, dtype=np.int64)
        contender_level = np.empty(0, dtype=np.int64)

    if n_blocks == 0:
        return status, n_collisions, n_dropped

    # per-block power-level occupancy: dedicated senders at level 1
    occupancy = np.zeros((n_blocks, n_levels), dtype=np.int64)
    np.add.at(occupancy, (own_block[matched], 0), 1)
    np.add.at(occupancy, (contender_block, contender_level - 1), 1)

    decoded_levels = sic_scan(
        occupancy, levels.levels, levels.gamma,
        noise_power=noise_power, collision_policy=collision_policy,
    )

    matched_ok = decoded_levels[own_block[matched], 0]
    contender_ok = decoded_levels[contender_block, contender_level - 1]

    prediction_short = predicted_active < n
    if prediction_short and prediction_failure_all:
        matched_ok = np.zeros_like(matched_ok)
        contender_ok = np.zeros_like(contender_ok)

    status[matched] = np.where(matched_ok, CONNECTED_DEDICATED, FAIL_SIC)
    if prediction_short and prediction_failure_all:
        status[matched] = np.where(
            decoded_levels[own_block[matched], 0], FAIL_PREDICTION, FAIL_SIC
        )

    contender_status = np.where(contender_ok, CONNECTED_CONTENTION, FAIL_SIC)
    if prediction_short:
        contender_status = np.where(contender_ok, FAIL_PREDICTION, FAIL_SIC)
    status[contender] = contender_status

    return status, n_collisions, n_dropped


def _ideal_occupancy(picks, annuli):
    """True (preamble, annulus, multiplicity) triples, sorted."""
    pairs = {}
    for s, j in zip(picks, annuli):
        pairs[(int(s), int(j))] = pairs.get((int(s), int(j)), 0) + 1
    return [(s, j, k) for (s, j), k in sorted(pairs.items())]


def run_slot_shra(
    devices,
    preambles: PreambleSet,
    geometry: CellGeometry,
    levels: PowerLevelSet,
    predicted_active: int,
    rng: np.random.Generator,
    detection: str = "ideal",
    noise: NoiseModel = NoiseModel(0.0),
    mean_channel_gain: float = 1.0,
    threshold: float | None = None,
    collision_policy: str = "abort",
    prediction_failure_all: bool = False,
    resource_budget: int | None = None,
    slot: int = 0,
) -> SlotOutcome:
    """One smart hybrid cycle over a device list.

    ``detection`` picks the receiver fidelity: "ideal" hands the true
    cell occupancy to the RAR builder, "signal" synthesizes the
    superposed preamble waveforms and runs correlation detection.
    """
    if detection not in ("ideal", "signal"):
        raise ValueError(f"unknown detection mode {detection!r}")
    _require_contention_devices(devices)

    n = len(devices)
    outcome = SlotOutcome(slot=slot, n_active=n)
    if n == 0:
        return outcome

    picks = rng.integers(1, preambles.count + 1, size=n)
    annuli = np.array([d.annulus for d in devices], dtype=np.int64)
    for dev in devices:
        dev.state = "msg1_sent"

    if detection == "ideal":
        occupancy = _ideal_occupancy(picks, annuli)
    else:
        transmissions = [
            PreambleTransmission(
                device_id=d.id,
                preamble_index=int(picks[i]),
                annulus=d.annulus,
                small_scale_fading=d.fading,
            )
            for i, d in enumerate(devices)
        ]
        received = synthesize_received(transmissions, preambles, geometry, noise, rng)
        correlations = correlate_all(received, preambles, geometry)
        if threshold is None:
            threshold = detection_threshold(preambles.length, mean_channel_gain)
        occupancy = detect(correlations, threshold, preambles.length, mean_channel_gain)

    allocator = ResourceAllocator(budget=resource_budget)
    rars = build_rars(occupancy, predicted_active, allocator,
                      detection_levels=levels.count)
    rar_cells = np.array(
        [(r.preamble_id - 1) * geometry.annulus_count + (r.ta_index - 1) for r in rars],
        dtype=np.int64,
    )

    status, n_collisions, _ = shra_cycle_arrays(
        picks,
        annuli,
        preambles.count,
        geometry.annulus_count,
        levels,
        predicted_active,
        rng,
        rar_cells=rar_cells,
        noise_power=noise_power_of(noise),
        collision_policy=collision_policy,
        prediction_failure_all=prediction_failure_all,
    )

    outcome.n_preamble_collisions = n_collisions
    outcome.n_dropped_rars = allocator.dropped
    outcome.n_success = int((status <= CONNECTED_CONTENTION).sum())
    outcome.n_sic_failures = int((status == FAIL_SIC).sum())
    outcome.n_prediction_failures = int((status == FAIL_PREDICTION).sum())
    for dev, code in zip(devices, status):
        dev.state = "connected" if code <= CONNECTED_CONTENTION else "failed"
        outcome.dispositions[dev.id] = DISPOSITION_NAMES[int(code)]
    return outcome


def noise_power_of(noise: NoiseModel) -> float:
    """msg3 decoding noise floor; the power ladder is normalized to 1."""
    return 1.0


def contention_free_access(urllc_devices, reserved_preambles,
                           rng: np.random.Generator | None = None,
                           slot: int = 0) -> SlotOutcome:
    """Two-step access for latency-critical devices on a reserved pool.

    Each device is pre-assigned a unique reserved preamble (the pool must
    be disjoint from the contention preambles); devices beyond the pool
    size are deferred to a later slot, never silently dropped.
    """
    pool = list(reserved_preambles)
    if len(set(pool)) != len(pool):
        raise ValueError("reserved preamble pool contains duplicates")
    for d in urllc_devices:
        if d.device_class != "urllc":
            raise ValueError(f"device {d.id} is not urllc-class")

    outcome = SlotOutcome(
        slot=slot,
        n_active=len(urllc_devices),
        message_exchanges=CONTENTION_FREE_EXCHANGES,
    )
    for i, dev in enumerate(urllc_devices):
        if i < len(pool):
            dev.state = "connected"
            outcome.n_success += 1
            outcome.n_urllc_success += 1
            outcome.dispositions[dev.id] = "connected_urllc"
        else:
            dev.state = "deferred"
            outcome.n_deferred += 1
            outcome.dispositions[dev.id] = "deferred"
    return outcome
