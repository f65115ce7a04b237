"""The two-party key distribution protocol.

Each round, Alice and Bob encode independent bits n, m in the phase of a
vacuum-one-photon entangled pair, keep one mode ("a1"/"b1"), send the other
("a2"/"b2") across the public channel, recombine what arrives with what they
stored on a second 50:50 splitter, and count photons in coincidence. A round
is accepted exactly when each side registers one photon; Alice's public
statement of which detector clicked then lets Bob reconstruct n.

Two tamper checks are modeled: announce-bit controls (Alice additionally
discloses n on a sacrificed accepted round) and destructive photon-count
controls (both parties skip recombination and compare direct photon counts
on stored and incoming modes against the exact one-photon-per-source
correlation).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import attacks as attacks_mod
from . import fock
from .attacks import Attack, AttackStrategy, EveRoundState, InterceptResendAttack
from .fock import FockState

ALICE_MODES = ("a1", "a2")  # (stored, traveling)
BOB_MODES = ("b1", "b2")

# Joint detected totals (alice, bob) reachable by the honest ideal protocol.
HONEST_COINCIDENCE_SUPPORT = frozenset({(1, 1), (2, 0), (0, 2)})

DETECTOR_KINDS = ("pnr", "threshold")


def random_bit(rng: np.random.Generator) -> int:
    """Fair ±1 bit (logic 1 <-> +1, logic 0 <-> -1)."""
    return 1 if rng.random() < 0.5 else -1


@dataclass(frozen=True)
class DeviceModel:
    """Source and detector imperfections for one party.

    p2 is the probability the source emits two photons instead of one;
    detectors are photon-number-resolving ("pnr") or binary ("threshold"),
    each photon surviving to detection independently with probability eta.
    """

    p2: float = 0.0
    detector_kind: str = "pnr"
    eta: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.p2 <= 1.0:
            raise ValueError(f"p2 must be in [0, 1], got {self.p2}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must be in [0, 1], got {self.eta}")
        if self.detector_kind not in DETECTOR_KINDS:
            raise ValueError(f"detector_kind must be one of {DETECTOR_KINDS}")


@dataclass(frozen=True)
class ControlOutcome:
    kind: str  # "announce-bit" | "photon-count-check"
    flagged: bool


@dataclass
class RoundRecord:
    """Everything that happened in one protocol round."""

    round_index: int
    n: int
    m: int
    alice_counts: Tuple[int, int]
    bob_counts: Tuple[int, int]
    accepted: bool
    announcement: Optional[int]  # detector index 1|2, present only when accepted
    inferred: Optional[int]
    control: Optional[ControlOutcome]
    eve_knows_n: bool
    photon_anomaly: bool
    eve: Optional[EveRoundState] = None  # simulator-side bookkeeping, not serialized

    def to_json_dict(self) -> dict:
        """Wire form, one JSON object per round."""
        return {
            "round": self.round_index,
            "n": self.n,
            "m": self.m,
            "alice_counts": list(self.alice_counts),
            "bob_counts": list(self.bob_counts),
            "accepted": self.accepted,
            "announcement": {1: "Da1", 2: "Da2"}.get(self.announcement),
            "inferred": self.inferred,
            "control_kind": self.control.kind if self.control else None,
            "control_flagged": self.control.flagged if self.control else None,
            "eve_knows_n": self.eve_knows_n,
            "photon_anomaly": self.photon_anomaly,
        }


@dataclass(frozen=True)
class SessionConfig:
    rounds: int
    seed: int
    attack: AttackStrategy = AttackStrategy()
    device_alice: DeviceModel = DeviceModel()
    device_bob: DeviceModel = DeviceModel()
    control_announce_fraction: float = 0.0
    control_count_fraction: float = 0.0

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")
        for name in ("control_announce_fraction", "control_count_fraction"):
            f = getattr(self, name)
            if not 0.0 <= f <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {f}")


def encoded_pair_state(bit: int, modes: Tuple[str, str], photons: int = 1) -> FockState:
    """Source path: inject `photons` on the bit's input port, then the splitter.

    bit +1 injects on the first port, -1 on the second. One photon yields the
    carrier (|01> + bit|10>)/sqrt(2); two photons yield
    (1/2)|20> + (bit/sqrt(2))|11> + (1/2)|02>, both in (stored, traveling)
    ket order.
    """
    if bit not in (-1, 1):
        raise ValueError(f"bit must be +1 or -1, got {bit}")
    if photons not in (1, 2):
        raise ValueError(f"source emits 1 or 2 photons, got {photons}")
    counts = [0, 0]
    counts[0 if bit == 1 else 1] = photons
    state = fock.basis_state(modes, counts)
    state = fock.apply_beam_splitter(state, modes[0], modes[1])
    if bit == -1 and photons == 1:
        # Fix the source's global phase: the canonical carrier has +1/sqrt(2)
        # on the traveling ket, the raw splitter output the opposite sign.
        state = FockState(state.registry, {occ: -a for occ, a in state.amplitudes.items()})
    return state


def source_photons(device: DeviceModel, rng: np.random.Generator) -> int:
    if device.p2 > 0.0 and rng.random() < device.p2:
        return 2
    return 1


def encode_bit(
    bit: int, modes: Tuple[str, str], device: DeviceModel, rng: np.random.Generator
) -> FockState:
    """Encode one bit with the party's source, sampling multiphoton emission."""
    return encoded_pair_state(bit, modes, source_photons(device, rng))


def infer_bit(alice_click: int, bob_click: int, m: int) -> int:
    """Bob's reconstruction of n from Alice's announced click and his own."""
    if alice_click not in (1, 2) or bob_click not in (1, 2):
        raise ValueError("clicks must be detector indices 1 or 2")
    if m not in (-1, 1):
        raise ValueError(f"m must be +1 or -1, got {m}")
    return m if alice_click == bob_click else -m


def detected_counts(
    true_counts: Tuple[int, int], device: DeviceModel, rng: np.random.Generator
) -> Tuple[int, int]:
    """What the party's detector pair reports for the given true photon counts."""
    if device.eta >= 1.0:
        det = true_counts
    else:
        det = tuple(int(rng.binomial(c, device.eta)) if c else 0 for c in true_counts)
    if device.detector_kind == "threshold":
        return tuple(1 if d > 0 else 0 for d in det)
    return det


def _single_click(reported: Tuple[int, int]) -> Optional[int]:
    """Detector index when the side registered exactly one photon/click."""
    if sum(reported) != 1:
        return None
    return 1 if reported[0] == 1 else 2


def channel_state(
    attack: Attack, n: int, m: int, na: int, nb: int, bits: tuple
) -> Tuple[FockState, str, str]:
    """Joint state after encoding and the adversary's channel action.

    Returns (state, rail arriving at Alice, rail arriving at Bob). Only valid
    for non-adaptive attacks; the adaptive strategy measures mid-round.
    """
    state = fock.tensor(
        encoded_pair_state(n, ALICE_MODES, na),
        encoded_pair_state(m, BOB_MODES, nb),
    )
    return attack.apply(state, bits)


def evolved_round_state(
    attack: Attack, n: int, m: int, na: int, nb: int, bits: tuple
) -> Tuple[FockState, str, str]:
    """Pre-measurement state after both recombination beam splitters."""
    state, to_alice, to_bob = channel_state(attack, n, m, na, nb, bits)
    state = fock.apply_beam_splitter(state, ALICE_MODES[0], to_alice)
    state = fock.apply_beam_splitter(state, BOB_MODES[0], to_bob)
    return state, to_alice, to_bob


def _eve_state(
    attack: Attack, bits: tuple, q: Optional[int], eve_counts: Dict[str, int], learned: Optional[int]
) -> Optional[EveRoundState]:
    if isinstance(attack, InterceptResendAttack):
        p = bits[0]
        if q is None and len(bits) > 1:
            q = bits[1]
        return EveRoundState(p=p, q=q, eve_counts=dict(eve_counts), learned_n=learned)
    if learned is not None:
        return EveRoundState(eve_counts=dict(eve_counts), learned_n=learned)
    return None


def run_round(
    cfg: SessionConfig,
    attack: Attack,
    index: int,
    rng: np.random.Generator,
    cache: Optional[dict] = None,
    count_control: Optional[bool] = None,
) -> RoundRecord:
    """Execute one protocol round under the configured adversary.

    The draw order on `rng` is fixed (control pre-commitment, bits, source
    emissions, adversary bits, measurements, detector losses, control
    selection), so a round is a pure function of (cfg, attack, index, seed).
    `cache` memoizes deterministic state evolution across rounds.
    """
    if cache is None:
        cache = {}
    if count_control is None:
        count_control = (
            cfg.control_count_fraction > 0.0 and rng.random() < cfg.control_count_fraction
        )
    n = random_bit(rng)
    m = random_bit(rng)
    na = source_photons(cfg.device_alice, rng)
    nb = source_photons(cfg.device_bob, rng)
    bits = attack.draw(rng)
    branch_q: Optional[int] = None

    if attack.adaptive:
        dist, to_alice, to_bob, eve_counts, branch_q = _adaptive_channel(
            attack, n, na, m, nb, bits, rng, cache, recombine=not count_control
        )
        measured_ports = ("a1", to_alice, "b1", to_bob)
        outcome = dist.sample(rng)
        counts = dict(zip(measured_ports, outcome))
    else:
        # The pre-measurement state is a pure function of the round's discrete
        # draws, so its readout distribution is memoized across rounds.
        tag = "channel" if count_control else "evolved"
        key = (tag, n, m, na, nb, bits)
        hit = cache.get(key)
        if hit is None:
            builder = channel_state if count_control else evolved_round_state
            state, to_alice, to_bob = builder(attack, n, m, na, nb, bits)
            if abs(state.norm() - 1.0) > fock.NORM_TOL:
                raise RuntimeError(
                    f"state norm {state.norm()} drifted past tolerance in round setup {key}"
                )
            ports = ("a1", to_alice, "b1", to_bob) + attack.eve_ports
            hit = (fock.outcome_distribution(state, ports), to_alice, to_bob)
            cache[key] = hit
        dist, to_alice, to_bob = hit
        outcome = dist.sample(rng)
        counts = dict(zip(dist.modes, outcome))
        eve_counts = {p: counts[p] for p in attack.eve_ports}

    if count_control:
        # Destructive check: no recombination, direct photon counts compared
        # across the channel. Each source emits exactly one photon (ideal
        # source), so stored + counterpart-received must total 1 per party.
        flagged = (
            counts["a1"] + counts[to_bob] != 1 or counts["b1"] + counts[to_alice] != 1
        )
        eve = _eve_state(attack, bits, branch_q, eve_counts, None)
        return RoundRecord(
            round_index=index,
            n=n,
            m=m,
            alice_counts=(counts["a1"], counts[to_alice]),
            bob_counts=(counts["b1"], counts[to_bob]),
            accepted=False,
            announcement=None,
            inferred=None,
            control=ControlOutcome("photon-count-check", flagged),
            eve_knows_n=False,
            photon_anomaly=False,
            eve=eve,
        )

    alice_rep = detected_counts((counts["a1"], counts[to_alice]), cfg.device_alice, rng)
    bob_rep = detected_counts((counts["b1"], counts[to_bob]), cfg.device_bob, rng)
    alice_res = _single_click(alice_rep)
    bob_res = _single_click(bob_rep)
    accepted = alice_res is not None and bob_res is not None
    inferred = infer_bit(alice_res, bob_res, m) if accepted else None

    control = None
    if accepted and cfg.control_announce_fraction > 0.0:
        if rng.random() < cfg.control_announce_fraction:
            control = ControlOutcome("announce-bit", flagged=(inferred != n))

    learned = attack.learn(bits, eve_counts, alice_res)
    eve = _eve_state(attack, bits, branch_q, eve_counts, learned)

    return RoundRecord(
        round_index=index,
        n=n,
        m=m,
        alice_counts=alice_rep,
        bob_counts=bob_rep,
        accepted=accepted,
        announcement=alice_res if accepted else None,
        inferred=inferred,
        control=control,
        eve_knows_n=learned is not None,
        photon_anomaly=(sum(alice_rep), sum(bob_rep)) not in HONEST_COINCIDENCE_SUPPORT,
        eve=eve,
    )


def _adaptive_channel(attack, n, na, m, nb, bits, rng, cache, recombine):
    """Devil-style channel: Eve measures her side, then chooses the resend."""
    p = bits[0]
    key1 = ("stage1", n, na, p)
    hit = cache.get(key1)
    if hit is None:
        state1 = attack.alice_side(encoded_pair_state(n, ALICE_MODES, na), p)
        hit = (state1, fock.outcome_distribution(state1, attack.eve_ports))
        cache[key1] = hit
    state1, dist1 = hit
    eve_outcome = dist1.sample(rng)
    eve_counts = dict(zip(attack.eve_ports, eve_outcome))
    content, branch_q = attack.resend(sum(eve_outcome), rng)
    to_alice, to_bob = "e2", "e4"
    key2 = ("stage2", n, na, p, eve_outcome, m, nb, branch_q, recombine)
    dist = cache.get(key2)
    if dist is None:
        ckey = ("collapsed", n, na, p, eve_outcome)
        collapsed = cache.get(ckey)
        if collapsed is None:
            _, collapsed = fock.project_onto(state1, attack.eve_ports, eve_outcome)
            cache[ckey] = collapsed
        state = fock.tensor(collapsed, encoded_pair_state(m, BOB_MODES, nb), content)
        if recombine:
            state = fock.apply_beam_splitter(state, ALICE_MODES[0], to_alice)
            state = fock.apply_beam_splitter(state, BOB_MODES[0], to_bob)
        dist = fock.outcome_distribution(state, ("a1", to_alice, "b1", to_bob))
        cache[key2] = dist
    return dist, to_alice, to_bob, eve_counts, branch_q


def control_announce(record: RoundRecord) -> ControlOutcome:
    """Announce-bit verification on an accepted round: Alice also reveals n
    and Bob checks his click against the inference table."""
    if not record.accepted or record.inferred is None:
        raise ValueError("announce-bit control needs an accepted round")
    return ControlOutcome("announce-bit", flagged=(record.inferred != record.n))


def control_photon_count(
    cfg: SessionConfig, attack: Attack, rng: np.random.Generator
) -> ControlOutcome:
    """Run one destructive photon-count control round."""
    rec = run_round(cfg, attack, 0, rng, count_control=True)
    assert rec.control is not None
    return rec.control


def round_rng(seed: int, index: int) -> np.random.Generator:
    """Independent per-round stream; depends only on (seed, index) so shards
    and reordered execution reproduce identical rounds."""
    return np.random.default_rng(np.random.SeedSequence(entropy=(seed, index)))


def run_rounds(cfg: SessionConfig, start: int, stop: int) -> List[RoundRecord]:
    """Execute rounds [start, stop) of the session."""
    attack = attacks_mod.build(cfg.attack)
    cache: dict = {}
    return [run_round(cfg, attack, i, round_rng(cfg.seed, i), cache) for i in range(start, stop)]


def run_session(cfg: SessionConfig):
    """Run a full session. Returns (records, SessionSummary)."""
    from .analysis import summarize  # import here: analysis consumes this module

    records = run_rounds(cfg, 0, cfg.rounds)
    return records, summarize(records)


def run_session_sharded(cfg: SessionConfig, shards: int):
    """Run the session split into round-range shards and merge the results.

    Per-round seeding makes this bit-identical to the single-shard run.
    """
    from .analysis import summarize

    if shards < 1:
        raise ValueError("shards must be >= 1")
    bounds = [round(i * cfg.rounds / shards) for i in range(shards + 1)]
    records: List[RoundRecord] = []
    for lo, hi in zip(bounds, bounds[1:]):
        records.extend(run_rounds(cfg, lo, hi))
    return records, summarize(records)
