"""Aggregate statistics, security metrics, and exact-oracle cross-checks.

Summaries are pure folds over round records, so partial results from
sharded sessions merge by concatenating record lists. The oracle side
computes exact Born-rule readout distributions for a scenario (enumerating
all discrete round latents, staging around the one adaptive measurement)
and compares them with Monte-Carlo frequencies.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from . import attacks as attacks_mod
from . import fock
from . import protocol
from .protocol import DeviceModel, RoundRecord, SessionConfig

ANNOUNCE = "announce-bit"
COUNT = "photon-count-check"

# Efficiency yardsticks: best BB84 accounting and the differential-phase-shift
# scheme without active switches, as plain reported constants.
EFFICIENCY_COMPARISONS = {"bb84_max": 0.25, "differential_phase_shift": 1.0 / 6.0}


@dataclass(frozen=True)
class EfficiencyReport:
    """Secret bits per quantum-plus-classical bit exchanged."""

    q_t: int
    b_t: int
    b_s: int
    value: float
    comparisons: Dict[str, float] = field(default_factory=lambda: dict(EFFICIENCY_COMPARISONS))

    def to_json_dict(self) -> dict:
        return {
            "q_t": self.q_t,
            "b_t": self.b_t,
            "b_s": self.b_s,
            "E": self.value,
            "comparisons": dict(self.comparisons),
        }


def efficiency(q_t: int, b_t: int, b_s: int) -> EfficiencyReport:
    """E = b_s / (q_t + b_t)."""
    if q_t < 0 or b_t < 0 or b_s < 0:
        raise ValueError("bit counts must be non-negative")
    if q_t + b_t == 0:
        raise ValueError("q_t + b_t must be positive")
    return EfficiencyReport(q_t, b_t, b_s, b_s / (q_t + b_t))


# Per accepted key bit: both parties committed one quantum bit, Alice's
# detector statement costs one classical bit, one secret bit results.
SINGLE_SHOT_EFFICIENCY = (2, 1, 1)


@dataclass(frozen=True)
class SessionSummary:
    rounds_total: int
    accepted: int
    sift_rate: float
    qber: float
    eve_info_per_round: float
    eve_info_per_sifted_bit: float
    controls_run: Dict[str, int]
    controls_flagged: Dict[str, int]
    p_undetected_model: float
    coincidence_histogram: Dict[Tuple[int, int], float]
    efficiency: EfficiencyReport

    def to_json_dict(self) -> dict:
        return {
            "rounds_total": self.rounds_total,
            "accepted": self.accepted,
            "sift_rate": self.sift_rate,
            "qber": self.qber,
            "eve_info_per_round": self.eve_info_per_round,
            "eve_info_per_sifted_bit": self.eve_info_per_sifted_bit,
            "controls_run": dict(self.controls_run),
            "controls_flagged": dict(self.controls_flagged),
            "p_undetected_model": self.p_undetected_model,
            "coincidence_histogram": {
                f"{a},{b}": p for (a, b), p in sorted(self.coincidence_histogram.items())
            },
            "efficiency": self.efficiency.to_json_dict(),
        }


def sifted_records(records: Sequence[RoundRecord]) -> List[RoundRecord]:
    """Accepted, non-control rounds: the ones contributing key bits."""
    return [r for r in records if r.accepted and r.control is None]


def sifted_keys(records: Sequence[RoundRecord]) -> Tuple[List[int], List[int]]:
    """(Alice's key bits, Bob's reconstructed key bits)."""
    sift = sifted_records(records)
    return [r.n for r in sift], [r.inferred for r in sift]


def summarize(records: Sequence[RoundRecord]) -> SessionSummary:
    """Fold a session's records into the summary statistics."""
    if not records:
        raise ValueError("cannot summarize an empty record list")
    total = len(records)
    accepted = sum(1 for r in records if r.accepted)
    sift = sifted_records(records)
    compared = [r for r in sift if r.inferred is not None]
    errors = sum(1 for r in compared if r.inferred != r.n)
    qber = errors / len(compared) if compared else 0.0

    controls_run = {ANNOUNCE: 0, COUNT: 0}
    controls_flagged = {ANNOUNCE: 0, COUNT: 0}
    for r in records:
        if r.control is not None:
            controls_run[r.control.kind] += 1
            if r.control.flagged:
                controls_flagged[r.control.kind] += 1

    hist: Dict[Tuple[int, int], float] = {}
    for r in records:
        key = (sum(r.alice_counts), sum(r.bob_counts))
        hist[key] = hist.get(key, 0.0) + 1.0
    hist = {k: v / total for k, v in hist.items()}

    return SessionSummary(
        rounds_total=total,
        accepted=accepted,
        sift_rate=accepted / total,
        qber=qber,
        eve_info_per_round=sum(1 for r in records if r.eve_knows_n) / total,
        eve_info_per_sifted_bit=(
            sum(1 for r in sift if r.eve_knows_n) / len(sift) if sift else 0.0
        ),
        controls_run=controls_run,
        controls_flagged=controls_flagged,
        p_undetected_model=0.5 ** controls_run[ANNOUNCE],
        coincidence_histogram=hist,
        efficiency=efficiency(*SINGLE_SHOT_EFFICIENCY),
    )


def detection_curve(flag_probability_per_control: float, nu_max: int) -> List[float]:
    """Survival probabilities (1 - p_flag)^nu for nu = 1..nu_max."""
    p = flag_probability_per_control
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"flag probability must be in [0, 1], got {p}")
    return [(1.0 - p) ** nu for nu in range(1, nu_max + 1)]


def control_flags(records: Sequence[RoundRecord], kind: str) -> List[bool]:
    """Flag outcomes of the given control kind, in round order."""
    return [r.control.flagged for r in records if r.control is not None and r.control.kind == kind]


def empirical_survival(flags: Sequence[bool], nu: int) -> Tuple[float, int]:
    """Fraction of non-overlapping nu-length control blocks with no flag.

    Returns (survival fraction, number of blocks).
    """
    if nu < 1:
        raise ValueError("nu must be >= 1")
    blocks = len(flags) // nu
    if blocks == 0:
        raise ValueError(f"need at least {nu} control outcomes, got {len(flags)}")
    clear = sum(
        1 for b in range(blocks) if not any(flags[b * nu : (b + 1) * nu])
    )
    return clear / blocks, blocks


def control_qber_estimate(records: Sequence[RoundRecord]) -> Optional[float]:
    """The error rate the parties themselves can estimate: the flagged
    fraction of announce-bit control rounds (each flag is one revealed
    sifted-bit error). None when no such controls ran."""
    flags = control_flags(records, ANNOUNCE)
    if not flags:
        return None
    return sum(flags) / len(flags)


def announcement_bit_mutual_information(records: Sequence[RoundRecord]) -> float:
    """Plug-in mutual information (bits) between Alice's announcement and n
    over accepted rounds; ~0 means the public statement leaks nothing."""
    joint: Dict[Tuple[int, int], int] = {}
    total = 0
    for r in records:
        if r.accepted and r.announcement is not None:
            joint[(r.announcement, r.n)] = joint.get((r.announcement, r.n), 0) + 1
            total += 1
    if total == 0:
        return 0.0
    pa: Dict[int, float] = {}
    pn: Dict[int, float] = {}
    for (a, n), c in joint.items():
        pa[a] = pa.get(a, 0.0) + c / total
        pn[n] = pn.get(n, 0.0) + c / total
    mi = 0.0
    for (a, n), c in joint.items():
        p = c / total
        mi += p * math.log2(p / (pa[a] * pn[n]))
    return mi


# ---------------------------------------------------------------------------
# Exact Born-rule oracle
# ---------------------------------------------------------------------------

CountsPair = Tuple[int, int]
Readout = Tuple[CountsPair, CountsPair]


def _emission_cases(device: DeviceModel) -> List[Tuple[int, float]]:
    if device.p2 <= 0.0:
        return [(1, 1.0)]
    if device.p2 >= 1.0:
        return [(2, 1.0)]
    return [(1, 1.0 - device.p2), (2, device.p2)]


def _detector_channel(counts: CountsPair, device: DeviceModel) -> Dict[CountsPair, float]:
    """Exact distribution of the device-reported pair for true photon counts."""
    per_port: List[Dict[int, float]] = []
    for c in counts:
        if device.eta >= 1.0:
            dist = {c: 1.0}
        else:
            dist = {
                d: math.comb(c, d) * device.eta**d * (1.0 - device.eta) ** (c - d)
                for d in range(c + 1)
            }
        if device.detector_kind == "threshold":
            clicks = {0: 0.0, 1: 0.0}
            for d, p in dist.items():
                clicks[1 if d > 0 else 0] += p
            dist = {k: v for k, v in clicks.items() if v > 0.0}
        per_port.append(dist)
    out: Dict[CountsPair, float] = {}
    for d1, p1 in per_port[0].items():
        for d2, p2 in per_port[1].items():
            out[(d1, d2)] = out.get((d1, d2), 0.0) + p1 * p2
    return out


def _accumulate_readout(
    acc: Dict[Readout, float],
    state: fock.FockState,
    ports: Tuple[str, str, str, str],
    weight: float,
    cfg: SessionConfig,
) -> None:
    dist = fock.outcome_distribution(state, ports)
    for outcome, p in dist.entries.items():
        for ra, pa in _detector_channel((outcome[0], outcome[1]), cfg.device_alice).items():
            for rb, pb in _detector_channel((outcome[2], outcome[3]), cfg.device_bob).items():
                key = (ra, rb)
                acc[key] = acc.get(key, 0.0) + weight * p * pa * pb


def exact_readout_distribution(cfg: SessionConfig) -> Dict[Readout, float]:
    """Exact distribution of device-reported (alice_counts, bob_counts) for
    one round of the scenario, marginalized over all round randomness."""
    attack = attacks_mod.build(cfg.attack)
    acc: Dict[Readout, float] = {}
    for n in (-1, 1):
        for m in (-1, 1):
            for na, wa in _emission_cases(cfg.device_alice):
                for nb, wb in _emission_cases(cfg.device_bob):
                    base = 0.25 * wa * wb
                    if attack.adaptive:
                        _devil_readout(acc, attack, cfg, n, m, na, nb, base)
                    else:
                        for bits, wbits in _attack_bit_cases(attack):
                            state, ta, tb = protocol.evolved_round_state(
                                attack, n, m, na, nb, bits
                            )
                            _accumulate_readout(
                                acc, state, ("a1", ta, "b1", tb), base * wbits, cfg
                            )
    return acc


def _attack_bit_cases(attack) -> List[Tuple[tuple, float]]:
    if isinstance(attack, attacks_mod.InterceptResendAttack) and not attack.adaptive:
        return [((p, q), 0.25) for p in (-1, 1) for q in (-1, 1)]
    return [((), 1.0)]


def _devil_branches(eve_total: int) -> List[Tuple[fock.FockState, Optional[int], float]]:
    # Mirrors the adaptive resend rule: forward the prepared pair mode on a
    # one-photon count, vacuum when Alice will see two, one photon when zero.
    if eve_total == 1:
        return [(fock.one_photon_pair(("e3", "e4"), q), q, 0.5) for q in (-1, 1)]
    if eve_total == 0:
        return [(fock.vacuum(("e4",)), None, 1.0)]
    return [(fock.basis_state(("e4",), (1,)), None, 1.0)]


def _devil_readout(acc, attack, cfg, n, m, na, nb, base) -> None:
    for p in (-1, 1):
        s1 = attack.alice_side(protocol.encoded_pair_state(n, protocol.ALICE_MODES, na), p)
        d1 = fock.outcome_distribution(s1, attack.eve_ports)
        for eve_outcome, pe in d1.entries.items():
            _, collapsed = fock.project_onto(s1, attack.eve_ports, eve_outcome)
            for content, _q, pq in _devil_branches(sum(eve_outcome)):
                state = fock.tensor(
                    collapsed,
                    protocol.encoded_pair_state(m, protocol.BOB_MODES, nb),
                    content,
                )
                state = fock.apply_beam_splitter(state, "a1", "e2")
                state = fock.apply_beam_splitter(state, "b1", "e4")
                _accumulate_readout(
                    acc, state, ("a1", "e2", "b1", "e4"), base * 0.5 * pe * pq, cfg
                )


def exact_eve_count_distribution(cfg: SessionConfig) -> Dict[Tuple[int, ...], float]:
    """Exact distribution of the adversary's own detector counts (intercept
    strategies only)."""
    attack = attacks_mod.build(cfg.attack)
    if not isinstance(attack, attacks_mod.InterceptResendAttack):
        raise ValueError("the adversary has no detectors in this scenario")
    acc: Dict[Tuple[int, ...], float] = {}
    for n in (-1, 1):
        for na, wa in _emission_cases(cfg.device_alice):
            for p in (-1, 1):
                weight = 0.25 * wa
                if attack.adaptive:
                    s1 = attack.alice_side(
                        protocol.encoded_pair_state(n, protocol.ALICE_MODES, na), p
                    )
                    dist = fock.outcome_distribution(s1, attack.eve_ports)
                    for outcome, pr in dist.entries.items():
                        acc[outcome] = acc.get(outcome, 0.0) + weight * pr
                else:
                    for m in (-1, 1):
                        for nb, wb in _emission_cases(cfg.device_bob):
                            for q in (-1, 1):
                                state, _, _ = protocol.evolved_round_state(
                                    attack, n, m, na, nb, (p, q)
                                )
                                dist = fock.outcome_distribution(state, attack.eve_ports)
                                w = weight * 0.25 * wb
                                for outcome, pr in dist.entries.items():
                                    acc[outcome] = acc.get(outcome, 0.0) + w * pr
    return acc


@dataclass(frozen=True)
class OracleStage:
    """Exact vs empirical comparison for one measurement stage."""

    name: str
    rows: List[Tuple[str, float, float]]  # (outcome label, exact, empirical)
    tv_distance: float


def _stage(name: str, exact: Dict, empirical_counts: Dict, total: int, fmt) -> OracleStage:
    empirical = {k: v / total for k, v in empirical_counts.items()} if total else {}
    keys = sorted(set(exact) | set(empirical))
    rows = [(fmt(k), exact.get(k, 0.0), empirical.get(k, 0.0)) for k in keys]
    tv = 0.5 * sum(abs(e - f) for _, e, f in rows)
    return OracleStage(name, rows, tv)


def oracle_check(cfg: SessionConfig, records: Optional[Sequence[RoundRecord]] = None) -> List[OracleStage]:
    """Compare exact per-stage distributions against Monte-Carlo frequencies.

    Runs the session when `records` is not supplied. Count-control rounds
    measure a different observable and are excluded from the comparison.
    """
    if records is None:
        records, _ = protocol.run_session(cfg)
    normal = [r for r in records if r.control is None or r.control.kind != COUNT]
    stages = []

    readout_counts: Dict[Readout, int] = {}
    for r in normal:
        key = (tuple(r.alice_counts), tuple(r.bob_counts))
        readout_counts[key] = readout_counts.get(key, 0) + 1
    stages.append(
        _stage(
            "readout",
            exact_readout_distribution(cfg),
            readout_counts,
            len(normal),
            lambda k: "a{}{}-b{}{}".format(k[0][0], k[0][1], k[1][0], k[1][1]),
        )
    )

    if cfg.attack.kind in ("mitm", "devil"):
        attack = attacks_mod.build(cfg.attack)
        eve_counts: Dict[Tuple[int, ...], int] = {}
        n_eve = 0
        for r in normal:
            if r.eve is not None:
                key = tuple(r.eve.eve_counts[p] for p in attack.eve_ports)
                eve_counts[key] = eve_counts.get(key, 0) + 1
                n_eve += 1
        stages.append(
            _stage(
                "eve-counts",
                exact_eve_count_distribution(cfg),
                eve_counts,
                n_eve,
                lambda k: "e" + "".join(str(c) for c in k),
            )
        )
    return stages


def oracle_csv(stages: Sequence[OracleStage]) -> str:
    """Render oracle stages as CSV text."""
    out = io.StringIO()
    out.write("stage,outcome,exact_p,empirical_p,abs_error\n")
    for stage in stages:
        for label, exact, emp in stage.rows:
            out.write(f"{stage.name},{label},{exact:.10g},{emp:.10g},{abs(exact - emp):.10g}\n")
    return out.getvalue()
