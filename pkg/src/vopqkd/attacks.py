"""Eavesdropping strategies acting on the two traveling channel modes.

Every strategy is a plugin that rewires (and possibly transforms) the joint
state at the channel: it receives the traveling rails "a2" (Alice -> Bob)
and "b2" (Bob -> Alice), may tensor in its own modes, and tells each party
which rail arrives at their recombiner. Stored rails "a1"/"b1" are off
limits. Strategies draw their per-round randomness through `draw`, keep the
channel action itself a pure function of those bits, and are stateless
between rounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from . import fock
from .fock import FockState

ATTACK_KINDS = ("none", "phase", "mitm", "devil", "short-circuit")
CHANNEL_NAMES = ("alice-to-bob", "bob-to-alice")

# Traveling rails at the interception point.
RAIL_TO_BOB = "a2"
RAIL_TO_ALICE = "b2"


@dataclass(frozen=True)
class AttackStrategy:
    """Declarative attack configuration, as selected on the command line."""

    kind: str = "none"
    phi: float = 0.0
    channels: Tuple[str, ...] = ("alice-to-bob",)

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}; choose from {ATTACK_KINDS}")
        if self.kind == "phase":
            if not 0.0 <= self.phi <= math.pi:
                raise ValueError(f"phase attack phi must lie in [0, pi], got {self.phi}")
            if not self.channels:
                raise ValueError("phase attack needs at least one channel")
            for ch in self.channels:
                if ch not in CHANNEL_NAMES:
                    raise ValueError(f"unknown channel {ch!r}; choose from {CHANNEL_NAMES}")


@dataclass
class EveRoundState:
    """What the adversary produced and learned in one round."""

    p: Optional[int] = None
    q: Optional[int] = None
    eve_counts: Dict[str, int] = field(default_factory=dict)
    learned_n: Optional[int] = None
    learned_m: Optional[int] = None

    def alice_side_total(self) -> Optional[int]:
        if self.p is None:
            return None
        return self.eve_counts.get("e1", 0) + self.eve_counts.get(RAIL_TO_BOB, 0)


class Attack:
    """Base channel hook: pass the rails through untouched."""

    kind = "none"
    adaptive = False
    eve_ports: Tuple[str, ...] = ()

    def draw(self, rng: np.random.Generator) -> tuple:
        """Per-round discrete randomness (kept outside `apply` for caching)."""
        return ()

    def apply(self, state: FockState, bits: tuple) -> Tuple[FockState, str, str]:
        """Act on the channel. Returns (state, rail_to_alice, rail_to_bob)."""
        return state, RAIL_TO_ALICE, RAIL_TO_BOB

    def learn(
        self, bits: tuple, eve_counts: Dict[str, int], alice_result: Optional[int]
    ) -> Optional[int]:
        """Eve's inference of n once Alice's single-click result is public."""
        return None


class NullAttack(Attack):
    kind = "none"


class PhaseTamperAttack(Attack):
    """Shift the phase of photons on one or both traveling rails."""

    kind = "phase"

    def __init__(self, phi: float, channels: Tuple[str, ...]):
        self.phi = phi
        self.channels = channels

    def apply(self, state, bits):
        if "alice-to-bob" in self.channels:
            state = fock.apply_phase_shift(state, RAIL_TO_BOB, self.phi)
        if "bob-to-alice" in self.channels:
            state = fock.apply_phase_shift(state, RAIL_TO_ALICE, self.phi)
        return state, RAIL_TO_ALICE, RAIL_TO_BOB


def _random_bit(rng: np.random.Generator) -> int:
    return 1 if rng.random() < 0.5 else -1


class InterceptResendAttack(Attack):
    """Terminate both channels, playing Bob toward Alice and Alice toward Bob.

    Eve keeps one mode of each of her own entangled pairs, forwards the
    other, and interferes her kept modes with the intercepted rails exactly
    as the honest receiver would. Her detectors are measured jointly with
    the parties' (all ports are disjoint, so the order is immaterial).
    """

    kind = "mitm"
    eve_ports = ("e1", RAIL_TO_BOB, "e3", RAIL_TO_ALICE)

    def draw(self, rng):
        return (_random_bit(rng), _random_bit(rng))  # (p toward Alice, q toward Bob)

    def apply(self, state, bits):
        p, q = bits
        state = fock.tensor(
            state,
            fock.one_photon_pair(("e1", "e2"), p),
            fock.one_photon_pair(("e3", "e4"), q),
        )
        # Her recombiners: kept mode on the in1 port, intercepted rail on in2.
        state = fock.apply_beam_splitter(state, "e1", RAIL_TO_BOB)
        state = fock.apply_beam_splitter(state, "e3", RAIL_TO_ALICE)
        return state, "e2", "e4"

    def learn(self, bits, eve_counts, alice_result):
        p = bits[0]
        if alice_result is None:
            return None
        if eve_counts.get("e1", 0) + eve_counts.get(RAIL_TO_BOB, 0) != 1:
            return None
        eve_click = 1 if eve_counts.get("e1", 0) == 1 else 2
        return p if alice_result == eve_click else -p


class AdaptiveInterceptAttack(InterceptResendAttack):
    """Intercept/resend where Eve measures her Alice-side interference first
    and picks the resend so Bob's count tracks what Alice is about to see:
    Eve counted 0 (Alice will see 2) -> send vacuum; Eve counted 2 (Alice
    will see 0) -> send one fresh photon; Eve counted 1 -> forward her
    prepared pair mode unchanged.
    """

    kind = "devil"
    adaptive = True
    eve_ports = ("e1", RAIL_TO_BOB)

    def draw(self, rng):
        return (_random_bit(rng),)  # p; q is drawn only on the forward branch

    def alice_side(self, alice_state: FockState, p: int) -> FockState:
        """Eve's pair tensored in and interfered with the intercepted rail."""
        state = fock.tensor(alice_state, fock.one_photon_pair(("e1", "e2"), p))
        return fock.apply_beam_splitter(state, "e1", RAIL_TO_BOB)

    def resend(self, eve_total: int, rng: np.random.Generator) -> Tuple[FockState, Optional[int]]:
        """Channel content toward Bob, given Eve's own count. Returns (state on
        rail "e4", q or None)."""
        if eve_total == 1:
            q = _random_bit(rng)
            return fock.one_photon_pair(("e3", "e4"), q), q
        if eve_total == 0:
            return fock.vacuum(("e4",)), None
        return fock.basis_state(("e4",), (1,)), None


class ShortCircuitAttack(Attack):
    """Return each party's own traveling rail to their own recombiner.

    Both apparatuses close into Mach-Zehnder interferometers, so each click
    is a deterministic function of that party's own bit and Alice's public
    result hands Eve the key.
    """

    kind = "short-circuit"

    def apply(self, state, bits):
        return state, RAIL_TO_BOB, RAIL_TO_ALICE

    def learn(self, bits, eve_counts, alice_result):
        if alice_result is None:
            return None
        # The self-inverse beam splitter sends the photon back to its
        # injection rail: port 1 <=> bit +1.
        return 1 if alice_result == 1 else -1


def build(strategy: AttackStrategy) -> Attack:
    """Instantiate the channel hook for a declarative strategy."""
    if strategy.kind == "none":
        return NullAttack()
    if strategy.kind == "phase":
        return PhaseTamperAttack(strategy.phi, strategy.channels)
    if strategy.kind == "mitm":
        return InterceptResendAttack()
    if strategy.kind == "devil":
        return AdaptiveInterceptAttack()
    if strategy.kind == "short-circuit":
        return ShortCircuitAttack()
    raise ValueError(f"unknown attack kind {strategy.kind!r}")
