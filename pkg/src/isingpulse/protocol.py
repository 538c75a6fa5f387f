"""Rf-pulse sequences: the remote-entanglement walk, resonance bookkeeping,
and the selective-regime validator.

The built-in protocol drives the ground state into an equal superposition of
|0...0> and the state with the two end qubits excited.  It uses 2L-2 pulses:
a pi/2 pulse splitting off the moving branch at qubit 0, then pi pulses that
carry the excitation down the chain (flip qubit j enabled by its excited
neighbour j-1, then flip j-1 back).  Every pulse frequency is the exact
static-energy difference of its intended transition, so the intended
transition is resonant while the parked |0...0> branch is detuned by 2J
(4J at the one pulse whose target has both neighbours excited).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .basis import BasisState, flip
from .errors import ProtocolError
from .hamiltonian import ChainParams, fake_transitions, h0_energy

START_TIME_TOL = 1e-9

# Ratio levels for the ordering checks: "much less than" is taken as a
# quarter; anything at or past one has plainly left the regime.
RATIO_PASS = 0.25
RATIO_FAIL = 1.0

ENTANGLE_KIND = "entangle"


@dataclass(frozen=True)
class Pulse:
    """One rectangular rf pulse.

    ``target`` annotates the transition the pulse is meant to drive as
    (source basis state, flipped qubit); it is None for hand-built pulses.
    """

    nu: float
    Omega: float
    phi: float
    duration: float
    t_start: float
    target: tuple[BasisState, int] | None = None

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"pulse duration must be positive, got {self.duration}")

    @property
    def t_end(self) -> float:
        return self.t_start + self.duration


@dataclass(frozen=True)
class Protocol:
    """Ordered, contiguous pulse sequence on a fixed chain."""

    pulses: tuple[Pulse, ...]
    params: ChainParams
    kind: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "pulses", tuple(self.pulses))
        t = 0.0
        for i, pu in enumerate(self.pulses):
            if abs(pu.t_start - t) > START_TIME_TOL * (1.0 + abs(t)):
                raise ProtocolError(
                    f"pulse {i} starts at {pu.t_start}, expected {t} "
                    "(pulses must abut)"
                )
            t = pu.t_end

    @property
    def total_time(self) -> float:
        return self.pulses[-1].t_end if self.pulses else 0.0

    def __len__(self) -> int:
        return len(self.pulses)


def resonance_frequency(s: BasisState, k: int, p: ChainParams) -> float:
    """Drive frequency resonant with flipping qubit k of state s.

    The exact |E0(flip(s,k)) - E0(s)|; no closed-form shortcut, so the pulse
    stays resonant even when Ising shifts move the transition.
    """
    return abs(h0_energy(flip(s, k), p) - h0_energy(s, p))


def _walk_order(L: int, mirror: bool) -> list[int]:
    if not mirror:
        flips = [0, 1]
        for j in range(2, L):
            flips += [j, j - 1]
    else:
        flips = [L - 1, L - 2]
        for j in range(L - 3, -1, -1):
            flips += [j, j + 1]
    return flips


def build_entanglement_protocol(
    p: ChainParams, Omega: float, *, mirror: bool = False
) -> Protocol:
    """Compile the end-to-end entanglement walk into explicit pulses.

    The first pulse lasts pi/(2*Omega) (equal-superposition pulse), the
    remaining 2L-3 last pi/Omega (full population transfer).  ``mirror``
    runs the walk from the other end of the chain; the target state is the
    same either way.
    """
    if p.L < 3:
        raise ProtocolError(f"the entanglement walk needs L >= 3, got L={p.L}")
    if not Omega > 0:
        raise ValueError(f"Rabi frequency must be positive, got {Omega}")
    pulses = []
    t = 0.0
    branch = BasisState(0, p.L)
    for i, k in enumerate(_walk_order(p.L, mirror)):
        duration = math.pi / (2.0 * Omega) if i == 0 else math.pi / Omega
        pulses.append(
            Pulse(
                nu=resonance_frequency(branch, k, p),
                Omega=Omega,
                phi=0.0,
                duration=duration,
                t_start=t,
                target=(branch, k),
            )
        )
        t += duration
        branch = flip(branch, k)
    return Protocol(pulses=tuple(pulses), params=p, kind=ENTANGLE_KIND)


def protocol_target_index(prot: Protocol) -> int:
    """Basis index of the excited branch after the last pulse."""
    if prot.kind != ENTANGLE_KIND:
        raise ProtocolError("target index is defined for the built-in walk only")
    idx = 0
    for pu in prot.pulses:
        src, k = pu.target
        idx ^= 1 << k
    return idx


def spectator_detunings(prot: Protocol) -> list[float]:
    """Detuning of the parked |0...0> branch at each non-first pulse.

    Signed rotating-frame value: (qubit-k transition energy of |0...0>)
    minus the pulse frequency.  For the built-in walk this is 2J for every
    pulse except the single 4J one.
    """
    zero = BasisState(0, prot.params.L)
    e_zero = h0_energy(zero, prot.params)
    out = []
    for pu in prot.pulses[1:]:
        if pu.target is None:
            raise ProtocolError("spectator detunings need target annotations")
        _, k = pu.target
        gap = h0_energy(flip(zero, k), prot.params) - e_zero
        out.append(gap - pu.nu)
    return out


def two_pi_k_omega(J: float, k: int) -> float:
    """Drive strength at which a 2J-detuned pulse closes a full cycle.

    Omega_k = 2J / sqrt(4k^2 - 1); at these values the near-resonant
    transition probability of a pi pulse vanishes exactly.
    """
    if k != int(k) or k < 1:
        raise ValueError(f"cycle index k must be a positive integer, got {k}")
    return 2.0 * J / math.sqrt(4.0 * k * k - 1.0)


@dataclass(frozen=True)
class RegimeCheck:
    name: str
    ratio: float
    level: str  # "pass" | "warn" | "fail"


@dataclass(frozen=True)
class SelectiveReport:
    """Margins of the selective-excitation inequalities, plus fake-J flags."""

    checks: tuple[RegimeCheck, ...]
    fake_hits: tuple[tuple[float, float], ...]  # (J_fake, relative distance)
    fake_window: float

    @property
    def ok(self) -> bool:
        return all(c.level == "pass" for c in self.checks) and not self.fake_hits

    @property
    def failed(self) -> bool:
        return any(c.level == "fail" for c in self.checks) or bool(self.fake_hits)


def _level(ratio: float) -> str:
    if ratio < RATIO_PASS:
        return "pass"
    if ratio < RATIO_FAIL:
        return "warn"
    return "fail"


def validate_selective(
    p: ChainParams, Omega: float, fake_window: float = 0.02
) -> SelectiveReport:
    """Report each selective-regime ratio with a pass/warn/fail level.

    Checks Omega << J << a, a >> 4J, and the protocol-length conditions
    Omega*sqrt(L/2) << J and << a.  Never raises; degenerate inputs simply
    produce failing ratios.  ``fake_window`` is the relative distance to a
    fake-transition J value below which a flag is raised.
    """
    inf = math.inf
    ratios = [
        ("Omega/J", Omega / p.J if p.J > 0 else inf),
        ("J/a", p.J / p.a),
        ("4J/a", 4.0 * p.J / p.a),
        ("Omega*sqrt(L/2)/J", Omega * math.sqrt(p.L / 2.0) / p.J if p.J > 0 else inf),
        ("Omega*sqrt(L/2)/a", Omega * math.sqrt(p.L / 2.0) / p.a),
    ]
    checks = tuple(RegimeCheck(n, r, _level(r)) for n, r in ratios)
    hits = []
    if p.L >= 3 and p.J > 0:
        for jf in fake_transitions(p):
            rel = abs(p.J - jf) / jf
            if rel < fake_window:
                hits.append((jf, rel))
    return SelectiveReport(checks=checks, fake_hits=tuple(hits), fake_window=fake_window)


def format_protocol_table(prot: Protocol) -> str:
    """One pulse per line: index, nu, Omega, phi, tau, t_start, source bits
    (qubit 0 leftmost), flipped qubit."""
    lines = ["# pulse nu omega phi tau t_start source_bits flipped_qubit"]
    for i, pu in enumerate(prot.pulses):
        if pu.target is not None:
            src, k = pu.target
            bits, kq = src.bits(), str(k)
        else:
            bits, kq = "-", "-"
        lines.append(
            f"{i} {pu.nu:.17g} {pu.Omega:.17g} {pu.phi:.17g} "
            f"{pu.duration:.17g} {pu.t_start:.17g} {bits} {kq}"
        )
    return "\n".join(lines) + "\n"
