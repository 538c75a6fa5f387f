"""Computational basis of the L-qubit chain and state-vector container.

Basis states are labelled by integers whose binary digits give the state of
each qubit: bit k = 0 means qubit k is in its single-particle ground state
(spin-z eigenvalue +1/2), bit k = 1 means it is excited (-1/2).  The
all-zero string is therefore the lowest configuration of the static field
term, and flipping one bit changes exactly one spin.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import CapacityError, FrameError

# State vectors are dense arrays of 2^L complex amplitudes; above this the
# memory cost stops being desk-scale.
MAX_QUBITS_STATE = 20

NORM_TOL = 1e-10


@dataclass(frozen=True)
class BasisState:
    """One computational basis state of an L-qubit chain."""

    index: int
    L: int

    def __post_init__(self):
        if self.L < 1:
            raise ValueError(f"need at least one qubit, got L={self.L}")
        if not 0 <= self.index < (1 << self.L):
            raise ValueError(
                f"index {self.index} outside [0, 2^{self.L}) basis range"
            )

    def bit(self, k: int) -> int:
        if not 0 <= k < self.L:
            raise ValueError(f"qubit index {k} outside [0, {self.L})")
        return (self.index >> k) & 1

    def bits(self) -> str:
        """Bit string read left to right as qubit 0 to qubit L-1."""
        return "".join(str(self.bit(k)) for k in range(self.L))


def spin_z(s: BasisState, k: int) -> float:
    """Spin-z eigenvalue of qubit k: +1/2 for bit 0 (ground), -1/2 for bit 1."""
    return 0.5 - s.bit(k)


def flip(s: BasisState, k: int) -> BasisState:
    """Basis state with qubit k flipped; involution on the basis."""
    if not 0 <= k < s.L:
        raise ValueError(f"qubit index {k} outside [0, {s.L})")
    return BasisState(s.index ^ (1 << k), s.L)


@lru_cache(maxsize=64)
def spin_z_column(L: int, k: int) -> np.ndarray:
    """Vector of spin-z values of qubit k over all 2^L basis states."""
    idx = np.arange(1 << L)
    col = 0.5 - ((idx >> k) & 1).astype(float)
    col.setflags(write=False)
    return col


@lru_cache(maxsize=64)
def total_spin_z(L: int) -> np.ndarray:
    """Vector of total spin-z (sum over qubits) for all basis states."""
    tot = sum(spin_z_column(L, k) for k in range(L))
    tot.setflags(write=False)
    return tot


@dataclass(frozen=True)
class StateVector:
    """2^L complex amplitudes at a given time, tagged with its frame.

    ``rot_nu`` is None in the laboratory frame, otherwise the frequency of
    the rotating frame the amplitudes are expressed in.  Amplitudes are the
    full complex coefficients in the fixed global basis.
    """

    amplitudes: np.ndarray
    time: float = 0.0
    rot_nu: float | None = None
    L: int = field(init=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        n = amps.shape[0]
        L = n.bit_length() - 1
        if amps.ndim != 1 or (1 << L) != n:
            raise ValueError(f"amplitude array length {n} is not a power of two")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "L", L)

    @property
    def is_lab(self) -> bool:
        return self.rot_nu is None

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def require_lab(self):
        if not self.is_lab:
            raise FrameError(f"expected lab-frame state, got rotating({self.rot_nu})")

    def require_rotating(self, nu: float):
        if self.is_lab or self.rot_nu != nu:
            raise FrameError(
                f"expected rotating({nu}) state, got "
                f"{'lab' if self.is_lab else f'rotating({self.rot_nu})'}"
            )


def ground_state(L: int) -> StateVector:
    """Lab-frame |0...0> at time zero."""
    if L < 1:
        raise ValueError(f"need at least one qubit, got L={L}")
    if L > MAX_QUBITS_STATE:
        raise CapacityError(f"L={L} exceeds the state-vector cap {MAX_QUBITS_STATE}")
    amps = np.zeros(1 << L, dtype=complex)
    amps[0] = 1.0
    return StateVector(amps, time=0.0, rot_nu=None)


def format_state_table(psi: StateVector) -> str:
    """Plain-text dump: index, bit string (qubit 0 leftmost), Re, Im, |c|^2."""
    lines = ["# index bits re im prob"]
    for i, c in enumerate(psi.amplitudes):
        bits = "".join(str((i >> k) & 1) for k in range(psi.L))
        lines.append(
            f"{i} {bits} {c.real:.17g} {c.imag:.17g} {abs(c) ** 2:.17g}"
        )
    return "\n".join(lines) + "\n"
