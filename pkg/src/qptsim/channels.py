"""Quantum channels on one qubit: operator-sum and Choi representations.

A channel E is stored as a set of Kraus operators together with its
unnormalized Choi matrix C = sum_k |K_k>><<K_k| built with the channel on
the first tensor factor, so a deterministic channel has Tr C = 2.  The
occurrence probability of a non-deterministic channel is Tr[E(rho)].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .algebra import (
    TOL,
    BipartiteState,
    dagger,
    double_ket,
    from_double_ket,
    is_density_matrix,
    is_hermitian,
    pauli,
    tensor,
    _frozen,
)
from .errors import NotCompletelyPositiveError, NullEventError

# Outcome probabilities below this are treated as impossible events.
NULL_EVENT_PROB = 1e-15


def choi_from_kraus(ops: Sequence[np.ndarray]) -> np.ndarray:
    """Unnormalized Choi matrix sum_k |K_k>><<K_k| (dimension-generic)."""
    if len(ops) == 0:
        raise ValueError("need at least one Kraus operator")
    d = np.asarray(ops[0]).shape[0]
    c = np.zeros((d * d, d * d), dtype=complex)
    for k in ops:
        k = np.asarray(k, dtype=complex)
        if k.shape != (d, d):
            raise ValueError(f"Kraus operators must all be {d}x{d}, got {k.shape}")
        v = double_ket(k)
        c += np.outer(v, v.conj())
    return c


def kraus_from_choi(choi: np.ndarray, eig_floor: float = 1e-10) -> list[np.ndarray]:
    """Kraus operators via spectral decomposition of a Choi matrix.

    Eigenvalues below ``eig_floor`` are discarded; a negative eigenvalue
    beyond the PSD slack raises instead of being clipped.
    """
    choi = np.asarray(choi, dtype=complex)
    d2 = choi.shape[0]
    d = int(round(np.sqrt(d2)))
    if choi.shape != (d2, d2) or d * d != d2:
        raise ValueError(f"Choi matrix must be d^2 x d^2, got {choi.shape}")
    if not is_hermitian(choi, TOL.psd_slack):
        raise ValueError("Choi matrix is not Hermitian within tolerance")
    vals, vecs = np.linalg.eigh(choi)
    if vals[0] < -TOL.psd_slack:
        raise NotCompletelyPositiveError(magnitude=-float(vals[0]))
    ops = []
    for lam, v in zip(vals, vecs.T):
        if lam > eig_floor:
            ops.append(np.sqrt(lam) * from_double_ket(v))
    return ops


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    """Completely positive, trace-non-increasing map on one qubit."""

    kraus_ops: Tuple[np.ndarray, ...]
    choi: np.ndarray

    @classmethod
    def from_kraus(cls, ops: Sequence[np.ndarray]) -> "QuantumChannel":
        ops = tuple(_frozen(k) for k in ops)
        for k in ops:
            if k.shape != (2, 2):
                raise ValueError(f"Kraus operators must be 2x2, got {k.shape}")
        s = sum(dagger(k) @ k for k in ops)
        excess = np.max(np.linalg.eigvalsh(s - np.eye(2)))
        if excess > TOL.psd_slack:
            raise ValueError(
                f"channel increases trace: max eigenvalue of sum K^dag K "
                f"exceeds 1 by {float(excess):.3e}"
            )
        return cls(kraus_ops=ops, choi=_frozen(choi_from_kraus(ops)))

    @classmethod
    def from_choi(cls, choi: np.ndarray) -> "QuantumChannel":
        ops = kraus_from_choi(choi)
        return cls.from_kraus(ops)

    @property
    def occurrence_scale(self) -> float:
        """Tr[E(I/2)], the occurrence probability on a maximally mixed input."""
        return float(np.trace(self.choi).real) / 2.0

    @property
    def trace_preserving(self) -> bool:
        s = sum(dagger(k) @ k for k in self.kraus_ops)
        return bool(np.max(np.abs(s - np.eye(2))) <= TOL.psd_slack)

    @property
    def is_unitary(self) -> bool:
        if len(self.kraus_ops) != 1:
            return False
        k = self.kraus_ops[0]
        return bool(np.max(np.abs(dagger(k) @ k - np.eye(2))) <= TOL.psd_slack)

    @property
    def unitary_matrix(self) -> Optional[np.ndarray]:
        return self.kraus_ops[0] if self.is_unitary else None


def apply_channel(ch: QuantumChannel, rho: np.ndarray) -> tuple[np.ndarray, float]:
    """Apply E to a single-qubit density matrix.

    Returns the renormalized output state and the occurrence probability
    Tr[E(rho)].  Conditioning on a numerically impossible outcome raises
    NullEventError.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2) or not is_density_matrix(rho):
        raise ValueError("rho is not a valid single-qubit density matrix")
    out = np.zeros((2, 2), dtype=complex)
    for k in ch.kraus_ops:
        out += k @ rho @ dagger(k)
    prob = float(np.trace(out).real)
    if prob < NULL_EVENT_PROB:
        raise NullEventError(f"outcome probability {prob:.3e} is numerically zero")
    return out / prob, prob


def propagate(ch: QuantumChannel, psi: BipartiteState) -> BipartiteState:
    """Send beam 1 of a bipartite state through the channel.

    For a unitary channel and a pure input the result stays pure with
    coefficient matrix U Psi; otherwise the renormalized output density
    matrix (E x I)(|Psi>><<Psi|) is returned.
    """
    if ch.is_unitary and psi.pure:
        return BipartiteState.from_coeffs(ch.kraus_ops[0] @ psi.coeffs)
    rho = psi.density
    out = np.zeros((4, 4), dtype=complex)
    eye = np.eye(2)
    for k in ch.kraus_ops:
        big = tensor(k, eye)
        out += big @ rho @ dagger(big)
    prob = float(np.trace(out).real)
    if prob < NULL_EVENT_PROB:
        raise NullEventError(f"outcome probability {prob:.3e} is numerically zero")
    out /= prob
    out = 0.5 * (out + dagger(out))
    return BipartiteState.from_density(out)


def unitary_channel(u: np.ndarray) -> QuantumChannel:
    """Deterministic channel rho -> U rho U^dag."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        raise ValueError(f"unitary must be 2x2, got {u.shape}")
    if np.max(np.abs(dagger(u) @ u - np.eye(2))) > TOL.psd_slack:
        raise ValueError("matrix is not unitary within tolerance")
    return QuantumChannel.from_kraus([u])


def identity_channel() -> QuantumChannel:
    return unitary_channel(np.eye(2))


def depolarizing(p: float) -> QuantumChannel:
    """Depolarizing channel E(rho) = (1-p) rho + p I/2."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing strength must be in [0, 1], got {p}")
    ops = [np.sqrt(1.0 - 3.0 * p / 4.0) * pauli(0)]
    ops += [np.sqrt(p / 4.0) * pauli(a) for a in (1, 2, 3)]
    return QuantumChannel.from_kraus(ops)


def amplitude_damping(gamma: float) -> QuantumChannel:
    """Amplitude damping: decay |1> -> |0> with probability gamma."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"damping strength must be in [0, 1], got {gamma}")
    k0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - gamma)]], dtype=complex)
    k1 = np.array([[0.0, np.sqrt(gamma)], [0.0, 0.0]], dtype=complex)
    return QuantumChannel.from_kraus([k0, k1])
