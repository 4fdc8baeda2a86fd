"""Complex linear algebra core and the two-qubit state model.

All values are small dense ``numpy`` arrays (2x2 up to 16x16, complex128).
A pure two-photon polarization state is identified with its 2x2 coefficient
matrix Psi via ``|Psi>> = sum_nm Psi_nm |nm>`` in the fixed product basis
|00>, |01>, |10>, |11>; beam 1 (the arm traversing the device) is the first
tensor factor.  Arrays handed out by this module are marked read-only, and
every operation is a pure function, so values are safe to share across
threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class Tolerances:
    """Central numeric tolerances (single knob for the property tests)."""

    equality: float = 1e-12
    psd_slack: float = 1e-10
    invertibility: float = 1e-14


TOL = Tolerances()

# Smallest singular value of a coefficient matrix still considered full-rank.
FULL_RANK_MIN_SV = 1e-7


def _frozen(m: np.ndarray) -> np.ndarray:
    out = np.array(m, dtype=complex)
    out.setflags(write=False)
    return out


_PAULI = tuple(
    _frozen(m)
    for m in (
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    )
)


def pauli(i: int) -> np.ndarray:
    """Pauli matrix for tetra-vector index i: 0=identity, 1=x, 2=y, 3=z.

    The index-to-matrix map is fixed package-wide: sigma_z is diagonal in
    the horizontal/vertical encoding (|0> horizontal), and sigma_y is the
    standard [[0,-i],[i,0]].
    """
    if i not in (0, 1, 2, 3):
        raise ValueError(f"Pauli index must be in 0..3, got {i!r}")
    return _PAULI[i]


def dagger(m: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return np.conjugate(np.asarray(m)).T


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two matrices."""
    a, b = np.asarray(a), np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("tensor expects two matrices")
    return np.kron(a, b)


def partial_trace(m: np.ndarray, subsystem: int) -> np.ndarray:
    """Trace out one qubit of a two-qubit (4x4) operator.

    ``subsystem`` is the factor removed: 1 for the device arm, 2 for the
    untouched arm.
    """
    m = np.asarray(m)
    if m.shape != (4, 4):
        raise ValueError(f"partial_trace expects a 4x4 matrix, got {m.shape}")
    t = m.reshape(2, 2, 2, 2)
    if subsystem == 1:
        return np.einsum("abac->bc", t)
    if subsystem == 2:
        return np.einsum("abcb->ac", t)
    raise ValueError(f"subsystem must be 1 or 2, got {subsystem!r}")


def det(m: np.ndarray) -> complex:
    """Determinant of a square matrix."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"det expects a square matrix, got shape {m.shape}")
    return complex(np.linalg.det(m))


def inverse(m: np.ndarray) -> np.ndarray:
    """Matrix inverse; rejects matrices singular within tolerance."""
    d = det(m)
    if abs(d) < TOL.invertibility:
        raise ValueError(f"matrix is singular within tolerance (|det| = {abs(d):.3e})")
    return np.linalg.inv(np.asarray(m))


def eigen_hermitian(m: np.ndarray):
    """Eigenvalues and eigenvectors of a Hermitian matrix (ascending order)."""
    m = np.asarray(m)
    if not is_hermitian(m, tol=TOL.psd_slack):
        dev = float(np.max(np.abs(m - dagger(m))))
        raise ValueError(f"matrix is not Hermitian within tolerance (deviation {dev:.3e})")
    return np.linalg.eigh(m)


def is_hermitian(m: np.ndarray, tol: float = TOL.psd_slack) -> bool:
    m = np.asarray(m)
    return m.shape[0] == m.shape[1] and bool(np.max(np.abs(m - dagger(m))) <= tol)


def mat_close(a: np.ndarray, b: np.ndarray, tol: float = TOL.equality) -> bool:
    """Element-wise equality within an explicit absolute tolerance."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        return False
    return bool(np.max(np.abs(a - b)) <= tol)


def double_ket(m: np.ndarray) -> np.ndarray:
    """Vector of |M>> = sum_nm M_nm |nm> (row-major flatten)."""
    return np.asarray(m, dtype=complex).reshape(-1)


def from_double_ket(v: np.ndarray) -> np.ndarray:
    """Coefficient matrix of a double-ket vector (inverse of double_ket)."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise ValueError(f"vector length {v.size} is not a perfect square")
    return v.reshape(d, d)


def permute_qubits(m: np.ndarray, perm) -> np.ndarray:
    """Reorder the tensor factors of an n-qubit operator.

    ``perm[k]`` is the old slot of the qubit that lands in slot k of the
    result, applied to row and column indices alike.
    """
    m = np.asarray(m)
    n = len(perm)
    if m.shape != (2**n, 2**n):
        raise ValueError(f"operator shape {m.shape} does not match {n} qubits")
    axes = list(perm) + [n + p for p in perm]
    return m.reshape([2] * (2 * n)).transpose(axes).reshape(2**n, 2**n)


def is_density_matrix(rho: np.ndarray, tol: float = TOL.psd_slack) -> bool:
    """Hermitian, unit trace, eigenvalues >= -tol."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return False
    if not is_hermitian(rho, tol):
        return False
    if abs(np.trace(rho).real - 1.0) > 1e-9 or abs(np.trace(rho).imag) > tol:
        return False
    return bool(np.min(np.linalg.eigvalsh(rho)) >= -tol)


@dataclass(frozen=True, eq=False)
class BipartiteState:
    """Two-qubit state of the photon pair source.

    Pure states carry their 2x2 coefficient matrix; mixed states only the
    4x4 density matrix.  Factor 1 is the beam traversing the device.
    """

    coeffs: Optional[np.ndarray]
    density: np.ndarray
    pure: bool

    @classmethod
    def from_coeffs(cls, psi: np.ndarray) -> "BipartiteState":
        psi = np.asarray(psi, dtype=complex)
        if psi.shape != (2, 2):
            raise ValueError(f"coefficient matrix must be 2x2, got {psi.shape}")
        norm = float(np.sum(np.abs(psi) ** 2))
        if abs(norm - 1.0) > TOL.equality:
            raise ValueError(f"coefficient matrix is not normalized (sum |Psi|^2 = {norm!r})")
        v = psi.reshape(-1)
        rho = np.outer(v, v.conj())
        return cls(coeffs=_frozen(psi), density=_frozen(rho), pure=True)

    @classmethod
    def from_density(cls, rho: np.ndarray) -> "BipartiteState":
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (4, 4):
            raise ValueError(f"density matrix must be 4x4, got {rho.shape}")
        if not is_density_matrix(rho):
            raise ValueError("not a valid density matrix (hermiticity/trace/positivity)")
        return cls(coeffs=None, density=_frozen(rho), pure=False)

    @property
    def full_rank(self) -> bool:
        """Whether the coefficient matrix is invertible (faithful probe)."""
        if not self.pure:
            raise ValueError("full-rank flag is defined for pure states only")
        sv = np.linalg.svd(self.coeffs, compute_uv=False)
        return bool(sv[-1] > FULL_RANK_MIN_SV)


def bell_state(j: int) -> BipartiteState:
    """Bell state with coefficient matrix sigma_j / sqrt(2).

    j=0 gives (|00>+|11>)/sqrt2 and j=1 the triplet (|01>+|10>)/sqrt2 used
    as the experiment's input.
    """
    return BipartiteState.from_coeffs(pauli(j) / np.sqrt(2.0))
