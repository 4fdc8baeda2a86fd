"""Linear-inversion estimators for input states, unitary devices and channels.

Everything here consumes correlation tables of the nine-setting Pauli
quorum.  The state estimator inverts the tomographic expansion

    Psi_nm = (1 / (4 sqrt(p))) sum_ij Q^ij_nm  <s_i s_j>,

where Q^ij_nm = <n|sigma_i|n0><m|sigma_j|m0> for a reference basis pair
(n0, m0) and p is the population of the reference pair estimated from the
sigma_z correlations.  The global phase of the result is unmeasurable; it
is fixed by making the reference element real non-negative.  A unitary
device is recovered as U = M Psi_in^{-1} from the reconstructed output
coefficients M, and a general channel by undoing the probe state on the
untouched arm of the reconstructed two-qubit output density matrix.

Estimators report raw linear inversion: no renormalization and no
positivity projection unless explicitly requested.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from .algebra import (
    BipartiteState,
    dagger,
    double_ket,
    inverse,
    pauli,
    permute_qubits,
    tensor,
)
from .channels import choi_from_kraus
from .errors import (
    DegenerateReferenceError,
    IncompleteQuorumError,
    QptError,
    UnfaithfulInputError,
)
from .experiment import (
    SETTINGS,
    CorrelationTable,
    EventRecord,
    events_to_counts,
    table_from_counts,
)

REFERENCE_ORDER = ((0, 1), (1, 0), (1, 1), (0, 0))
P_FLOOR = 1e-6

_REF_LABEL = {(n, m): f"|{n}{m}>" for n in (0, 1) for m in (0, 1)}


@dataclass(frozen=True, eq=False)
class BootstrapErrors:
    """Element-wise bootstrap standard deviations, real and imaginary parts."""

    real: np.ndarray
    imag: np.ndarray
    n_resamples: int
    redraws: int


@dataclass(eq=False)
class ReconstructionResult:
    """Estimated matrix plus gauge note, error bars and diagnostics.

    kind is one of input_state (2x2 coefficients), device_unitary (2x2) or
    device_choi (4x4 or 16x16, trace normalized to the deterministic-channel
    convention).
    """

    kind: str
    matrix: np.ndarray
    gauge: str
    diagnostics: dict
    errors: Optional[BootstrapErrors] = None


def _check_reference(reference) -> tuple[int, int]:
    ref = tuple(reference)
    if ref not in _REF_LABEL:
        raise ValueError(f"reference must be a pair of basis indices in 0/1, got {reference!r}")
    return ref


def q_tensor(n: int, m: int, i: int, j: int, reference: tuple[int, int] = (0, 1)) -> complex:
    """Expansion coefficient <n|sigma_i|n0><m|sigma_j|m0> for the reference pair."""
    for idx in (n, m):
        if idx not in (0, 1):
            raise ValueError(f"basis index must be 0 or 1, got {idx!r}")
    n0, m0 = _check_reference(reference)
    return complex(pauli(i)[n, n0] * pauli(j)[m, m0])


@lru_cache(maxsize=None)
def _q_array(reference: tuple[int, int]) -> np.ndarray:
    """Q[n, m, i, j] for a reference pair, read-only."""
    q = np.empty((2, 2, 4, 4), dtype=complex)
    for n in (0, 1):
        for m in (0, 1):
            for i in range(4):
                for j in range(4):
                    q[n, m, i, j] = q_tensor(n, m, i, j, reference)
    q.setflags(write=False)
    return q


def estimate_p(
    table: CorrelationTable,
    reference: tuple[int, int] = (0, 1),
    floor: float = P_FLOOR,
) -> float:
    """Population of the reference basis pair from the sigma_z correlations.

    For the default |01> reference this is the fraction of events with the
    beam-1 z-detector firing on h and the beam-2 one on v.  A value below
    the floor raises DegenerateReferenceError; |10>, |11> or |00> can then
    be used instead.
    """
    n0, m0 = _check_reference(reference)
    a = 1.0 if n0 == 0 else -1.0
    b = 1.0 if m0 == 0 else -1.0
    t = table.entries
    p = 0.25 * (1.0 + a * t[3, 0] + b * t[0, 3] + a * b * t[3, 3])
    p = min(max(p, 0.0), 1.0)
    if p < floor:
        raise DegenerateReferenceError(
            f"reference element {_REF_LABEL[reference]} has population {p:.3e} "
            f"below the floor {floor:.1e}; use another reference pair"
        )
    return float(p)


def select_reference(table: CorrelationTable, floor: float = P_FLOOR) -> tuple[int, int]:
    """First non-degenerate reference pair in the order |01>, |10>, |11>, |00>."""
    last_exc: Optional[Exception] = None
    for ref in REFERENCE_ORDER:
        try:
            estimate_p(table, ref, floor=floor)
        except DegenerateReferenceError as exc:
            last_exc = exc
            continue
        return ref
    raise DegenerateReferenceError(
        "all candidate reference pairs are degenerate"
    ) from last_exc


def reconstruct_state(
    table: CorrelationTable,
    reference: Optional[tuple[int, int]] = None,
    p_floor: float = P_FLOOR,
    truth: Optional[np.ndarray] = None,
) -> ReconstructionResult:
    """Coefficient matrix of a pure two-qubit state by linear inversion.

    With reference=None the pairs |01>, |10>, |11>, |00> are tried in order
    until one is non-degenerate.  The output is not renormalized; its norm
    is reported as a consistency diagnostic.
    """
    if reference is None:
        ref = select_reference(table, floor=p_floor)
    else:
        ref = _check_reference(reference)
    p = estimate_p(table, ref, floor=p_floor)

    psi = np.einsum("nmij,ij->nm", _q_array(ref), table.entries) / (4.0 * np.sqrt(p))
    ref_val = psi[ref]
    if abs(ref_val) > 0.0:
        psi = psi * np.exp(-1j * np.angle(ref_val))
    norm = float(np.sum(np.abs(psi) ** 2))
    diagnostics = {
        "p": p,
        "reference": _REF_LABEL[ref],
        "norm": norm,
    }
    if truth is not None:
        diagnostics["fidelity"] = _state_overlap(psi, truth)
    return ReconstructionResult(
        kind="input_state",
        matrix=psi,
        gauge=f"global phase fixed: element {_REF_LABEL[ref]} real non-negative",
        diagnostics=diagnostics,
    )


def _state_overlap(a: np.ndarray, b: np.ndarray) -> float:
    """Phase-invariant overlap |<a|b>| of two coefficient matrices."""
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    return float(abs(np.sum(a.conj() * b)) / (na * nb))


def faithfulness_check(psi: BipartiteState):
    """Full-rank flag and condition number of a pure probe state."""
    if not psi.pure:
        raise ValueError("faithfulness is defined for pure states")
    sv = np.linalg.svd(psi.coeffs, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    return FaithfulnessReport(full_rank=psi.full_rank, condition_number=cond)


@dataclass(frozen=True)
class FaithfulnessReport:
    full_rank: bool
    condition_number: float


def _require_faithful(psi_in: BipartiteState) -> float:
    if not psi_in.pure:
        raise ValueError("probe state must be pure")
    report = faithfulness_check(psi_in)
    if not report.full_rank:
        raise UnfaithfulInputError(report.condition_number)
    return report.condition_number


def reconstruct_unitary(
    t_out: CorrelationTable,
    psi_in: BipartiteState,
    reference: Optional[tuple[int, int]] = None,
    truth: Optional[np.ndarray] = None,
) -> ReconstructionResult:
    """Device matrix U from output correlations and a faithful probe state.

    The output coefficients M estimate U Psi up to a phase, so U = M
    Psi^{-1}.  The phase is fixed by rotating det(U) onto the positive real
    axis (principal branch); unitarity of the result is reported as a
    diagnostic, never enforced.
    """
    cond = _require_faithful(psi_in)
    state = reconstruct_state(t_out, reference)
    u = state.matrix @ inverse(psi_in.coeffs)
    d = np.linalg.det(u)
    if abs(d) > 1e-8:
        u = u * np.exp(-0.5j * np.angle(d))
        gauge = "global phase fixed: determinant rotated real positive"
    else:
        k = int(np.argmax(np.abs(u)))
        if abs(u.flat[k]) > 0.0:
            u = u * np.exp(-1j * np.angle(u.flat[k]))
        gauge = "global phase fixed: largest element rotated real positive"
    deviation = float(np.linalg.norm(dagger(u) @ u - np.eye(2)))
    diagnostics = {
        "p": state.diagnostics["p"],
        "reference": state.diagnostics["reference"],
        "condition_number": cond,
        "unitarity_deviation": deviation,
    }
    if truth is not None:
        diagnostics["fidelity"] = fidelity_unitary(u, truth)
    return ReconstructionResult(
        kind="device_unitary", matrix=u, gauge=gauge, diagnostics=diagnostics
    )


@lru_cache(maxsize=None)
def _pauli_pair_basis() -> np.ndarray:
    """(4, 4, 4, 4) stack of sigma_i x sigma_j, read-only."""
    b = np.empty((4, 4, 4, 4), dtype=complex)
    for i in range(4):
        for j in range(4):
            b[i, j] = tensor(pauli(i), pauli(j))
    b.setflags(write=False)
    return b


def density_from_correlations(table: CorrelationTable) -> np.ndarray:
    """Two-qubit density matrix from the full 16-entry Pauli expansion."""
    rho = np.einsum("ij,ijab->ab", table.entries, _pauli_pair_basis()) / 4.0
    return 0.5 * (rho + dagger(rho))


def reconstruct_choi(
    t_out: CorrelationTable,
    psi_in: BipartiteState,
    project_psd: bool = False,
    truth: Optional[np.ndarray] = None,
) -> ReconstructionResult:
    """Choi matrix of a general (possibly non-unitary) device.

    Stage 1 reconstructs the two-qubit output density matrix from the
    Pauli expansion; stage 2 undoes the probe on the untouched arm,
    C = (I x (Psi^T)^{-1}) rho (I x (Psi^*)^{-1}), and rescales to trace 2.
    Coincidence-normalized data cannot recover the occurrence probability
    of a trace-decreasing device, so that scale is reported as unknown.
    """
    cond = _require_faithful(psi_in)
    rho = density_from_correlations(t_out)
    psi = psi_in.coeffs
    left = tensor(np.eye(2), inverse(psi.T))
    right = tensor(np.eye(2), inverse(psi.conj()))
    choi = left @ rho @ right
    choi = 0.5 * (choi + dagger(choi))
    tr = float(np.trace(choi).real)
    if tr <= 0.0:
        raise QptError(f"reconstructed Choi matrix has non-positive trace {tr!r}")
    choi *= 2.0 / tr
    eigs = np.linalg.eigvalsh(choi)
    negativity = float(np.abs(eigs[eigs < 0.0]).sum())
    gauge = "Choi rescaled to trace 2 (deterministic-channel convention)"
    if project_psd:
        vals, vecs = np.linalg.eigh(choi)
        choi = (vecs * np.clip(vals, 0.0, None)) @ dagger(vecs)
        gauge += "; projected onto the PSD cone (nearest in Frobenius norm)"
    diagnostics = {
        "condition_number": cond,
        "choi_eigenvalues": ", ".join(f"{v:.12g}" for v in eigs),
        "min_eigenvalue": float(eigs[0]),
        "negativity": negativity,
        "occurrence_scale": "unrecoverable from coincidence-normalized data",
    }
    if truth is not None:
        diagnostics["choi_distance"] = distance_choi(choi, truth)
    return ReconstructionResult(
        kind="device_choi", matrix=choi, gauge=gauge, diagnostics=diagnostics
    )


def fidelity_unitary(a: np.ndarray, b: np.ndarray) -> float:
    """|Tr(A^dag B)| / d, invariant under global phases of either argument."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected matching square matrices, got {a.shape} and {b.shape}")
    return float(abs(np.trace(dagger(a) @ b)) / a.shape[0])


def distance_choi(c1: np.ndarray, c2: np.ndarray) -> float:
    """Half the trace norm of the difference of trace-normalized Choi matrices."""
    c1, c2 = np.asarray(c1), np.asarray(c2)
    if c1.shape != c2.shape or c1.ndim != 2 or c1.shape[0] != c1.shape[1]:
        raise ValueError(f"expected matching square matrices, got {c1.shape} and {c2.shape}")
    t1, t2 = np.trace(c1).real, np.trace(c2).real
    if abs(t1) < 1e-12 or abs(t2) < 1e-12:
        raise ValueError("Choi matrices must have non-zero trace")
    diff = c1 / t1 - c2 / t2
    diff = 0.5 * (diff + dagger(diff))
    return 0.5 * float(np.abs(np.linalg.eigvalsh(diff)).sum())


def bootstrap_errors(
    events: Sequence[EventRecord],
    estimator: Callable[[CorrelationTable], np.ndarray],
    n_resamples: int = 1000,
    seed: int = 0,
) -> BootstrapErrors:
    """Nonparametric bootstrap error bars for any table-based estimator.

    Events are resampled with replacement within each setting (the
    per-setting outcome counts are the sufficient statistic, so resampling
    draws multinomial counts), the estimator re-runs with its own gauge
    fix, and the element-wise standard deviations of real and imaginary
    parts are reported separately.  Resamples on which the estimator
    degenerates are redrawn and counted.
    """
    if n_resamples < 100:
        raise ValueError(f"need at least 100 resamples for stable error bars, got {n_resamples}")
    counts = events_to_counts(events)
    totals = counts.sum(axis=1)
    if np.any(totals == 0):
        raise IncompleteQuorumError(
            [SETTINGS[k] for k in range(len(SETTINGS)) if totals[k] == 0]
        )
    probs = counts / totals[:, None]
    rng = np.random.default_rng([seed])
    draws = np.stack(
        [rng.multinomial(totals[k], probs[k], size=n_resamples) for k in range(len(SETTINGS))],
        axis=1,
    )

    estimates = []
    redraws = 0
    budget = 100 * n_resamples
    for b in range(n_resamples):
        sample = draws[b]
        while True:
            try:
                estimates.append(np.asarray(estimator(table_from_counts(sample))))
                break
            except (IncompleteQuorumError, DegenerateReferenceError):
                redraws += 1
                budget -= 1
                if budget <= 0:
                    raise QptError("bootstrap exceeded its redraw budget; estimator degenerates too often")
                sample = np.stack(
                    [rng.multinomial(totals[k], probs[k]) for k in range(len(SETTINGS))]
                )
    if redraws > 0.01 * n_resamples:
        warnings.warn(
            f"bootstrap redrew {redraws} of {n_resamples} resamples (>1%)",
            RuntimeWarning,
            stacklevel=2,
        )
    stack = np.stack(estimates)
    return BootstrapErrors(
        real=stack.real.std(axis=0, ddof=1),
        imag=stack.imag.std(axis=0, ddof=1),
        n_resamples=n_resamples,
        redraws=redraws,
    )


# ---------------------------------------------------------------------------
# Two-qubit devices: one entangled pair and one Pauli-detector pair per qubit.
# Register order is (device qubit A, ancilla A, device qubit B, ancilla B).

CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)

# Move between (devA, ancA, devB, ancB) and (devA, devB, ancA, ancB): the
# permutation swaps the middle qubits and is its own inverse.
_GROUPING = (0, 2, 1, 3)


def two_pair_output_state(
    u4: np.ndarray, psi_a: BipartiteState, psi_b: BipartiteState
) -> np.ndarray:
    """16x16 output density matrix of a 2-qubit unitary fed by two pairs."""
    u4 = np.asarray(u4, dtype=complex)
    if u4.shape != (4, 4):
        raise ValueError(f"device unitary must be 4x4, got {u4.shape}")
    if not (psi_a.pure and psi_b.pure):
        raise ValueError("two-pair forward model expects pure probe states")
    vec = np.kron(double_ket(psi_a.coeffs), double_ket(psi_b.coeffs))
    op = permute_qubits(np.kron(u4, np.eye(4)), _GROUPING)
    out = op @ vec
    return np.outer(out, out.conj())


@lru_cache(maxsize=None)
def _pauli_quad_basis() -> np.ndarray:
    """(256, 16, 16) stack of sigma_i x sigma_j x sigma_k x sigma_l, read-only."""
    b = np.empty((256, 16, 16), dtype=complex)
    for idx in range(256):
        i, j, k, l = idx // 64, (idx // 16) % 4, (idx // 4) % 4, idx % 4
        b[idx] = np.kron(np.kron(np.kron(pauli(i), pauli(j)), pauli(k)), pauli(l))
    b.setflags(write=False)
    return b


def correlations_4party(rho: np.ndarray) -> np.ndarray:
    """(4,4,4,4) table of four-qubit Pauli expectations of a 16x16 state."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (16, 16):
        raise ValueError(f"expected a 16x16 density matrix, got {rho.shape}")
    t = np.einsum("ab,nba->n", rho, _pauli_quad_basis()).real
    return t.reshape(4, 4, 4, 4)


def reconstruct_two_qubit_device(
    table4: np.ndarray,
    psi_a: BipartiteState,
    psi_b: BipartiteState,
    truth: Optional[np.ndarray] = None,
) -> ReconstructionResult:
    """16x16 Choi matrix of a two-qubit device from 4-party correlations.

    ``table4[i,j,k,l]`` is the expectation of sigma_i x sigma_j x sigma_k x
    sigma_l over (device qubit A, ancilla A, device qubit B, ancilla B).
    The probe correction is applied on each ancilla factor; the result is
    rescaled to trace 4.
    """
    t = np.asarray(table4, dtype=float)
    if t.shape != (4, 4, 4, 4):
        raise ValueError(f"expected a 4x4x4x4 correlation table, got {t.shape}")
    if abs(t[0, 0, 0, 0] - 1.0) > 1e-9:
        raise ValueError("entry (0,0,0,0) of the correlation table must be 1")
    conds = (_require_faithful(psi_a), _require_faithful(psi_b))

    rho = np.einsum("n,nab->ab", t.reshape(-1), _pauli_quad_basis()) / 16.0
    rho = 0.5 * (rho + dagger(rho))
    rho = permute_qubits(rho, _GROUPING)

    big_psi = np.kron(psi_a.coeffs, psi_b.coeffs)
    left = np.kron(np.eye(4), inverse(big_psi.T))
    right = np.kron(np.eye(4), inverse(big_psi.conj()))
    choi = left @ rho @ right
    choi = 0.5 * (choi + dagger(choi))
    tr = float(np.trace(choi).real)
    if tr <= 0.0:
        raise QptError(f"reconstructed Choi matrix has non-positive trace {tr!r}")
    choi *= 4.0 / tr
    eigs = np.linalg.eigvalsh(choi)
    diagnostics = {
        "condition_numbers": conds,
        "min_eigenvalue": float(eigs[0]),
        "negativity": float(np.abs(eigs[eigs < 0.0]).sum()),
        "occurrence_scale": "unrecoverable from coincidence-normalized data",
    }
    if truth is not None:
        diagnostics["choi_distance"] = distance_choi(choi, truth)
    return ReconstructionResult(
        kind="device_choi",
        matrix=choi,
        gauge="Choi rescaled to trace 4 (deterministic-channel convention)",
        diagnostics=diagnostics,
    )


def choi_of_unitary(u: np.ndarray) -> np.ndarray:
    """Ground-truth Choi matrix |U>><<U| of a unitary of any qubit count."""
    return choi_from_kraus([np.asarray(u, dtype=complex)])
