"""Linear-inversion estimators, bootstrap errors and the n=2 extension."""

import numpy as np
import pytest
from scipy.stats import unitary_group

from qptsim import (
    CNOT,
    SWAP,
    BipartiteState,
    CorrelationTable,
    DegenerateReferenceError,
    ExperimentPlan,
    UnfaithfulInputError,
    bell_state,
    bootstrap_errors,
    choi_of_unitary,
    correlations_4party,
    correlations_from_events,
    density_from_correlations,
    depolarizing,
    distance_choi,
    double_ket,
    estimate_p,
    exact_correlations,
    faithfulness_check,
    fidelity_unitary,
    identity_channel,
    mat_close,
    pauli,
    propagate,
    q_tensor,
    reconstruct_choi,
    reconstruct_state,
    reconstruct_two_qubit_device,
    reconstruct_unitary,
    run_experiment,
    select_reference,
    two_pair_output_state,
    unitary_channel,
)

TRIPLET = bell_state(1)
RT2 = np.sqrt(2.0)


def mixed_table():
    t = np.zeros((4, 4))
    t[0, 0] = 1.0
    return CorrelationTable(entries=t)


def random_full_rank_state(rng, min_sv=0.2):
    while True:
        g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        g /= np.linalg.norm(g)
        if np.linalg.svd(g, compute_uv=False)[-1] > min_sv:
            return BipartiteState.from_coeffs(g)


def up_to_phase(a, b, tol=1e-10):
    overlap = abs(np.sum(np.conj(a) * b)) / (np.linalg.norm(a) * np.linalg.norm(b))
    return overlap >= 1.0 - tol


def test_q_tensor_values():
    assert q_tensor(0, 1, 0, 0) == 1.0
    assert q_tensor(0, 1, 3, 3) == -1.0
    # <1|sigma_y|0> = i and <0|sigma_y|1> = -i
    assert q_tensor(1, 0, 2, 2) == pytest.approx(1.0)
    assert q_tensor(0, 0, 1, 2, reference=(1, 1)) == pytest.approx(1.0 * (-1j))


def test_q_tensor_range_checks():
    with pytest.raises(ValueError):
        q_tensor(2, 0, 0, 0)
    with pytest.raises(ValueError):
        q_tensor(0, 0, 5, 0)
    with pytest.raises(ValueError):
        q_tensor(0, 0, 0, 0, reference=(2, 0))
    with pytest.raises(ValueError):
        estimate_p(exact_correlations(TRIPLET), reference=(0, 2))


def test_estimate_p_triplet():
    assert estimate_p(exact_correlations(TRIPLET)) == pytest.approx(0.5, abs=1e-12)


def test_estimate_p_degenerate_for_phi_plus():
    with pytest.raises(DegenerateReferenceError):
        estimate_p(exact_correlations(bell_state(0)))


def test_estimate_p_maximally_mixed():
    assert estimate_p(mixed_table()) == pytest.approx(0.25)


def test_reconstruct_state_triplet_exact():
    res = reconstruct_state(exact_correlations(TRIPLET))
    assert mat_close(res.matrix, pauli(1) / RT2, tol=1e-10)
    assert res.diagnostics["reference"] == "|01>"
    assert res.diagnostics["p"] == pytest.approx(0.5, abs=1e-12)
    assert res.diagnostics["norm"] == pytest.approx(1.0, abs=1e-10)
    assert res.kind == "input_state"


def test_reconstruct_state_explicit_reference():
    # sigma_z Bell state via the |00> reference comes out exactly on phase
    res = reconstruct_state(exact_correlations(bell_state(3)), reference=(0, 0))
    assert mat_close(res.matrix, pauli(3) / RT2, tol=1e-10)


def test_reconstruct_state_auto_retry():
    res = reconstruct_state(exact_correlations(bell_state(0)))
    assert res.diagnostics["reference"] == "|11>"
    assert up_to_phase(res.matrix, pauli(0) / RT2)
    with pytest.raises(DegenerateReferenceError):
        reconstruct_state(exact_correlations(bell_state(0)), reference=(0, 1))


def test_select_reference_all_degenerate():
    # a product state |00> leaves only the (0,0) reference populated
    table = exact_correlations(BipartiteState.from_coeffs(np.diag([1.0, 0.0])))
    assert select_reference(table) == (0, 0)


def test_reference_independence_random_states():
    rng = np.random.default_rng(71)
    for _ in range(30):
        psi = random_full_rank_state(rng)
        table = exact_correlations(psi)
        results = []
        for ref in ((0, 1), (1, 0), (1, 1)):
            try:
                results.append(reconstruct_state(table, reference=ref).matrix)
            except DegenerateReferenceError:
                continue
        assert len(results) >= 2
        for other in results[1:]:
            assert up_to_phase(results[0], other, tol=1e-9)


def test_reconstruct_state_finite_sample_within_3_sigma():
    plan = ExperimentPlan.uniform(8000, seed=20)
    events = run_experiment(TRIPLET, plan)
    table = correlations_from_events(events)
    ref = select_reference(table)
    res = reconstruct_state(table, ref)
    errs = bootstrap_errors(events, lambda t: reconstruct_state(t, ref).matrix, 400, seed=77)
    truth = pauli(1) / RT2  # reference element already real positive
    for k in range(4):
        diff = res.matrix.reshape(-1)[k] - truth.reshape(-1)[k]
        assert abs(diff.real) <= 3.0 * max(errs.real.reshape(-1)[k], 1e-12)
        assert abs(diff.imag) <= 3.0 * max(errs.imag.reshape(-1)[k], 1e-12)


def test_reconstruct_unitary_identity():
    res = reconstruct_unitary(exact_correlations(TRIPLET), TRIPLET)
    assert fidelity_unitary(res.matrix, np.eye(2)) >= 1.0 - 1e-10
    assert res.diagnostics["unitarity_deviation"] < 1e-10
    assert res.kind == "device_unitary"


def test_round_trip_200_random_devices():
    # exact statistics: reconstruct arbitrary unitaries through arbitrary
    # full-rank probes at fidelity 1 - 1e-9
    rng = np.random.default_rng(73)
    for _ in range(200):
        u = unitary_group.rvs(2, random_state=rng)
        psi = random_full_rank_state(rng)
        out = propagate(unitary_channel(u), psi)
        res = reconstruct_unitary(exact_correlations(out), psi)
        assert fidelity_unitary(res.matrix, u) >= 1.0 - 1e-9


def test_reconstruct_unitary_gauge_invariance():
    table1 = exact_correlations(propagate(unitary_channel(pauli(2)), TRIPLET))
    phased = np.exp(0.31j) * pauli(2)
    table2 = exact_correlations(propagate(unitary_channel(phased), TRIPLET))
    a = reconstruct_unitary(table1, TRIPLET).matrix
    b = reconstruct_unitary(table2, TRIPLET).matrix
    assert mat_close(a, b, tol=1e-12)


def test_reconstruct_unitary_rejects_unfaithful_probe():
    product = BipartiteState.from_coeffs(np.diag([1.0, 0.0]))
    with pytest.raises(UnfaithfulInputError) as err:
        reconstruct_unitary(exact_correlations(product), product)
    assert err.value.condition_number == np.inf
    with pytest.raises(ValueError):
        reconstruct_unitary(mixed_table(), BipartiteState.from_density(np.eye(4) / 4))


def test_density_from_correlations_roundtrip():
    rng = np.random.default_rng(79)
    u = unitary_group.rvs(4, random_state=rng)
    rho = u @ np.diag([0.4, 0.3, 0.2, 0.1]) @ u.conj().T
    state = BipartiteState.from_density(rho)
    assert mat_close(density_from_correlations(exact_correlations(state)), rho, tol=1e-10)


def test_reconstruct_choi_identity():
    res = reconstruct_choi(exact_correlations(TRIPLET), TRIPLET)
    assert mat_close(res.matrix, identity_channel().choi, tol=1e-10)
    assert res.diagnostics["occurrence_scale"].startswith("unrecoverable")


def test_reconstruct_choi_depolarizing():
    ch = depolarizing(0.3)
    out = propagate(ch, TRIPLET)
    res = reconstruct_choi(exact_correlations(out), TRIPLET, truth=ch.choi)
    assert np.allclose(np.linalg.eigvalsh(res.matrix), [0.15, 0.15, 0.15, 1.55], atol=1e-9)
    assert res.diagnostics["choi_distance"] < 1e-9


def test_choi_unitary_consistent_with_unitary_estimator():
    rng = np.random.default_rng(83)
    for _ in range(50):
        u = unitary_group.rvs(2, random_state=rng)
        psi = random_full_rank_state(rng)
        table = exact_correlations(propagate(unitary_channel(u), psi))
        res_c = reconstruct_choi(table, psi)
        vals, vecs = np.linalg.eigh(res_c.matrix)
        dominant = np.sqrt(vals[-1]) * vecs[:, -1].reshape(2, 2)
        res_u = reconstruct_unitary(table, psi)
        assert vals[-1] == pytest.approx(2.0, abs=1e-8)
        assert fidelity_unitary(dominant, res_u.matrix) >= 1.0 - 1e-8


def test_reconstruct_choi_psd_projection_flag():
    # a unitary device has three exact zero Choi eigenvalues, so shot noise
    # drives the raw linear inversion slightly negative
    plan = ExperimentPlan.uniform(2000, seed=31)
    table = correlations_from_events(run_experiment(TRIPLET, plan))
    raw = reconstruct_choi(table, TRIPLET)
    projected = reconstruct_choi(table, TRIPLET, project_psd=True)
    assert raw.diagnostics["min_eigenvalue"] < 0
    assert raw.diagnostics["negativity"] > 0
    assert np.linalg.eigvalsh(projected.matrix)[0] >= -1e-12
    assert "PSD" in projected.gauge


def test_bootstrap_deterministic_and_seed_sensitive():
    events = run_experiment(TRIPLET, ExperimentPlan.uniform(2000, seed=3))
    est = lambda t: reconstruct_state(t, (0, 1)).matrix
    a = bootstrap_errors(events, est, 150, seed=5)
    b = bootstrap_errors(events, est, 150, seed=5)
    c = bootstrap_errors(events, est, 150, seed=6)
    assert np.array_equal(a.real, b.real) and np.array_equal(a.imag, b.imag)
    assert not np.array_equal(a.real, c.real)
    assert a.n_resamples == 150


def test_bootstrap_requires_100_resamples():
    events = run_experiment(TRIPLET, ExperimentPlan.uniform(900, seed=3))
    with pytest.raises(ValueError):
        bootstrap_errors(events, lambda t: reconstruct_state(t).matrix, 1)


def test_bootstrap_error_scaling():
    # element errors scale like a / sqrt(N): the fitted prefactor is stable
    # across N within 20%
    prefactors = []
    for n in (2000, 8000, 32000):
        levels = []
        for seed in range(4):
            events = run_experiment(TRIPLET, ExperimentPlan.uniform(n, seed=100 + seed))
            ref = (0, 1)
            errs = bootstrap_errors(
                events, lambda t: reconstruct_state(t, ref).matrix, 200, seed=seed
            )
            levels.append(0.5 * (errs.real.mean() + errs.imag.mean()))
        prefactors.append(np.mean(levels) * np.sqrt(n))
    assert max(prefactors) / min(prefactors) < 1.2


def test_fidelity_unitary_phase_invariance():
    rng = np.random.default_rng(89)
    u = unitary_group.rvs(2, random_state=rng)
    for alpha in (0.0, 0.4, -2.2):
        assert fidelity_unitary(u, np.exp(1j * alpha) * u) == pytest.approx(1.0, abs=1e-12)
    assert fidelity_unitary(np.eye(2), pauli(1)) == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(ValueError):
        fidelity_unitary(np.eye(2), np.eye(4))


def test_distance_choi_depolarizing_family():
    for p in (0.1, 0.3, 0.8):
        d = distance_choi(identity_channel().choi, depolarizing(p).choi)
        assert d == pytest.approx(3.0 * p / 4.0, abs=1e-12)
    with pytest.raises(ValueError):
        distance_choi(np.eye(4), np.zeros((4, 4)))


def test_faithfulness_report():
    rep = faithfulness_check(TRIPLET)
    assert rep.full_rank and rep.condition_number == pytest.approx(1.0, abs=1e-12)
    eps = 0.1
    skew = BipartiteState.from_coeffs(np.diag([np.cos(eps), np.sin(eps)]))
    rep = faithfulness_check(skew)
    assert rep.full_rank
    assert rep.condition_number == pytest.approx(9.966644423259238, rel=1e-12)
    rep = faithfulness_check(BipartiteState.from_coeffs(np.diag([1.0, 0.0])))
    assert not rep.full_rank


def test_two_qubit_identity_device():
    rho = two_pair_output_state(np.eye(4), TRIPLET, TRIPLET)
    res = reconstruct_two_qubit_device(correlations_4party(rho), TRIPLET, TRIPLET)
    assert mat_close(res.matrix, choi_of_unitary(np.eye(4)), tol=1e-10)


@pytest.mark.parametrize("gate", [CNOT, SWAP], ids=["cnot", "swap"])
def test_two_qubit_gate_reconstruction(gate):
    rho = two_pair_output_state(gate, TRIPLET, TRIPLET)
    res = reconstruct_two_qubit_device(correlations_4party(rho), TRIPLET, TRIPLET)
    truth = choi_of_unitary(gate)
    assert distance_choi(res.matrix, truth) < 1e-9
    vals, vecs = np.linalg.eigh(res.matrix)
    assert vals[-1] == pytest.approx(4.0, abs=1e-9)  # rank one, trace 4
    assert abs(vals[-2]) < 1e-9
    overlap = abs(vecs[:, -1].conj() @ double_ket(gate)) / np.linalg.norm(double_ket(gate))
    assert overlap == pytest.approx(1.0, abs=1e-9)


def test_two_qubit_mixed_probes():
    # different Bell states on the two pairs still reconstruct the gate
    psi_b = bell_state(3)
    rho = two_pair_output_state(CNOT, TRIPLET, psi_b)
    res = reconstruct_two_qubit_device(correlations_4party(rho), TRIPLET, psi_b)
    assert distance_choi(res.matrix, choi_of_unitary(CNOT)) < 1e-9


def test_two_qubit_rejects_unfaithful_probe():
    product = BipartiteState.from_coeffs(np.diag([1.0, 0.0]))
    rho = two_pair_output_state(CNOT, TRIPLET, product)
    with pytest.raises(UnfaithfulInputError):
        reconstruct_two_qubit_device(correlations_4party(rho), TRIPLET, product)


def test_two_qubit_table_validation():
    with pytest.raises(ValueError):
        reconstruct_two_qubit_device(np.zeros((4, 4, 4, 4)), TRIPLET, TRIPLET)
