"""Entanglement-assisted tomography of small polarization-qubit devices.

Feed one arm of an entangled photon pair through the device under test,
measure Pauli correlations between the two arms in coincidence, and invert
the measured correlation table to recover the input state, the device's
unitary matrix, or its full Choi matrix.  The package bundles the forward
Monte Carlo model of the optical experiment, the linear-inversion
estimators with bootstrap error bars, and a config-driven CLI.
"""

from .algebra import (
    TOL,
    BipartiteState,
    Tolerances,
    bell_state,
    dagger,
    det,
    double_ket,
    eigen_hermitian,
    from_double_ket,
    inverse,
    mat_close,
    partial_trace,
    pauli,
    permute_qubits,
    tensor,
)
from .channels import (
    QuantumChannel,
    amplitude_damping,
    apply_channel,
    choi_from_kraus,
    depolarizing,
    identity_channel,
    kraus_from_choi,
    propagate,
    unitary_channel,
)
from .errors import (
    ConfigError,
    DataError,
    DegenerateReferenceError,
    IncompleteQuorumError,
    NotCompletelyPositiveError,
    NullEventError,
    QptError,
    UnfaithfulInputError,
)
from .experiment import (
    AXES,
    OUTCOMES,
    SETTINGS,
    CorrelationTable,
    EventRecord,
    ExperimentPlan,
    LossModel,
    MeasurementSetting,
    correlations_from_events,
    exact_correlations,
    joint_probs,
    read_event_log,
    run_experiment,
    write_event_log,
)
from .optics import (
    DeviceSpec,
    PauliDetector,
    WavePlate,
    compile_device,
    detector_for,
    outcome_probabilities,
    waveplate_bloch,
    waveplate_jones,
)
from .tomography import (
    CNOT,
    SWAP,
    BootstrapErrors,
    FaithfulnessReport,
    ReconstructionResult,
    bootstrap_errors,
    choi_of_unitary,
    correlations_4party,
    density_from_correlations,
    distance_choi,
    estimate_p,
    faithfulness_check,
    fidelity_unitary,
    q_tensor,
    reconstruct_choi,
    reconstruct_state,
    reconstruct_two_qubit_device,
    reconstruct_unitary,
    select_reference,
    two_pair_output_state,
)

__version__ = "0.1.0"
