"""Config-driven pipeline: simulate, log events, reconstruct, emit plot data.

A run is described by a flat JSON document; wave-plate angles are given in
units of pi so published parameters survive textually (0.45, -0.138, 0.29).
Identical configs (seeds included) produce byte-identical event logs and
result documents.

Result document layout: a ``key: value`` header block, one blank line, then
a comma-delimited element table ``element,part,estimate,error,theory`` in a
fixed row-major element order.  The plot-data command re-emits that table
on its own.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .algebra import BipartiteState, bell_state
from .channels import (
    QuantumChannel,
    amplitude_damping,
    depolarizing,
    identity_channel,
    propagate,
)
from .errors import ConfigError, DataError
from .experiment import (
    LETTER_AXES,
    SETTINGS,
    AXIS_LETTERS,
    ExperimentPlan,
    LossModel,
    MeasurementSetting,
    correlations_from_events,
    exact_correlations,
    read_event_log,
    run_experiment,
    write_event_log,
)
from .optics import DeviceSpec, compile_device
from .tomography import (
    CNOT,
    SWAP,
    bootstrap_errors,
    choi_of_unitary,
    correlations_4party,
    reconstruct_choi,
    reconstruct_state,
    reconstruct_two_qubit_device,
    reconstruct_unitary,
    select_reference,
    two_pair_output_state,
)

ESTIMATORS = ("unitary", "choi", "state_only")
TWO_QUBIT_DEVICES = {"cnot": CNOT, "swap": SWAP}
PRESETS = ("fig3", "fig4", "cnot", "depol")


@dataclass
class PipelineConfig:
    label: str
    input_state: BipartiteState
    input_state_b: Optional[BipartiteState]
    channel: Optional[QuantumChannel]
    two_qubit_unitary: Optional[np.ndarray]
    estimator: str
    exact: bool
    total: int
    seed: int
    eta: float
    allocation: Optional[dict]
    bootstrap_resamples: int
    bootstrap_seed: int
    out_events: str
    out_result: str
    out_plotdata: str

    @property
    def two_qubit(self) -> bool:
        return self.two_qubit_unitary is not None

    @property
    def truth_unitary(self) -> Optional[np.ndarray]:
        if self.channel is not None:
            return self.channel.unitary_matrix
        return None


def _complex_entry(v) -> complex:
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise ConfigError(f"complex entries must be [re, im] pairs, got {v!r}")
    return complex(float(v[0]), float(v[1]))


def _parse_state(field: str, spec) -> BipartiteState:
    if not isinstance(spec, dict):
        raise ConfigError(f"{field}: expected an object with 'bell' or 'coeffs'")
    if "bell" in spec:
        j = spec["bell"]
        if j not in (0, 1, 2, 3):
            raise ConfigError(f"{field}.bell: index must be in 0..3, got {j!r}")
        return bell_state(j)
    if "coeffs" in spec:
        rows = spec["coeffs"]
        try:
            m = np.array([[_complex_entry(v) for v in row] for row in rows])
            return BipartiteState.from_coeffs(m)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{field}.coeffs: {exc}") from None
    raise ConfigError(f"{field}: needs either 'bell' or 'coeffs'")


def _parse_device(spec) -> tuple[Optional[QuantumChannel], Optional[np.ndarray]]:
    """Returns (single-qubit channel, two-qubit unitary); exactly one is set."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError("device: expected an object with a 'type' field")
    kind = spec["type"]
    try:
        if kind == "waveplates":
            return compile_device(DeviceSpec.from_config(spec["plates"])), None
        if kind == "identity":
            return identity_channel(), None
        if kind == "depolarizing":
            return depolarizing(float(spec["p"])), None
        if kind == "amplitude_damping":
            return amplitude_damping(float(spec["gamma"])), None
        if kind == "kraus":
            ops = [
                np.array([[_complex_entry(v) for v in row] for row in op])
                for op in spec["ops"]
            ]
            return QuantumChannel.from_kraus(ops), None
        if kind in TWO_QUBIT_DEVICES:
            return None, TWO_QUBIT_DEVICES[kind]
    except ConfigError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"device ({kind}): {exc}") from None
    raise ConfigError(
        f"device.type: unknown type {kind!r}; expected waveplates, identity, "
        f"depolarizing, amplitude_damping, kraus, cnot or swap"
    )


def _parse_allocation(spec, total: int) -> dict:
    alloc = {}
    for key, n in spec.items():
        if len(key) != 2 or key[0] not in LETTER_AXES or key[1] not in LETTER_AXES:
            raise ConfigError(f"plan.allocation: keys must be axis pairs like 'xz', got {key!r}")
        if not isinstance(n, int) or n < 0:
            raise ConfigError(f"plan.allocation[{key!r}]: counts must be non-negative integers")
        alloc[MeasurementSetting(LETTER_AXES[key[0]], LETTER_AXES[key[1]])] = n
    if sum(alloc.values()) != total:
        raise ConfigError("plan.allocation: counts must sum to plan.total")
    return alloc


def parse_config(doc: dict) -> PipelineConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    for key in ("input_state", "device", "estimator"):
        if key not in doc:
            raise ConfigError(f"missing required config field {key!r}")

    estimator = doc["estimator"]
    if estimator not in ESTIMATORS:
        raise ConfigError(f"estimator: expected one of {ESTIMATORS}, got {estimator!r}")

    input_state = _parse_state("input_state", doc["input_state"])
    input_state_b = (
        _parse_state("input_state_b", doc["input_state_b"])
        if "input_state_b" in doc
        else None
    )
    channel, u4 = _parse_device(doc["device"])

    plan = doc.get("plan", {})
    if not isinstance(plan, dict):
        raise ConfigError("plan: expected an object")
    exact = bool(plan.get("exact", False))
    total = int(plan.get("total", 0))
    seed = int(plan.get("seed", 0))
    eta = float(plan.get("eta", 1.0))
    if not exact:
        if total <= 0:
            raise ConfigError("plan.total: a positive coincidence count is required")
        if not 0.0 < eta <= 1.0:
            raise ConfigError(f"plan.eta: efficiency must be in (0, 1], got {eta}")
    allocation = _parse_allocation(plan["allocation"], total) if "allocation" in plan else None

    if u4 is not None:
        if estimator != "choi":
            raise ConfigError("two-qubit devices require the choi estimator")
        if not exact:
            raise ConfigError(
                "two-qubit devices support exact statistics only (plan.exact = true)"
            )
    if estimator == "unitary" and channel is not None and not channel.is_unitary:
        warnings.warn(
            "unitary estimator configured for a non-unitary device; "
            "the reconstruction will report a large unitarity deviation",
            RuntimeWarning,
            stacklevel=2,
        )

    boot = doc.get("bootstrap", {})
    outputs = doc.get("outputs", {})
    label = str(doc.get("label", "run"))
    return PipelineConfig(
        label=label,
        input_state=input_state,
        input_state_b=input_state_b,
        channel=channel,
        two_qubit_unitary=u4,
        estimator=estimator,
        exact=exact,
        total=total,
        seed=seed,
        eta=eta,
        allocation=allocation,
        bootstrap_resamples=int(boot.get("resamples", 1000)),
        bootstrap_seed=int(boot.get("seed", 0)),
        out_events=str(outputs.get("events", f"{label}_events.csv")),
        out_result=str(outputs.get("result", f"{label}_result.txt")),
        out_plotdata=str(outputs.get("plotdata", f"{label}_plotdata.csv")),
    )


def load_config(path) -> PipelineConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return parse_config(doc)


def load_preset(name: str) -> PipelineConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    text = resources.files("qptsim").joinpath("presets", f"{name}.json").read_text("utf-8")
    return parse_config(json.loads(text))


def _resolve(out_dir, name: str) -> Path:
    p = Path(name)
    return p if p.is_absolute() else Path(out_dir) / p


def _output_state(cfg: PipelineConfig) -> BipartiteState:
    return propagate(cfg.channel, cfg.input_state)


def run_simulate(cfg: PipelineConfig, out_dir=".") -> Path:
    """Draw coincidence events and write the event log."""
    if cfg.exact:
        raise ConfigError("exact-statistics configs have no event log to simulate")
    loss = LossModel(cfg.eta) if cfg.eta < 1.0 else None
    allocation = cfg.allocation
    if allocation is None:
        plan = ExperimentPlan.uniform(cfg.total, cfg.seed, loss=loss)
    else:
        plan = ExperimentPlan(total=cfg.total, allocation=allocation, seed=cfg.seed, loss=loss)
    events = run_experiment(_output_state(cfg), plan)
    path = _resolve(out_dir, cfg.out_events)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_event_log(path, events, seed=cfg.seed, eta=cfg.eta)
    for setting in SETTINGS:
        n = plan.allocation.get(setting, 0)
        print(f"{AXIS_LETTERS[setting.axis1]},{AXIS_LETTERS[setting.axis2]}: {n} events")
    print(f"wrote {len(events)} events to {path}")
    return path


def _element_labels(kind: str, shape) -> list[str]:
    n = shape[0]
    if kind == "input_state":
        return [f"Psi{r}{c}" for r in range(n) for c in range(n)]
    if kind == "device_unitary":
        return [f"U{r}{c}" for r in range(n) for c in range(n)]
    if n <= 9:
        return [f"C{r}{c}" for r in range(n) for c in range(n)]
    return [f"C{r}_{c}" for r in range(n) for c in range(n)]


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _write_result(path: Path, kind: str, cfg: PipelineConfig, result, truth) -> None:
    lines = [
        f"kind: {kind}",
        f"label: {cfg.label}",
        f"estimator: {cfg.estimator}",
        f"exact: {str(cfg.exact).lower()}",
    ]
    if not cfg.exact:
        lines += [
            f"n_events: {cfg.total}",
            f"seed: {cfg.seed}",
            f"eta: {cfg.eta!r}",
            f"bootstrap_resamples: {cfg.bootstrap_resamples}",
            f"bootstrap_seed: {cfg.bootstrap_seed}",
        ]
    lines.append(f"gauge: {result.gauge}")
    for key, val in result.diagnostics.items():
        if isinstance(val, float):
            lines.append(f"{key}: {_fmt(val)}")
        else:
            lines.append(f"{key}: {val}")
    lines.append("")
    lines.append("element,part,estimate,error,theory")
    m = result.matrix
    if truth is not None:
        # The global phase is unmeasurable; rotate the theory values into the
        # estimate's gauge so the columns compare element by element.
        overlap = np.sum(np.conj(truth) * m)
        if abs(overlap) > 1e-12:
            truth = np.asarray(truth) * np.exp(1j * np.angle(overlap))
    labels = _element_labels(kind, m.shape)
    err = result.errors
    flat = m.reshape(-1)
    err_re = err.real.reshape(-1) if err is not None else None
    err_im = err.imag.reshape(-1) if err is not None else None
    truth_flat = np.asarray(truth).reshape(-1) if truth is not None else None
    for k, label in enumerate(labels):
        for part in ("re", "im"):
            est = flat[k].real if part == "re" else flat[k].imag
            if err is not None:
                e = err_re[k] if part == "re" else err_im[k]
                err_s = _fmt(float(e))
            else:
                err_s = ""
            if truth_flat is not None:
                t = truth_flat[k].real if part == "re" else truth_flat[k].imag
                truth_s = _fmt(float(t))
            else:
                truth_s = ""
            lines.append(f"{label},{part},{_fmt(float(est))},{err_s},{truth_s}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_reconstruct(cfg: PipelineConfig, out_dir=".") -> Path:
    """Estimate the configured quantity and write the result document."""
    psi_in = cfg.input_state

    if cfg.two_qubit:
        psi_b = cfg.input_state_b if cfg.input_state_b is not None else psi_in
        rho = two_pair_output_state(cfg.two_qubit_unitary, psi_in, psi_b)
        truth = choi_of_unitary(cfg.two_qubit_unitary)
        result = reconstruct_two_qubit_device(
            correlations_4party(rho), psi_in, psi_b, truth=truth
        )
        path = _resolve(out_dir, cfg.out_result)
        _write_result(path, result.kind, cfg, result, truth)
        print(f"wrote {result.kind} result to {path}")
        return path

    if cfg.exact:
        table = exact_correlations(_output_state(cfg))
        events = None
    else:
        events_path = _resolve(out_dir, cfg.out_events)
        if not events_path.exists():
            raise DataError(f"event log {events_path} does not exist; run simulate first")
        events, _header = read_event_log(events_path)
        table = correlations_from_events(events)

    if cfg.estimator == "state_only":
        out = _output_state(cfg)
        truth = out.coeffs if out.pure else None
        ref = select_reference(table)
        result = reconstruct_state(table, ref, truth=truth)
        estimate = lambda t: reconstruct_state(t, ref).matrix
    elif cfg.estimator == "unitary":
        truth = cfg.truth_unitary
        ref = select_reference(table)
        result = reconstruct_unitary(table, psi_in, ref, truth=truth)
        estimate = lambda t: reconstruct_unitary(t, psi_in, ref).matrix
    else:
        truth = cfg.channel.choi if cfg.channel is not None else None
        result = reconstruct_choi(table, psi_in, truth=truth)
        estimate = lambda t: reconstruct_choi(t, psi_in).matrix

    if events is not None:
        result.errors = bootstrap_errors(
            events, estimate, n_resamples=cfg.bootstrap_resamples, seed=cfg.bootstrap_seed
        )

    path = _resolve(out_dir, cfg.out_result)
    _write_result(path, result.kind, cfg, result, truth)
    print(f"wrote {result.kind} result to {path}")
    return path


def run_plotdata(cfg: PipelineConfig, out_dir=".") -> Path:
    """Extract the element table of a result document as a standalone CSV."""
    result_path = _resolve(out_dir, cfg.out_result)
    if not result_path.exists():
        raise DataError(f"result document {result_path} does not exist; run reconstruct first")
    lines = result_path.read_text(encoding="utf-8").splitlines()
    try:
        start = lines.index("") + 1
    except ValueError:
        raise DataError(f"{result_path}: no element table found") from None
    table = lines[start:]
    if not table or table[0] != "element,part,estimate,error,theory":
        raise DataError(f"{result_path}: malformed element table header")
    path = _resolve(out_dir, cfg.out_plotdata)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(table) + "\n", encoding="utf-8")
    print(f"wrote {len(table) - 1} plot rows to {path}")
    return path


def run_pipeline(cfg: PipelineConfig, out_dir=".") -> dict[str, Path]:
    """simulate (unless exact), reconstruct, plotdata; one seed end to end."""
    paths = {}
    if not cfg.exact:
        paths["events"] = run_simulate(cfg, out_dir)
    paths["result"] = run_reconstruct(cfg, out_dir)
    paths["plotdata"] = run_plotdata(cfg, out_dir)
    return paths
