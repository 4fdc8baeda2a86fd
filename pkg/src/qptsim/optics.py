"""Wave-plate Jones calculus and the Pauli measurement optics.

A wave-plate with retardation phase phi and orientation angle theta acts on
the (h, v) mode amplitudes with the Jones matrix

    W = z+ I + z- (c sigma_z + s sigma_x),
    z+- = (1 +- e^{i phi}) / 2,  c = cos 2 theta,  s = sin 2 theta.

The induced rotation of Pauli expectation vectors is always derived
numerically from W as R_ab = Re Tr[sigma_a W sigma_b W^dag] / 2.  The
closed-form 3x3 matrix often quoted for this rotation has an entry at row
1, column 2 (1-based) that is inconsistent with orthogonality: it reads
-c cos(phi) where the derivation gives -c sin(phi).  Deriving from W keeps
R in SO(3) by construction; a regression test records the disagreement.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .algebra import TOL, dagger, pauli
from .channels import QuantumChannel

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class WavePlate:
    """Retardation phase phi (= 2 pi delta / lambda) and orientation theta, radians."""

    phi: float
    theta: float

    def __post_init__(self):
        if not (np.isfinite(self.phi) and np.isfinite(self.theta)):
            raise ValueError("wave-plate angles must be finite")
        object.__setattr__(self, "phi", float(self.phi) % TWO_PI)
        object.__setattr__(self, "theta", float(self.theta))


@dataclass(frozen=True)
class DeviceSpec:
    """An optical device built from a stack of wave-plates.

    Light traverses the plates in list order, so the compiled Jones matrix
    is the reversed product W_k ... W_2 W_1.
    """

    plates: tuple[WavePlate, ...]
    label: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "plates", tuple(self.plates))
        if len(self.plates) == 0:
            raise ValueError("device needs at least one wave-plate")

    def to_config(self) -> list[dict]:
        """Serialize with angles in units of pi (exact textual form)."""
        return [
            {"phi_over_pi": p.phi / np.pi, "theta_over_pi": p.theta / np.pi}
            for p in self.plates
        ]

    @classmethod
    def from_config(cls, items: Sequence[dict], label: Optional[str] = None) -> "DeviceSpec":
        plates = []
        for it in items:
            plates.append(
                WavePlate(
                    phi=float(it["phi_over_pi"]) * np.pi,
                    theta=float(it["theta_over_pi"]) * np.pi,
                )
            )
        return cls(plates=tuple(plates), label=label)


def waveplate_jones(p: WavePlate) -> np.ndarray:
    """2x2 Jones matrix of a wave-plate acting on the (h, v) amplitudes."""
    zp = 0.5 * (1.0 + np.exp(1j * p.phi))
    zm = 0.5 * (1.0 - np.exp(1j * p.phi))
    c = np.cos(2.0 * p.theta)
    s = np.sin(2.0 * p.theta)
    return np.array([[zp + c * zm, s * zm], [s * zm, zp - c * zm]])


def waveplate_bloch(p: WavePlate) -> np.ndarray:
    """3x3 rotation of Pauli expectation vectors induced by the plate.

    Derived from the Jones matrix, never from the printed closed form (see
    module docstring); the result is orthogonal with det +1.
    """
    w = waveplate_jones(p)
    wd = dagger(w)
    r = np.empty((3, 3))
    for a in range(3):
        for b in range(3):
            r[a, b] = 0.5 * np.trace(pauli(a + 1) @ w @ pauli(b + 1) @ wd).real
    return r


def compile_device(d: DeviceSpec) -> QuantumChannel:
    """Unitary channel of a wave-plate stack (first-traversed plate applied first)."""
    u = np.eye(2, dtype=complex)
    for p in d.plates:
        u = waveplate_jones(p) @ u
    return QuantumChannel.from_kraus([u])


# Pre-plates that turn the h/v analyzer into a sigma_x or sigma_y detector:
# a half-wave plate at pi/8 and a quarter-wave plate at pi/4.
_PRE_PLATES = {
    1: WavePlate(phi=np.pi, theta=np.pi / 8.0),
    2: WavePlate(phi=np.pi / 2.0, theta=np.pi / 4.0),
    3: None,
}


@dataclass(frozen=True, eq=False)
class PauliDetector:
    """A polarizing beam splitter, optionally preceded by one wave-plate.

    The raw outcome is +1 when the horizontal-arm detector fires and -1 for
    the vertical arm; ``sign`` corrects the raw outcome so that reported
    outcomes always estimate +sigma_axis.
    """

    axis: int
    pre_plate: Optional[WavePlate]
    sign: int

    @property
    def observable(self) -> np.ndarray:
        """Heisenberg transform of the analyzer: W^dag sigma_z W times sign."""
        if self.pre_plate is None:
            obs = pauli(3)
        else:
            w = waveplate_jones(self.pre_plate)
            obs = dagger(w) @ pauli(3) @ w
        return self.sign * obs


def detector_for(axis: int) -> PauliDetector:
    """Detector measuring +sigma_axis for axis in {1, 2, 3}.

    The sign correction is computed from the pre-plate's adjoint action, not
    assumed; with this package's Pauli convention it comes out +1 for all
    three axes.
    """
    if axis not in (1, 2, 3):
        raise ValueError(f"detector axis must be 1, 2 or 3, got {axis!r}")
    plate = _PRE_PLATES[axis]
    if plate is None:
        raw = pauli(3)
    else:
        w = waveplate_jones(plate)
        raw = dagger(w) @ pauli(3) @ w
    overlap = 0.5 * np.trace(pauli(axis) @ raw).real
    sign = int(round(overlap))
    if abs(overlap - sign) > TOL.psd_slack or sign not in (-1, 1):
        raise RuntimeError(f"pre-plate for axis {axis} does not realize a Pauli measurement")
    return PauliDetector(axis=axis, pre_plate=plate, sign=sign)


def outcome_probabilities(det: PauliDetector, rho: np.ndarray) -> dict[int, float]:
    """Probabilities of the corrected outcomes +1 / -1 on a one-qubit state."""
    rho = np.asarray(rho, dtype=complex)
    if det.pre_plate is not None:
        w = waveplate_jones(det.pre_plate)
        rho = w @ rho @ dagger(w)
    p_h = float(rho[0, 0].real)
    p_v = float(rho[1, 1].real)
    if det.sign == 1:
        return {1: p_h, -1: p_v}
    return {1: p_v, -1: p_h}
