"""Ideal gate semantics on the joint electron (x) collective-spin space.

State layout: amplitude vector of length 2(2I+1), electron factor first with
basis order (|down>, |up>) and Sz|up> = +1/2 |up>, ensemble Dicke levels
ordered M = I .. -I as in `collective`.

Angle conventions (fixed by convention tests):
  - CondR / Ux / Uy are Pauli-style rotations exp(-i (theta/2) sigma), so
    theta = pi flips the electron.
  - Theta, Pi and FreeEvolve use the spin operators Sz = sigma_z/2 etc.
  - EnsR(axis, theta) = exp(-i theta I_axis), identical to collective.rotate.

Times are in units of 1/a (the collinear hyperfine coupling).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .collective import check_spin_length, dim, m_index, m_values, op_collective, rotation_matrix

__all__ = [
    "JointState",
    "GateOp",
    "Circuit",
    "theta_gate",
    "cond_r",
    "flip_flop",
    "flip_flip",
    "ux",
    "uy",
    "ens_r",
    "pi_pulse",
    "free_evolve",
    "reset_electron",
    "gate_unitary",
    "pi_gate",
    "apply_gate",
    "apply_gate_density",
    "apply_circuit",
    "apply_circuit_density",
    "electron_reduced",
    "ensemble_reduced",
]

_AXES = ("x", "y", "z")


@dataclass
class JointState:
    """Pure state of electron (x) ensemble, shape (2(2I+1),)."""

    spin_i: float
    amp: np.ndarray

    def __post_init__(self):
        self.spin_i = check_spin_length(self.spin_i)
        self.amp = np.asarray(self.amp, dtype=complex)
        if self.amp.shape != (2 * dim(self.spin_i),):
            raise ValueError("joint amplitude vector has wrong length")

    @classmethod
    def product(cls, spin_i: float, electron: np.ndarray, ensemble: np.ndarray) -> "JointState":
        return cls(spin_i, np.kron(np.asarray(electron, dtype=complex),
                                   np.asarray(ensemble, dtype=complex)))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amp))

    def normalized(self) -> "JointState":
        return JointState(self.spin_i, self.amp / self.norm)

    def inner(self, other: "JointState") -> complex:
        return complex(np.vdot(self.amp, other.amp))

    def fidelity(self, other: "JointState") -> float:
        return abs(self.inner(other)) ** 2

    def density(self) -> np.ndarray:
        return np.outer(self.amp, self.amp.conj())

    def block(self, electron: int) -> np.ndarray:
        """Ensemble amplitudes conditioned on the electron level (0=down, 1=up)."""
        d = dim(self.spin_i)
        return self.amp[electron * d:(electron + 1) * d]


def electron_reduced(rho: np.ndarray, spin_i: float) -> np.ndarray:
    d = dim(spin_i)
    r = rho.reshape(2, d, 2, d)
    return np.einsum("iaja->ij", r)


def ensemble_reduced(rho: np.ndarray, spin_i: float) -> np.ndarray:
    d = dim(spin_i)
    r = rho.reshape(2, d, 2, d)
    return np.einsum("iaib->ab", r)


@dataclass(frozen=True)
class GateOp:
    """One primitive gate; immutable and hashable so unitaries can be cached."""

    kind: str
    axis: str = ""
    angle: float = 0.0
    t: float = 0.0
    m: float = 0.0
    m_set: tuple = ()
    params: tuple = ()  # extra (name, value) pairs, e.g. FreeEvolve frequencies

    def param(self, name: str, default: float = 0.0) -> float:
        for key, val in self.params:
            if key == name:
                return val
        return default

    def dagger(self) -> "GateOp":
        if self.kind == "ResetElectron":
            raise ValueError("the electron reset channel has no inverse")
        return GateOp(self.kind, self.axis, -self.angle, -self.t, self.m,
                      self.m_set, self.params)

    def to_dict(self) -> dict:
        out = {"op": self.kind}
        if self.axis:
            out["axis"] = self.axis
        if self.angle:
            out["angle"] = self.angle
        if self.t:
            out["t"] = self.t
        if self.kind in ("FlipFlop", "FlipFlip"):
            out["M"] = self.m
        if self.m_set:
            out["M_set"] = list(self.m_set)
        for key, val in self.params:
            out[key] = val
        return out

    @staticmethod
    def from_dict(d: dict) -> "GateOp":
        kind = d["op"]
        extra = tuple(sorted((k, v) for k, v in d.items()
                             if k not in ("op", "axis", "angle", "t", "M", "M_set")))
        return GateOp(kind, d.get("axis", ""), d.get("angle", 0.0), d.get("t", 0.0),
                      d.get("M", 0.0), tuple(d.get("M_set", ())), extra)


def theta_gate(angle: float) -> GateOp:
    """Theta(theta) = exp(-i theta Sz Ix): ensemble x-rotation conditioned on Sz."""
    return GateOp("Theta", angle=angle)


def cond_r(axis: str, angle: float, m_set) -> GateOp:
    """Electron rotation exp(-i (angle/2) sigma_axis) on the levels in m_set."""
    if axis not in _AXES:
        raise ValueError("axis must be one of x, y, z")
    return GateOp("CondR", axis=axis, angle=angle, m_set=tuple(sorted(m_set)))


def flip_flop(t: float, m: float) -> GateOp:
    """Resonant excitation exchange on the block {|down, M+1>, |up, M>}."""
    return GateOp("FlipFlop", t=t, m=m)


def flip_flip(t: float, m: float) -> GateOp:
    """Resonant co-excitation on the block {|down, M-1>, |up, M>}."""
    return GateOp("FlipFlip", t=t, m=m)


def ux(angle: float) -> GateOp:
    return GateOp("Ux", angle=angle)


def uy(angle: float) -> GateOp:
    return GateOp("Uy", angle=angle)


def ens_r(axis: str, angle: float) -> GateOp:
    if axis not in _AXES:
        raise ValueError("axis must be one of x, y, z")
    return GateOp("EnsR", axis=axis, angle=angle)


def pi_pulse(phi: float) -> GateOp:
    """Pi(phi): ensemble exp(-i phi Ix) iff the electron is |down>."""
    return GateOp("Pi", angle=phi)


def free_evolve(t: float, omega_e: float = 0.0, omega_n: float = 0.0,
                a: float = 0.0, a_nc: float = 0.0) -> GateOp:
    """exp(-i H t), H = omega_e Sz + omega_n Iz + a Sz Iz (+ a_nc Sz Ix)."""
    return GateOp("FreeEvolve", t=t, params=(
        ("a", a), ("a_nc", a_nc), ("omega_e", omega_e), ("omega_n", omega_n)))


def reset_electron() -> GateOp:
    """Trace out the electron and reinitialize it to |down> (a channel)."""
    return GateOp("ResetElectron")


def _pauli_rot(axis: str, angle: float) -> np.ndarray:
    """exp(-i (angle/2) sigma_axis) in the (down, up) basis."""
    c, s = np.cos(angle / 2.0), np.sin(angle / 2.0)
    if axis == "x":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if axis == "y":
        return np.array([[c, -s], [s, c]])
    return np.array([[np.exp(1j * angle / 2.0), 0], [0, np.exp(-1j * angle / 2.0)]])
    # note: |down> is the first basis state, so sigma_z |down> = -|down>


@lru_cache(maxsize=4096)
def _unitary_cached(op: GateOp, two_i: int) -> np.ndarray:
    spin_i = two_i / 2.0
    d = dim(spin_i)
    kind = op.kind

    if kind == "Theta":
        # exp(-i theta Sz Ix), Sz = -1/2 on |down>, +1/2 on |up>
        lower = rotation_matrix(spin_i, "x", -op.angle / 2.0)
        upper = rotation_matrix(spin_i, "x", +op.angle / 2.0)
        u = np.zeros((2 * d, 2 * d), dtype=complex)
        u[:d, :d] = lower
        u[d:, d:] = upper
        return u

    if kind == "Pi":
        u = np.eye(2 * d, dtype=complex)
        u[:d, :d] = rotation_matrix(spin_i, "x", op.angle)
        return u

    if kind in ("Ux", "Uy"):
        return np.kron(_pauli_rot(kind[-1], op.angle), np.eye(d))

    if kind == "EnsR":
        return np.kron(np.eye(2), rotation_matrix(spin_i, op.axis, op.angle))

    if kind == "CondR":
        if not op.m_set:
            warnings.warn("CondR with empty M_set is the identity")
        u = np.eye(2 * d, dtype=complex)
        u2 = _pauli_rot(op.axis, op.angle)
        for m in op.m_set:
            if abs(m) > spin_i:
                raise ValueError(f"CondR level M={m} outside the spin range")
            j = m_index(spin_i, m)
            idx = np.ix_((j, d + j), (j, d + j))
            u[idx] = u2
        return u

    if kind in ("FlipFlop", "FlipFlip"):
        m = op.m
        partner = m + 1 if kind == "FlipFlop" else m - 1
        u = np.eye(2 * d, dtype=complex)
        if abs(partner) > spin_i:
            return u  # annihilation branch: no resonant partner level
        g = np.sqrt(spin_i * (spin_i + 1) - m * partner)
        c, s = np.cos(g * op.t), np.sin(g * op.t)
        j_dn = m_index(spin_i, partner)  # |down, M+-1>
        j_up = d + m_index(spin_i, m)  # |up, M>
        idx = np.ix_((j_dn, j_up), (j_dn, j_up))
        u[idx] = np.array([[c, -1j * s], [-1j * s, c]])
        return u

    if kind == "FreeEvolve":
        omega_e, omega_n = op.param("omega_e"), op.param("omega_n")
        a, a_nc = op.param("a"), op.param("a_nc")
        mz = m_values(spin_i)
        u = np.zeros((2 * d, 2 * d), dtype=complex)
        for e_idx, sz in ((0, -0.5), (1, +0.5)):
            h = np.diag(omega_e * sz + omega_n * mz + a * sz * mz).astype(complex)
            if a_nc:
                h += a_nc * sz * op_collective(spin_i, "x").mat
            vals, vecs = np.linalg.eigh(h)
            block = (vecs * np.exp(-1j * vals * op.t)) @ vecs.conj().T
            u[e_idx * d:(e_idx + 1) * d, e_idx * d:(e_idx + 1) * d] = block
        return u

    raise ValueError(f"unknown or non-unitary gate kind: {kind}")


def gate_unitary(op: GateOp, spin_i: float) -> np.ndarray:
    """Dense unitary of a gate on the joint space (ResetElectron has none)."""
    if op.kind == "ResetElectron":
        raise ValueError("ResetElectron is a channel; use the density path")
    return _unitary_cached(op, round(2 * check_spin_length(spin_i)))


def pi_gate(phi: float) -> "Circuit":
    """Pi(phi) decomposed into primitives: Theta(-phi) then EnsR(x, phi/2)."""
    return Circuit([theta_gate(-phi), ens_r("x", phi / 2.0)], name=f"Pi({phi:.6g})")


@dataclass
class Circuit:
    """Ordered gate list applied left to right."""

    ops: list = field(default_factory=list)
    name: str = ""
    metadata: dict = field(default_factory=dict)

    def __iter__(self):
        return iter(self.ops)

    def __len__(self):
        return len(self.ops)

    def __add__(self, other: "Circuit") -> "Circuit":
        return Circuit(self.ops + other.ops, name=self.name,
                       metadata={**self.metadata, **other.metadata})

    def append(self, op: GateOp):
        self.ops.append(op)

    def extend(self, ops):
        self.ops.extend(ops)

    @property
    def has_reset(self) -> bool:
        return any(op.kind == "ResetElectron" for op in self.ops)

    def dagger(self) -> "Circuit":
        return Circuit([op.dagger() for op in reversed(self.ops)],
                       name=self.name + "^dag", metadata=dict(self.metadata))

    def to_json(self) -> str:
        return json.dumps({
            "name": self.name,
            "metadata": self.metadata,
            "units": {"time": "1/a", "angles": "rad"},
            "ops": [op.to_dict() for op in self.ops],
        }, indent=1)

    @staticmethod
    def from_json(text: str) -> "Circuit":
        data = json.loads(text)
        return Circuit([GateOp.from_dict(d) for d in data["ops"]],
                       name=data.get("name", ""), metadata=data.get("metadata", {}))


def apply_gate(op: GateOp, state: JointState) -> JointState:
    if op.kind == "ResetElectron":
        # allowed on pure states only when the electron factorizes exactly
        d = dim(state.spin_i)
        lower, upper = state.amp[:d], state.amp[d:]
        p_up = float(np.vdot(upper, upper).real)
        if p_up < 1e-12:
            return JointState(state.spin_i, state.amp.copy())
        if np.vdot(lower, lower).real < 1e-12:
            out = np.concatenate([upper, np.zeros(d, dtype=complex)])
            return JointState(state.spin_i, out)
        raise ValueError("ResetElectron on an entangled pure state: use the density path")
    return JointState(state.spin_i, gate_unitary(op, state.spin_i) @ state.amp)


def apply_gate_density(op: GateOp, rho: np.ndarray, spin_i: float) -> np.ndarray:
    if op.kind == "ResetElectron":
        d = dim(spin_i)
        out = np.zeros_like(rho)
        out[:d, :d] = ensemble_reduced(rho, spin_i)
        return out
    u = gate_unitary(op, spin_i)
    return u @ rho @ u.conj().T


def apply_circuit(circuit: Circuit, state: JointState) -> JointState:
    out = state
    for op in circuit:
        out = apply_gate(op, out)
    n = out.norm
    if abs(n - state.norm) > 1e-9:
        raise RuntimeError(f"circuit changed the state norm by {abs(n - state.norm):.2e}")
    return out


def apply_circuit_density(circuit: Circuit, rho: np.ndarray, spin_i: float) -> np.ndarray:
    out = rho
    for op in circuit:
        out = apply_gate_density(op, out, spin_i)
    drift = abs(np.trace(out).real - np.trace(rho).real)
    if drift > 1e-9:
        raise RuntimeError(f"circuit changed the trace by {drift:.2e}")
    return out
