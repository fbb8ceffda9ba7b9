"""Dense linear algebra for a single collective spin of length I.

Basis convention used everywhere in this package: Dicke states |I, M> are
ordered by decreasing magnetic quantum number, M = I, I-1, ..., -I, so index
0 is the maximally polarized state |I, I>.

Spin-coherent states follow the phase convention

    c_M = sqrt(binom(2I, I-M)) cos(theta/2)^(I+M) sin(theta/2)^(I-M) e^(-i M phi)

which makes equal-weight superpositions of equally spaced equatorial coherent
states vanish exactly outside the matching modular-M support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = [
    "check_spin_length",
    "dim",
    "m_values",
    "DickeVector",
    "Operator",
    "op_collective",
    "rotation_matrix",
    "rotate",
    "coherent_state",
    "clebsch_gordan",
    "spherical_tensor",
    "SphericalField",
    "wigner_sphere",
]


def check_spin_length(spin_i: float) -> float:
    """Validate a spin length: I must be a non-negative half-integer."""
    two_i = round(2 * spin_i)
    if two_i < 0 or abs(2 * spin_i - two_i) > 1e-9:
        raise ValueError(f"spin length must be a non-negative half-integer, got {spin_i}")
    return two_i / 2.0


def dim(spin_i: float) -> int:
    """Hilbert-space dimension 2I+1."""
    return round(2 * check_spin_length(spin_i)) + 1


def m_values(spin_i: float) -> np.ndarray:
    """Magnetic quantum numbers in basis order, M = I ... -I."""
    spin_i = check_spin_length(spin_i)
    return spin_i - np.arange(dim(spin_i))


def m_index(spin_i: float, m: float) -> int:
    """Basis index of |I, M>."""
    idx = round(spin_i - m)
    if not 0 <= idx < dim(spin_i):
        raise ValueError(f"M={m} out of range for I={spin_i}")
    return idx


@dataclass
class DickeVector:
    """State vector of a single collective spin in the Dicke basis."""

    spin_i: float
    amp: np.ndarray

    def __post_init__(self):
        self.spin_i = check_spin_length(self.spin_i)
        self.amp = np.asarray(self.amp, dtype=complex)
        if self.amp.shape != (dim(self.spin_i),):
            raise ValueError("amplitude vector has wrong length for spin I")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amp))

    def normalized(self) -> "DickeVector":
        n = self.norm
        if n == 0:
            raise ValueError("cannot normalize the zero vector")
        return DickeVector(self.spin_i, self.amp / n)

    def inner(self, other: "DickeVector") -> complex:
        return complex(np.vdot(self.amp, other.amp))

    def fidelity(self, other: "DickeVector") -> float:
        """|<self|other>|^2 for normalized inputs."""
        return abs(self.inner(other)) ** 2

    def expect(self, op: "Operator | np.ndarray") -> complex:
        mat = op.mat if isinstance(op, Operator) else op
        return complex(np.vdot(self.amp, mat @ self.amp))

    def density(self) -> np.ndarray:
        return np.outer(self.amp, self.amp.conj())

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amp) ** 2


@dataclass
class Operator:
    """Dense operator on a collective spin, with a structure hint.

    structure_hint is one of "diagonal", "banded", "dense"; purely advisory,
    used to pick fast paths (diagonal rotations, banded ladder applications).
    """

    spin_i: float
    mat: np.ndarray
    structure_hint: str = "dense"

    def __post_init__(self):
        self.mat = np.asarray(self.mat, dtype=complex)
        d = dim(self.spin_i)
        if self.mat.shape != (d, d):
            raise ValueError("operator has wrong shape for spin I")

    def dagger(self) -> "Operator":
        return Operator(self.spin_i, self.mat.conj().T, self.structure_hint)

    def __matmul__(self, other):
        if isinstance(other, Operator):
            return Operator(self.spin_i, self.mat @ other.mat)
        if isinstance(other, DickeVector):
            return DickeVector(other.spin_i, self.mat @ other.amp)
        return self.mat @ other


def _ladder_coeffs(spin_i: float, sign: int) -> np.ndarray:
    """Matrix elements <M+sign| I_sign |M> = sqrt(I(I+1) - M(M+sign)), in basis order."""
    m = m_values(spin_i)
    val = spin_i * (spin_i + 1) - m * (m + sign)
    return np.sqrt(np.clip(val, 0.0, None))


@lru_cache(maxsize=None)
def _op_cached(two_i: int, which: str) -> np.ndarray:
    spin_i = two_i / 2.0
    d = dim(spin_i)
    m = m_values(spin_i)
    if which == "z":
        return np.diag(m.astype(complex))
    if which == "+":
        # I+|I,M> = sqrt(I(I+1)-M(M+1)) |I,M+1>; |M+1> sits one row above |M>.
        mat = np.zeros((d, d), dtype=complex)
        c = _ladder_coeffs(spin_i, +1)
        for j in range(1, d):
            mat[j - 1, j] = c[j]
        return mat
    if which == "-":
        return _op_cached(two_i, "+").conj().T
    if which == "x":
        return (_op_cached(two_i, "+") + _op_cached(two_i, "-")) / 2.0
    if which == "y":
        return (_op_cached(two_i, "+") - _op_cached(two_i, "-")) / 2.0j
    raise ValueError(f"unknown operator '{which}'")


def op_collective(spin_i: float, which: str) -> Operator:
    """Collective spin operator I_which for which in {x, y, z, +, -}."""
    spin_i = check_spin_length(spin_i)
    hint = {"z": "diagonal", "+": "banded", "-": "banded", "x": "banded", "y": "banded"}[which]
    return Operator(spin_i, _op_cached(round(2 * spin_i), which).copy(), hint)


def apply_ladder(spin_i: float, amp: np.ndarray, sign: int) -> np.ndarray:
    """Apply I_{+/-} to an amplitude array without building the dense matrix.

    Broadcasts over trailing axes; axis 0 is the Dicke index.
    """
    amp = np.asarray(amp, dtype=complex)
    out = np.zeros_like(amp)
    c = _ladder_coeffs(spin_i, sign).reshape((-1,) + (1,) * (amp.ndim - 1))
    if sign == +1:
        out[:-1] = c[1:] * amp[1:]
    else:
        out[1:] = c[:-1] * amp[:-1]
    return out


@lru_cache(maxsize=None)
def _eig_cached(two_i: int, axis: str):
    mat = _op_cached(two_i, axis)
    w, v = np.linalg.eigh(mat)
    return w, v


def rotation_matrix(spin_i: float, axis: str, angle: float) -> np.ndarray:
    """exp(-i angle I_axis) as a dense (2I+1)x(2I+1) matrix."""
    spin_i = check_spin_length(spin_i)
    two_i = round(2 * spin_i)
    if axis == "z":
        return np.diag(np.exp(-1j * angle * m_values(spin_i)))
    if axis not in ("x", "y"):
        raise ValueError(f"unknown rotation axis '{axis}'")
    w, v = _eig_cached(two_i, axis)
    return (v * np.exp(-1j * angle * w)) @ v.conj().T


def rotate(state: DickeVector, axis: str, angle: float) -> DickeVector:
    """Rotate a state by exp(-i angle I_axis), axis in {x, y, z}."""
    if axis == "z":
        return DickeVector(state.spin_i, np.exp(-1j * angle * m_values(state.spin_i)) * state.amp)
    return DickeVector(state.spin_i, rotation_matrix(state.spin_i, axis, angle) @ state.amp)


def coherent_state(spin_i: float, theta: float, phi: float) -> DickeVector:
    """Spin-coherent state |I, theta, phi> in the fixed phase convention.

    c_M = sqrt(binom(2I, I-M)) cos(theta/2)^(I+M) sin(theta/2)^(I-M) e^(-i M phi).
    Amplitudes are evaluated in log space so large I stays finite.
    """
    spin_i = check_spin_length(spin_i)
    m = m_values(spin_i)
    two_i = round(2 * spin_i)
    n = np.round(spin_i - m).astype(int)  # I - M
    log_binom = np.array([math.lgamma(two_i + 1) - math.lgamma(j + 1) - math.lgamma(two_i - j + 1)
                          for j in n])
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    # handle exact zeros of cos/sin without log warnings
    with np.errstate(divide="ignore"):
        log_c = np.where(abs(c) > 0, (spin_i + m) * np.log(np.abs(c) + (abs(c) == 0)), 0.0)
        log_s = np.where(abs(s) > 0, (spin_i - m) * np.log(np.abs(s) + (abs(s) == 0)), 0.0)
    mag = np.exp(0.5 * log_binom + log_c + log_s)
    mag = np.where((abs(c) == 0) & (spin_i + m > 0), 0.0, mag)
    mag = np.where((abs(s) == 0) & (spin_i - m > 0), 0.0, mag)
    sign = np.sign(c) ** np.round(spin_i + m) * np.sign(s) ** np.round(spin_i - m)
    amp = mag * sign * np.exp(-1j * m * phi)
    return DickeVector(spin_i, amp)


# ---------------------------------------------------------------------------
# Clebsch-Gordan coefficients and spherical tensor operators
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _fact(n: int) -> int:
    if n < 0:
        raise ValueError("negative factorial")
    return math.factorial(n)


@lru_cache(maxsize=None)
def _cg_doubled(tj1: int, tm1: int, tj2: int, tm2: int, tj3: int, tm3: int) -> float:
    """<j1 m1; j2 m2 | j3 m3> via the Racah sum, args doubled to keep them integral.

    Evaluated with exact rational arithmetic; large-I alternating sums stay exact.
    """
    if tm1 + tm2 != tm3:
        return 0.0
    if not (abs(tj1 - tj2) <= tj3 <= tj1 + tj2):
        return 0.0
    if abs(tm1) > tj1 or abs(tm2) > tj2 or abs(tm3) > tj3:
        return 0.0
    # all of these are integers for physical arguments
    def h(x: int) -> int:
        if x % 2:
            raise ValueError("non-integral factorial argument")
        return x // 2

    pre = Fraction(
        (tj3 + 1)
        * _fact(h(tj3 + tj1 - tj2)) * _fact(h(tj3 - tj1 + tj2)) * _fact(h(tj1 + tj2 - tj3)),
        _fact(h(tj1 + tj2 + tj3) + 1),
    )
    pre *= Fraction(
        _fact(h(tj3 + tm3)) * _fact(h(tj3 - tm3)) * _fact(h(tj1 - tm1))
        * _fact(h(tj1 + tm1)) * _fact(h(tj2 - tm2)) * _fact(h(tj2 + tm2))
    )
    # sum limits: every factorial argument must be non-negative
    total = Fraction(0)
    k_lo = max(0, -h(tj3 - tj2 + tm1), -h(tj3 - tj1 - tm2))
    k_hi = min(h(tj1 + tj2 - tj3), h(tj1 - tm1), h(tj2 + tm2))
    for k in range(k_lo, k_hi + 1):
        denom = (
            _fact(k)
            * _fact(h(tj1 + tj2 - tj3) - k)
            * _fact(h(tj1 - tm1) - k)
            * _fact(h(tj2 + tm2) - k)
            * _fact(h(tj3 - tj2 + tm1) + k)
            * _fact(h(tj3 - tj1 - tm2) + k)
        )
        total += Fraction((-1) ** k, denom)
    if total == 0:
        return 0.0
    val2 = pre * total * total
    return math.copysign(math.sqrt(float(val2)), float(total))


def clebsch_gordan(j1: float, m1: float, j2: float, m2: float, j3: float, m3: float) -> float:
    """Clebsch-Gordan coefficient <j1 m1; j2 m2 | j3 m3>, exact to double precision."""
    args = [j1, m1, j2, m2, j3, m3]
    doubled = [round(2 * a) for a in args]
    if any(abs(2 * a - d) > 1e-9 for a, d in zip(args, doubled)):
        raise ValueError("angular momentum arguments must be half-integral")
    return _cg_doubled(*doubled)


@lru_cache(maxsize=None)
def _tensor_cached(two_i: int, k: int, q: int) -> np.ndarray:
    spin_i = two_i / 2.0
    d = dim(spin_i)
    mat = np.zeros((d, d), dtype=complex)
    norm = math.sqrt((2 * k + 1) / (d))
    for col in range(d):
        m = spin_i - col
        mp = m + q
        row = round(spin_i - mp)
        if 0 <= row < d:
            mat[row, col] = norm * clebsch_gordan(spin_i, m, k, q, spin_i, mp)
    return mat


def spherical_tensor(spin_i: float, k: int, q: int) -> Operator:
    """Multipole operator T_kq, orthonormal: Tr(T_kq^dag T_k'q') = delta."""
    spin_i = check_spin_length(spin_i)
    if not (0 <= k <= round(2 * spin_i)) or abs(q) > k:
        raise ValueError("invalid multipole indices")
    return Operator(spin_i, _tensor_cached(round(2 * spin_i), k, q).copy())


@dataclass
class SphericalField:
    """Real scalar field sampled on a (theta, phi) product grid."""

    theta: np.ndarray
    phi: np.ndarray
    values: np.ndarray  # shape (len(theta), len(phi))

    def integral(self) -> float:
        """Integral over the sphere with the sin(theta) measure (trapezoid rule)."""
        w = self.values * np.sin(self.theta)[:, None]
        return float(np.trapezoid(np.trapezoid(w, self.phi, axis=1), self.theta))

    def argmax(self) -> tuple[float, float]:
        i, j = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return float(self.theta[i]), float(self.phi[j])


def wigner_sphere(rho: np.ndarray | DickeVector, spin_i: float | None = None,
                  n_theta: int = 181, n_phi: int = 361) -> SphericalField:
    """Spherical Wigner function via the multipole kernel.

    W(theta, phi) = sum_{k,q} Tr(rho T_kq^dag) Y_kq(theta, phi)

    Integrates to Tr(rho) * sqrt(4 pi / (2I+1)).
    """
    from scipy.special import sph_harm_y

    if isinstance(rho, DickeVector):
        spin_i = rho.spin_i
        rho = rho.density()
    if spin_i is None:
        spin_i = (rho.shape[0] - 1) / 2.0
    spin_i = check_spin_length(spin_i)
    two_i = round(2 * spin_i)
    theta = np.linspace(0.0, np.pi, n_theta)
    phi = np.linspace(0.0, 2.0 * np.pi, n_phi)
    values = np.zeros((n_theta, n_phi), dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    for k in range(two_i + 1):
        for q in range(-k, k + 1):
            t_kq = _tensor_cached(two_i, k, q)
            coeff = np.einsum("ij,ij->", t_kq.conj(), rho)
            if abs(coeff) < 1e-14:
                continue
            ylm = sph_harm_y(k, q, theta[:, None], phi[None, :])
            values += coeff * ylm
    resid = float(np.max(np.abs(values.imag)))
    if resid > 1e-8:
        raise RuntimeError(f"Wigner field has non-negligible imaginary part: {resid}")
    return SphericalField(theta, phi, values.real)
