"""Collective Lindblad dynamics, biased noise, and ideal recovery.

The noise model is a master equation with collective jump operators I_+,
I_-, I_z at rates gamma_plus, gamma_minus, gamma_z:

    drho/dt = -i[H, rho] + sum_m gamma_m (L_m rho L_m^dag
                                          - (1/2){L_m^dag L_m, rho})

With this convention a two-level coherence under pure dephasing decays as
exp(-gamma_z t / 2) and the bottom Dicke level leaks population at the
collectively enhanced rate 2 I gamma_plus.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal, expm

from .catcode import CatCode, ErrorWord
from .collective import DickeVector, dim, m_values

logger = logging.getLogger(__name__)

__all__ = [
    "NoiseParams",
    "Channel",
    "RecoveryMap",
    "bias_rates",
    "lindblad_evolve",
    "ideal_recovery",
    "avg_logical_fidelity",
    "inject_error",
]


# ---------------------------------------------------------------------------
# Noise parametrization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseParams:
    """Collective rates, in units of the total rate gamma_tot."""

    gamma_plus: float
    gamma_minus: float
    gamma_z: float

    def __post_init__(self):
        for name in ("gamma_plus", "gamma_minus", "gamma_z"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def gamma_tot(self) -> float:
        return self.gamma_plus + self.gamma_minus + self.gamma_z

    @property
    def eta(self) -> float:
        """Bias: dephasing rate over total ladder rate."""
        ladder = self.gamma_plus + self.gamma_minus
        return np.inf if ladder == 0 else self.gamma_z / ladder


def bias_rates(eta: float, normalized: bool = True,
               plus_fraction: float = 0.5) -> NoiseParams:
    """Rates at bias eta with gamma_tot = 1 and a gamma_+/gamma_- split.

    gamma_z = eta/(1+eta), gamma_+ + gamma_- = 1/(1+eta); the ladder rate is
    split equally by default (plus_fraction overrides).
    """
    if eta <= 0:
        raise ValueError("eta must be > 0")
    if not 0 <= plus_fraction <= 1:
        raise ValueError("plus_fraction must lie in [0, 1]")
    gz = eta / (1.0 + eta)
    gl = 1.0 / (1.0 + eta)
    p = NoiseParams(gl * plus_fraction, gl * (1.0 - plus_fraction), gz)
    if normalized and abs(p.gamma_tot - 1.0) > 1e-12:
        raise AssertionError("rates failed to normalize")
    return p


# ---------------------------------------------------------------------------
# Lindblad integrator (dense rho, banded/diagonal jump products)
# ---------------------------------------------------------------------------

def _rhs(rho: np.ndarray, h: np.ndarray | None, mz: np.ndarray,
         wp: np.ndarray, wm: np.ndarray, noise: NoiseParams,
         ladder_recycle: bool = True) -> np.ndarray:
    """drho/dt. I_z is diagonal (mz); I_+/I_- are single off-diagonals with
    weights wp/wm, so every jump term is a shift-and-scale, O(d^2).

    With ladder_recycle off the L rho L^dag terms of the ladder dissipators
    are dropped: ladder jumps become declared failures (trace loss) instead
    of recycled population, the no-jump conditional evolution."""
    out = np.zeros_like(rho)
    if h is not None:
        out += -1j * (h @ rho - rho @ h)
    gz, gp, gm = noise.gamma_z, noise.gamma_plus, noise.gamma_minus
    if gz:
        out += gz * (np.multiply.outer(mz, mz) * rho
                     - 0.5 * (mz**2)[:, None] * rho
                     - 0.5 * rho * (mz**2)[None, :])
    # basis order is M = I ... -I: I_+ maps index j -> j-1 (weight wp[j-1]),
    # I_- maps index j -> j+1 (weight wm[j]).
    if gp:
        if ladder_recycle:
            out[:-1, :-1] += gp * np.multiply.outer(wp, wp) * rho[1:, 1:]
        np2 = np.concatenate(([0.0], wp**2))
        out += gp * (-0.5 * np2[:, None] * rho - 0.5 * rho * np2[None, :])
    if gm:
        if ladder_recycle:
            out[1:, 1:] += gm * np.multiply.outer(wm, wm) * rho[:-1, :-1]
        nm2 = np.concatenate((wm**2, [0.0]))
        out += gm * (-0.5 * nm2[:, None] * rho - 0.5 * rho * nm2[None, :])
    return out


_BANDED_CACHE: dict = {}


def _banded_factors(mz: np.ndarray, wp: np.ndarray, wm: np.ndarray,
                    noise: NoiseParams, ladder_recycle: bool) -> list:
    """One factorization per diagonal offset k of the H=0 generator.

    Each offset evolves under a tridiagonal generator A_k. Its off-diagonal
    products are positive, so A_k = D^-1 S D with S symmetric tridiagonal
    and D a diagonal scaling; storing the eigendecomposition of S makes
    later time points O(n^2) matvecs. Entries are ("diag", lam) when A_k is
    already diagonal, ("sym", logd, lam, q) for the scaled-symmetric case,
    or ("gen", A_k) when the scaling would overflow."""
    d = len(mz)
    gz, gp, gm = noise.gamma_z, noise.gamma_plus, noise.gamma_minus
    np2 = np.concatenate(([0.0], wp**2))
    nm2 = np.concatenate((wm**2, [0.0]))
    factors = []
    for k in range(d):
        n = d - k
        i = np.arange(n)
        diag = (gz * (mz[i] * mz[i + k]
                      - 0.5 * mz[i]**2 - 0.5 * mz[i + k]**2)
                - 0.5 * gp * (np2[i] + np2[i + k])
                - 0.5 * gm * (nm2[i] + nm2[i + k]))
        if not ladder_recycle or n == 1 or (gp == 0 and gm == 0):
            factors.append(("diag", diag))
            continue
        j = np.arange(n - 1)
        up = gp * wp[j] * wp[j + k]
        lo = gm * wm[j] * wm[j + k]
        if gp > 0 and gm > 0:
            logd = np.concatenate(([0.0],
                                   np.cumsum(0.5 * (np.log(up)
                                                    - np.log(lo)))))
            logd -= logd.mean()
            if np.max(np.abs(logd)) < 300.0:
                lam, q = eigh_tridiagonal(diag, np.sqrt(up * lo))
                factors.append(("sym", logd, lam, q))
                continue
        gen = np.diag(diag)
        gen[j, j + 1] += up
        gen[j + 1, j] += lo
        factors.append(("gen", gen))
    return factors


def _evolve_banded(rho0: np.ndarray, mz: np.ndarray, wp: np.ndarray,
                   wm: np.ndarray, noise: NoiseParams, t: float,
                   ladder_recycle: bool) -> np.ndarray:
    """Exact H=0 propagation: with no Hamiltonian every dissipator couples
    rho[i, j] only to elements on the same diagonal (dephasing is
    elementwise, ladder recycling shifts both indices together), so each
    diagonal of rho evolves under its own tridiagonal generator."""
    d = rho0.shape[0]
    key = (d, noise.gamma_z, noise.gamma_plus, noise.gamma_minus,
           ladder_recycle)
    factors = _BANDED_CACHE.get(key)
    if factors is None:
        factors = _banded_factors(mz, wp, wm, noise, ladder_recycle)
        if len(_BANDED_CACHE) > 16:
            _BANDED_CACHE.clear()
        _BANDED_CACHE[key] = factors
    out = np.zeros_like(rho0, dtype=complex)
    for k, fac in enumerate(factors):
        n = d - k
        i = np.arange(n)
        v0 = np.diagonal(rho0, offset=k)
        if fac[0] == "diag":
            v = np.exp(fac[1] * t) * v0
        elif fac[0] == "sym":
            _, logd, lam, q = fac
            scale = np.exp(logd)
            v = (q @ (np.exp(lam * t) * (q.T @ (scale * v0)))) / scale
        else:
            v = expm(fac[1] * t) @ v0
        out[i, i + k] = v
        if k:
            # the generator is real, so the lower diagonal is the conjugate
            out[i + k, i] = v.conj()
    return out


def lindblad_evolve(rho0: np.ndarray, h: np.ndarray | None,
                    noise: NoiseParams, t: float, spin_i: float,
                    dt: float | None = None, trace_tol: float = 1e-8,
                    max_halvings: int = 12,
                    ladder_recycle: bool = True) -> np.ndarray:
    """Evolve rho0 for time t under H and the collective dissipators.

    With h=None (and dt unset) the purely dissipative generator decouples
    over the diagonals of rho and each diagonal is propagated by an exact
    matrix exponential. Otherwise:
    fixed-step RK4; the step is chosen so that the fastest dissipative rate
    times dt stays below 0.05, Hermiticity is enforced by symmetrization
    each step, and the run is retried with a halved step if the trace
    drifts beyond trace_tol.

    ladder_recycle=False drops the recycling terms of the ladder
    dissipators: the result is the no-jump conditional state, whose trace
    deficit is the probability that at least one ladder jump occurred
    (declared-failure convention). Trace is then only checked against
    growth.
    """
    d = dim(spin_i)
    if rho0.shape != (d, d):
        raise ValueError("rho0 has the wrong dimension")
    if abs(np.trace(rho0) - 1.0) > 1e-10:
        raise ValueError("rho0 must have unit trace")
    if np.max(np.abs(rho0 - rho0.conj().T)) > 1e-10:
        raise ValueError("rho0 must be Hermitian")
    if t == 0:
        return rho0.copy()
    mz = m_values(spin_i)
    # off-diagonal weights: wp[j] couples |M_{j+1}> -> |M_j> under I_+
    wp = np.sqrt(spin_i * (spin_i + 1) - mz[1:] * (mz[1:] + 1))
    wm = np.sqrt(spin_i * (spin_i + 1) - mz[:-1] * (mz[:-1] - 1))
    if h is None and dt is None:
        # H=0 decouples the diagonals of rho: propagate each exactly
        return _evolve_banded(rho0.astype(complex), mz, wp, wm, noise, t,
                              ladder_recycle)
    rate = (2.0 * noise.gamma_z * np.max(mz**2)
            + 2.0 * noise.gamma_plus * np.max(wp**2, initial=0.0)
            + 2.0 * noise.gamma_minus * np.max(wm**2, initial=0.0))
    if h is not None:
        rate += 2.0 * float(np.linalg.norm(h, ord=np.inf))
    if dt is None:
        dt = t if rate == 0 else min(t, 0.05 / rate)

    for attempt in range(max_halvings + 1):
        n_steps = max(1, int(np.ceil(t / dt)))
        step = t / n_steps
        rho = rho0.astype(complex).copy()
        for _ in range(n_steps):
            k1 = _rhs(rho, h, mz, wp, wm, noise, ladder_recycle)
            k2 = _rhs(rho + 0.5 * step * k1, h, mz, wp, wm, noise,
                      ladder_recycle)
            k3 = _rhs(rho + 0.5 * step * k2, h, mz, wp, wm, noise,
                      ladder_recycle)
            k4 = _rhs(rho + step * k3, h, mz, wp, wm, noise, ladder_recycle)
            rho += (step / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            rho = 0.5 * (rho + rho.conj().T)
        tr = np.trace(rho).real
        drift = (tr - 1.0) if not ladder_recycle else abs(tr - 1.0)
        if drift <= trace_tol:
            return rho
        logger.warning("trace drift %.2e at dt=%.3e; halving step", drift, dt)
        dt *= 0.5
    raise RuntimeError(
        f"lindblad_evolve: trace drift {drift:.2e} persists after "
        f"{max_halvings} step halvings")


# ---------------------------------------------------------------------------
# Channels and recovery
# ---------------------------------------------------------------------------

@dataclass
class Channel:
    """A channel given by its Kraus operators."""

    kraus: list

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ k.conj().T for k in self.kraus)

    def completeness_deficit(self) -> float:
        d = self.kraus[0].shape[1]
        s = sum(k.conj().T @ k for k in self.kraus)
        w = np.linalg.eigvalsh(np.eye(d) - s)
        if w.min() < -1e-8:
            raise ValueError("channel is trace-increasing")
        return float(w.max())


@dataclass
class RecoveryMap:
    """Syndrome-conditioned recovery with a declared-failure complement.

    Correctable weight is mapped back to the codespace by the Kraus list;
    the remaining weight is projected out and reported as failure.
    """

    code: CatCode
    k: int
    l: int
    kraus: list = field(repr=False)
    dropped: int = 0

    def apply(self, rho: np.ndarray) -> tuple[np.ndarray, float]:
        """Return (recovered rho, declared-failure weight).

        The failure weight counts as fidelity 0; the returned rho keeps
        trace 1 with the failure weight left in an orthogonal-garbage form
        (projector onto nothing -> renormalized separately by callers that
        want conditional states).
        """
        out = sum(k @ rho @ k.conj().T for k in self.kraus)
        failure = float(np.trace(rho).real - np.trace(out).real)
        return out, max(failure, 0.0)

    def completeness_deficit_on(self, span: np.ndarray) -> float:
        """Max deficit of sum K^dag K from identity on the given column-span."""
        d = self.kraus[0].shape[1]
        s = sum(k.conj().T @ k for k in self.kraus)
        g = span.conj().T @ (np.eye(d) - s) @ span
        return float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (g + g.conj().T)))))


def ideal_recovery(code: CatCode, k: int | None = None,
                   l: int = 0) -> RecoveryMap:
    """Perfect syndrome-projective recovery for I_+/-^j Iz^m, j<=k, m<=l.

    For each displacement sector the correctable error images of both
    codewords are orthonormalized (stabilized Gram-Schmidt, in increasing
    error weight); each orthonormal image direction is mapped isometrically
    back to the codeword it descended from. Images that become linearly
    dependent are dropped and logged. Weight outside the orthonormalized
    image span is a declared failure.
    """
    if k is None:
        k = code.k_ladder
    if not 0 <= k <= code.k_ladder:
        raise ValueError("ladder order k outside code capacity")
    if l < 0:
        raise ValueError("l must be >= 0")
    d = dim(code.spin_i)
    # orthonormalize the target codewords (their raw overlap, though tiny,
    # would otherwise break the isometry of each Kraus operator)
    w0 = code.logical_state(0).amp
    w1 = code.logical_state(1).amp - w0 * np.vdot(w0, code.logical_state(1).amp)
    words = [w0, w1 / np.linalg.norm(w1)]
    kraus = []
    dropped = 0
    basis: list[np.ndarray] = []  # global orthonormal image directions
    for s in range(code.half_n):
        ladders = [j for j in range(-k, k + 1) if j % code.half_n == s]
        for j in ladders:
            for m in range(l + 1):
                pair = []
                for i in (0, 1):
                    img = ErrorWord(j, m).apply(code.logical_state(i)).amp
                    v = img.copy()
                    for u in basis:
                        v -= u * np.vdot(u, v)
                    nrm = np.linalg.norm(v)
                    if nrm < 1e-8:
                        dropped += 1
                        logger.info("dropped dependent image j=%d m=%d i=%d",
                                    j, m, i)
                        pair.append(None)
                        continue
                    v /= nrm
                    basis.append(v)
                    pair.append(v)
                kk = np.zeros((d, d), dtype=complex)
                for i, v in enumerate(pair):
                    if v is not None:
                        kk += np.outer(words[i], v.conj())
                if np.any(kk):
                    kraus.append(kk)
    return RecoveryMap(code=code, k=k, l=l, kraus=kraus, dropped=dropped)


def avg_logical_fidelity(code: CatCode, channel, recovery: RecoveryMap,
                         estimator: str = "mean") -> float:
    """Bloch-average logical fidelity after channel + recovery.

    channel: callable rho -> rho on the ensemble space. F_psi is computed
    for |0>_L and |+>_L; declared-failure weight counts as fidelity 0.
    estimator "mean" gives (F_0 + F_+)/2, "weighted" gives (F_0 + 2 F_+)/3.
    """
    if estimator not in ("mean", "weighted"):
        raise ValueError("estimator must be 'mean' or 'weighted'")
    fids = []
    for psi in (code.logical_state(0).amp, code.logical(1, 1).amp):
        rho = channel(np.outer(psi, psi.conj()))
        rec, _failure = recovery.apply(rho)
        fids.append(float(np.real(np.vdot(psi, rec @ psi))))
    if estimator == "mean":
        return 0.5 * (fids[0] + fids[1])
    return (fids[0] + 2.0 * fids[1]) / 3.0


def inject_error(state: DickeVector, word: ErrorWord) -> DickeVector:
    """Apply an error monomial and renormalize."""
    out = word.apply(state, normalize=False)
    if out.norm < 1e-14:
        raise ValueError(f"error word {word.label} annihilates the state")
    return out.normalized()
