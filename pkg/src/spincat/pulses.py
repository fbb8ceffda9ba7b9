"""Pulse-level physics: rotating-frame Hamiltonians, square-wave pulse
engineering with exact Fourier analysis, multi-tone conditional electron
rotations with decoupling, resonance tracking, and sideband flip-flop
gates — validated by exact time-dependent propagation."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .collective import dim, m_values, op_collective

logger = logging.getLogger(__name__)

__all__ = [
    "DriveParams",
    "PulseSequence",
    "FourierResult",
    "h_rwa",
    "fourier_coeffs",
    "optimize_sequence",
    "engineered_rotation_sim",
    "multitone_cond_rotation",
    "xy8_resonance_track",
    "sideband_flipflop",
    "schrieffer_wolff_check",
]

# electron basis order (down, up); Sz|up> = +1/2|up>
_SX = np.array([[0.0, 0.5], [0.5, 0.0]])
_SY = np.array([[0.0, 0.5j], [-0.5j, 0.0]])
_SZ = np.array([[-0.5, 0.0], [0.0, 0.5]])


@dataclass(frozen=True)
class DriveParams:
    """Physical drive/coupling parameters, angular frequencies in units a=1.

    tones: list of (omega_k, phi_k, rabi_k) — drive frequency, phase, Rabi
    amplitude of each tone.
    """

    spin_i: float
    omega: float = 0.0          # single-tone Rabi amplitude shortcut
    delta: float = 0.0          # its detuning from omega_e
    omega_e: float = 1000.0
    omega_n: float = 10.0
    a: float = 1.0
    a_nc: float = 0.1
    tones: tuple = ()

    def __post_init__(self):
        for _, _, rabi in self.tones:
            if rabi < 0:
                raise ValueError("tone Rabi amplitudes must be >= 0")

    def all_tones(self) -> list:
        """Explicit tones plus the single-tone shortcut, as detunings."""
        out = [(wk - self.omega_e, pk, rk) for wk, pk, rk in self.tones]
        if self.omega:
            out.append((self.delta, 0.0, self.omega))
        return out


@dataclass(frozen=True)
class PulseSequence:
    """Square modulation f(t) in {+1,-1} with period 2*tau.

    f starts at ``start`` (+1 or -1) and flips at each switching time;
    switchings are strict ascending within [0, 2*tau)."""

    tau: float
    switchings: tuple = ()
    start: int = 1

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        s = self.switchings
        if any(b <= a for a, b in zip(s, s[1:])) or \
                any(not 0 <= x < 2 * self.tau for x in s):
            raise ValueError("switchings must be strictly increasing in "
                             "[0, 2*tau)")
        if self.start not in (1, -1):
            raise ValueError("start must be +1 or -1")

    def value(self, t: float) -> int:
        t = t % (2 * self.tau)
        flips = int(np.searchsorted(self.switchings, t, "right")) % 2
        return self.start * (1 - 2 * flips)

    def segments(self) -> list:
        """(start, end, sign) pieces covering one period."""
        edges = [0.0, *self.switchings, 2 * self.tau]
        return [(edges[i], edges[i + 1], self.start * (1 - 2 * (i % 2)))
                for i in range(len(edges) - 1) if edges[i + 1] > edges[i]]


@dataclass(frozen=True)
class FourierResult:
    tau: float
    p: np.ndarray  # cosine coefficients, index 0..l_max
    q: np.ndarray  # sine coefficients

    def omega(self, l: int) -> float:
        return np.pi * l / self.tau


def h_rwa(params: DriveParams, t: float) -> np.ndarray:
    """Rotating-frame Hamiltonian at time t on the joint (electron x
    ensemble) space: nuclear Zeeman, collinear and noncollinear hyperfine,
    plus the drive tones at their detunings."""
    spin = params.spin_i
    d = dim(spin)
    iz = np.diag(m_values(spin))
    ix = op_collective(spin, "x").mat
    eye_n, eye_e = np.eye(d), np.eye(2)
    h = params.omega_n * np.kron(eye_e, iz) \
        + params.a * np.kron(_SZ, iz) \
        + params.a_nc * np.kron(_SZ, ix)
    h = h.astype(complex)
    for det, phi, rabi in params.all_tones():
        if rabi > 0.1 * (params.omega_e + det + params.omega_e):
            warnings.warn("RWA validity questionable: tone Rabi amplitude "
                          "not small against omega_k + omega_e")
        arg = det * t + phi
        h += rabi * (np.cos(arg) * np.kron(_SX, eye_n)
                     + np.sin(arg) * np.kron(_SY, eye_n))
    return h


# ---------------------------------------------------------------------------
# Square-wave Fourier analysis and pulse optimization
# ---------------------------------------------------------------------------

def fourier_coeffs(seq: PulseSequence, l_max: int) -> FourierResult:
    """Exact Fourier coefficients of the square modulation.

    P_l = (1/tau) int_0^{2tau} f cos(pi l t/tau) dt, Q_l likewise with sine;
    piecewise-constant integrals evaluated in closed form.
    """
    p = np.zeros(l_max + 1)
    q = np.zeros(l_max + 1)
    for t0, t1, s in seq.segments():
        p[0] += s * (t1 - t0) / seq.tau
        for l in range(1, l_max + 1):
            w = np.pi * l / seq.tau
            p[l] += s * (np.sin(w * t1) - np.sin(w * t0)) / (w * seq.tau)
            q[l] += s * (np.cos(w * t0) - np.cos(w * t1)) / (w * seq.tau)
    return FourierResult(seq.tau, p, q)


def optimize_sequence(l_target: int = 2, tau: float = 1.0,
                      p_tol: float = 1e-3, max_switchings: int = 8,
                      seed: int = 7) -> PulseSequence:
    """Switching pattern maximizing |Q_l| at the target harmonic subject to
    |P_l| <= p_tol, by randomized grid search plus local refinement."""
    if l_target < 1:
        raise ValueError("l_target must be >= 1")
    period = 2 * tau
    rng = np.random.default_rng(seed)

    def score(sw):
        try:
            fr = fourier_coeffs(PulseSequence(tau, tuple(sw)), l_target)
        except ValueError:
            return -1.0
        # balanced sequences only: a mean offset (P_0) would leave a net
        # uncompensated collinear phase per period
        if abs(fr.p[l_target]) > p_tol or abs(fr.p[0]) > p_tol:
            return -abs(fr.p[l_target]) - abs(fr.p[0])
        return abs(fr.q[l_target])

    # the plain square wave at the target frequency is the natural seed:
    # switchings every period/(2*l_target)
    base = [period * (j + 1) / (2 * l_target)
            for j in range(2 * l_target - 1)]
    best, best_s = list(base), score(base)
    n_extra = max_switchings - len(base)
    for _ in range(400):
        cand = sorted((np.array(best)
                       + rng.normal(0, 0.05 * period, len(best))) % period)
        if n_extra > 0 and rng.random() < 0.3:
            cand = sorted(cand + list(rng.uniform(0, period, n_extra)))
        s = score(cand)
        if s > best_s:
            best, best_s = list(cand), s
    # coordinate-wise golden refinement
    for _ in range(6):
        for i in range(len(best)):
            lo = best[i - 1] if i else 0.0
            hi = best[i + 1] if i + 1 < len(best) else period
            grid = np.linspace(lo + 1e-9, hi - 1e-9, 33)
            vals = [score(best[:i] + [g] + best[i + 1:]) for g in grid]
            best[i] = float(grid[int(np.argmax(vals))])
            best_s = max(vals)
    seq = PulseSequence(tau, tuple(best))
    if best_s < 0.6:
        logger.warning("switching budget too small: best |Q_%d| = %.4f",
                       l_target, best_s)
    return seq


def quarter_shifted(seq: PulseSequence, l_target: int) -> PulseSequence:
    """The quadrature sequence: the same pattern shifted so the target
    harmonic moves by a quarter cycle."""
    shift = seq.tau / (2 * l_target)
    period = 2 * seq.tau
    # A time translation g(t) = f(t - shift) must carry along the implicit
    # jump at the period boundary when the switching count is odd, and the
    # new start value is f evaluated just after -shift.
    points = set(seq.switchings)
    if len(seq.switchings) % 2 == 1:
        points.add(0.0)
    sw = tuple(sorted((x + shift) % period for x in points))
    return PulseSequence(seq.tau, sw, seq.value((-shift) % period))


# ---------------------------------------------------------------------------
# Engineered conditional ensemble rotation
# ---------------------------------------------------------------------------

def engineered_rotation_sim(seq: PulseSequence, params: DriveParams,
                            theta_target: float,
                            l_target: int = 2) -> tuple[float, float]:
    """Exact piecewise propagation of the square-modulated hyperfine
    interaction, compared against the ideal conditional rotation.

    The modulation multiplies the full electron-conditioned coupling
    (collinear and noncollinear), with the quadrature (quarter-shifted)
    copy of the sequence driving the I_y component; on resonance
    (pi*l/tau = omega_n) the secular part is an effective Sz I_phi
    interaction of strength Q_l * a_nc. Runs the nearest whole number of
    periods to reach theta_target and returns (fidelity vs the ideal
    conditional rotation predicted by the effective model for that
    duration, fitted effective strength).
    """
    if abs(np.pi * l_target / seq.tau - params.omega_n) > 1e-9:
        warnings.warn("sequence off resonance: pi*l/tau != omega_n")
    fr = fourier_coeffs(seq, l_target)
    q_l = fr.q[l_target]
    spin = params.spin_i
    d = dim(spin)
    iz = np.diag(m_values(spin))
    ix = op_collective(spin, "x").mat
    iy = op_collective(spin, "y").mat
    seq_y = quarter_shifted(seq, l_target)
    if theta_target == 0.0:
        return 1.0, 0.0
    strength = abs(q_l) * params.a_nc
    n_periods = max(1, round(theta_target / (strength * 2 * seq.tau)))
    total_t = n_periods * 2 * seq.tau

    # piecewise-constant H over the merged switching grid of both sequences
    edges = sorted({0.0, 2 * seq.tau,
                    *seq.switchings, *seq_y.switchings})
    u_period = np.eye(2 * d, dtype=complex)
    h0 = params.omega_n * np.kron(np.eye(2), iz)
    for t0, t1 in zip(edges, edges[1:]):
        tm = 0.5 * (t0 + t1)
        h = h0 + seq.value(tm) * np.kron(_SZ, params.a * iz
                                         + params.a_nc * ix) \
            + seq_y.value(tm) * params.a_nc * np.kron(_SZ, iy)
        u_period = expm(-1j * (t1 - t0) * h) @ u_period
    u = np.linalg.matrix_power(u_period, n_periods)
    # undo the bare nuclear precession accumulated over the full duration
    u = np.kron(np.eye(2), expm(1j * total_t * params.omega_n * iz)) @ u

    def ideal(theta, phi):
        gen = np.kron(_SZ, np.cos(phi) * ix + np.sin(phi) * iy)
        return expm(-1j * theta * gen)

    def fid(theta, phi):
        return abs(np.trace(ideal(theta, phi).conj().T @ u)) ** 2 \
            / (2 * d) ** 2

    # fit the rotation angle and axis actually produced
    grid = [(fid(th, ph), th, ph)
            for th in np.linspace(0.25 * theta_target, 2.0 * theta_target, 60)
            for ph in np.linspace(0, 2 * np.pi, 24, endpoint=False)]
    _, th0, ph0 = max(grid)
    from scipy.optimize import minimize
    res = minimize(lambda v: 1.0 - fid(v[0], v[1]), [th0, ph0],
                   method="Nelder-Mead", options={"xatol": 1e-10})
    theta_fit = abs(float(res.x[0]))
    fitted_strength = theta_fit / total_t
    # the propagation covers a whole number of periods, so the effective
    # model predicts angle strength*total_t (nearest stroboscopic point to
    # theta_target); compare against that ideal rotation
    fidelity = fid(strength * total_t, float(res.x[1]))
    if params.omega_n < 10 * params.a_nc:
        warnings.warn("omega_n too small for the effective model (RWA of "
                      "the modulation)")
    return float(fidelity), float(fitted_strength)


# ---------------------------------------------------------------------------
# Exact time-dependent propagation (interaction picture, RK4)
# ---------------------------------------------------------------------------

def _propagate_tones(params: DriveParams, psi0: np.ndarray, t_final: float,
                     n_record: int = 1, xy8_tau: float | None = None,
                     track_k: int | None = None):
    """Evolve psi0 under h_rwa exactly (up to RK4 step error).

    Without decoupling the single-tone case is solved exactly in the frame
    co-rotating with the tone; the multi-tone case integrates in the
    interaction picture of the diagonal part omega_n*Iz + a*Sz*Iz.

    With xy8_tau set, instantaneous ensemble pi-pulses fire every xy8_tau
    (XYXY YXYX cycle) and the propagation runs in the toggling frame: the
    diagonal part flips sign at every pulse (the pulses invert the
    quantization axis) while the noncollinear I_x coupling flips sign at
    the Y pulses, averaging it away over a full cycle. With track_k set
    the tone phase integrates the sign-flipped detuning a*k so the tone
    follows the toggled resonance. Populations are exact at multiples of
    8*xy8_tau, where the toggling cycle closes.
    Returns (times, states; in each branch amplitudes of the basis states
    are phase-rotated but their populations are frame-independent).
    """
    spin = params.spin_i
    d = dim(spin)
    mz = m_values(spin)
    diag = np.concatenate((params.omega_n * mz - 0.5 * params.a * mz,
                           params.omega_n * mz + 0.5 * params.a * mz))
    ix = op_collective(spin, "x").mat
    v_nc = params.a_nc * np.kron(_SZ, ix)
    sx = np.kron(_SX, np.eye(d))
    sy = np.kron(_SY, np.eye(d))
    tones = params.all_tones()

    if len(tones) == 1 and xy8_tau is None and track_k is None:
        # Single tone: in the frame co-rotating with the tone the
        # Hamiltonian is static, so the propagation is exact via one
        # eigendecomposition.
        det, phi, rabi = tones[0]
        sz = np.kron(_SZ, np.eye(d))
        h_static = (np.diag(diag) - det * sz + v_nc
                    + rabi * (np.cos(phi) * np.kron(_SX, np.eye(d))
                              + np.sin(phi) * np.kron(_SY, np.eye(d))))
        evals, evecs = np.linalg.eigh(h_static)
        c0 = evecs.conj().T @ psi0.astype(complex)
        ts = np.linspace(t_final / max(n_record, 1), t_final, max(n_record, 1))
        szdiag = np.concatenate((-0.5 * np.ones(d), 0.5 * np.ones(d)))
        out = []
        for t in ts:
            psi_rot = evecs @ (np.exp(-1j * evals * t) * c0)
            out.append(np.exp(1j * (diag - det * szdiag) * t) * psi_rot
                       * np.exp(-1j * diag * t))
        return ts, np.array(out)

    # oscillation rate of the fastest term sets the integration step
    w_fast = 2 * np.max(np.abs(diag)) + max((abs(dd) for dd, _, _ in tones),
                                            default=0.0)
    hmax = params.a_nc * spin / 2 + sum(r for _, _, r in tones) + 1e-9
    n_steps = max(64, int(np.ceil((50 * hmax + 4 * w_fast) * t_final)))
    dt = t_final / n_steps

    if xy8_tau is not None:
        tau = xy8_tau
        n_int = int(np.ceil(t_final / tau)) + 1
        s_z = np.empty(n_int)
        s_x = np.empty(n_int)
        zf = xf = 1.0
        for n in range(n_int):
            s_z[n], s_x[n] = zf, xf
            zf = -zf  # every pulse inverts the quantization axis
            if "XYXYYXYX"[n % 8] == "Y":
                xf = -xf  # Y pulses invert I_x

        def toggled_phase(t):
            """integral of s_z over [0, t] (tracked-tone phase per unit
            a*k): (-1)^n (t - n*tau) + tau*(n mod 2)"""
            n = int(t // tau)
            return (-1.0 if n % 2 else 1.0) * (t - n * tau) \
                + tau * (n % 2)

        h_diag = np.diag(diag)

        def rhs(t, psi):
            n = min(int(t // tau), n_int - 1)
            h = s_z[n] * h_diag + s_x[n] * v_nc
            for det, phi, rabi in tones:
                if track_k is not None:
                    # each tone follows its own toggled resonance a*k
                    arg = det * toggled_phase(t) + phi
                else:
                    arg = det * t + phi
                h = h + rabi * (np.cos(arg) * sx + np.sin(arg) * sy)
            return -1j * (h @ psi)
    else:
        def rhs(t, psi):
            ph = np.exp(1j * diag * t)
            h = ph[:, None] * v_nc * ph.conj()[None, :]
            for det, phi, rabi in tones:
                arg = det * t + phi
                hd = rabi * (np.cos(arg) * sx + np.sin(arg) * sy)
                h = h + ph[:, None] * hd * ph.conj()[None, :]
            return -1j * (h @ psi)

    psi = psi0.astype(complex).copy()
    times, states = [], []
    record_every = max(1, n_steps // max(n_record, 1))
    t = 0.0
    for step in range(n_steps):
        k1 = rhs(t, psi)
        k2 = rhs(t + dt / 2, psi + dt / 2 * k1)
        k3 = rhs(t + dt / 2, psi + dt / 2 * k2)
        k4 = rhs(t + dt, psi + dt * k3)
        psi = psi + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        psi /= np.linalg.norm(psi)  # dynamics are unitary; kill step drift
        t += dt
        if (step + 1) % record_every == 0 or step == n_steps - 1:
            if xy8_tau is None:
                out = np.exp(-1j * diag * t) * psi
            else:
                out = psi
            times.append(t)
            states.append(out)
    return np.array(times), np.array(states)


def multitone_cond_rotation(params: DriveParams, m_set, psi: float,
                            xy8_tau: float | None = None,
                            track: bool = False) -> dict:
    """Electron rotation by angle psi on the targeted ensemble levels.

    One tone per target M at its conditional resonance (detuning a*M, phase
    compensating hyperfine accumulation); returns per-M rotation fidelity
    on targeted blocks and max leakage on untargeted neighbors. With
    xy8_tau set, decoupling pulses fire every xy8_tau; track makes each
    tone follow the toggled resonance schedule.
    """
    spin = params.spin_i
    d = dim(spin)
    tones = list(params.tones)
    if not tones:
        raise ValueError("params.tones must carry one tone per target level")
    if len(tones) != len(m_set):
        raise ValueError("need exactly one tone per target level")
    dets = sorted(wk - params.omega_e for wk, _, _ in tones)
    linewidth = max(r for _, _, r in tones)
    for da, db in zip(dets, dets[1:]):
        if abs(da - db) < linewidth:
            logger.warning("tone collision: detunings %.3f and %.3f within "
                           "a linewidth", da, db)
    rabi = tones[0][2]
    t_gate = psi / rabi
    fids, leaks = {}, {}
    c, s = np.cos(psi / 2.0), np.sin(psi / 2.0)
    for m in np.round(m_values(spin)).astype(int):
        v = np.zeros(2 * d, dtype=complex)
        idx = int(round(spin - m))
        v[idx] = 1.0  # |down, M>
        _, states = _propagate_tones(params, v, t_gate, n_record=1,
                                     xy8_tau=xy8_tau,
                                     track_k=1 if track else None)
        out = states[-1]
        if m in m_set:
            # overlap with the target rotation up to the z-phase that the
            # per-tone phase schedule compensates in hardware
            fids[m] = float((abs(out[idx]) * abs(c)
                             + abs(out[d + idx]) * abs(s)) ** 2)
        else:
            leaks[m] = float(abs(out[d + idx]) ** 2)
    return {"fidelity": fids, "leakage": leaks, "t_gate": t_gate}


def xy8_resonance_track(params: DriveParams, k: int, t: float,
                        tau: float | None = None) -> float:
    """Resonance-frequency schedule under decoupling pulses.

    With pi-pulses every tau (the first at t=tau), n(t) = floor(t/tau)
    counts pulses so far and the schedule reads
    (-1)^n a k t + (-1)^n 2 tau a k floor(n/2).
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if tau is None:
        tau = np.pi / params.omega_n
    n = int(t // tau)
    sign = -1.0 if n % 2 else 1.0
    return sign * params.a * k * t + sign * 2 * tau * params.a * k * (n // 2)


# ---------------------------------------------------------------------------
# Sideband flip-flop
# ---------------------------------------------------------------------------

def sideband_flipflop(params: DriveParams, m: int,
                      direction: str = "flop") -> tuple[float, float]:
    """Drive the |down,M+1> <-> |up,M> (flop) or |down,M-1> <-> |up,M>
    (flip) sideband and propagate exactly.

    The tone sits at the sideband resonance offset -/+ omega_n + a(M +/- 1/2)
    from the carrier, corrected for the second-order level shift induced by
    the static noncollinear coupling; the effective coupling is
    a_nc' = Omega*a_nc/omega_n and the expected transfer time
    2*pi/(a_nc'*g_M) seeds a scan for the first transfer maximum. Returns
    (t_gate, max transfer population).
    """
    if direction not in ("flop", "flip"):
        raise ValueError("direction must be 'flop' or 'flip'")
    spin = params.spin_i
    d = dim(spin)
    rabi = params.omega
    if rabi <= 0:
        raise ValueError("params.omega must be positive")
    if rabi > 0.2 * params.omega_n:
        warnings.warn("sideband regime questionable: Omega not small "
                      "against the detuning omega_n")
    # second-order level shift of |s, M'> from the static a_nc Sz Ix term:
    # a_nc^2 * M' / (8 * (omega_n + s*a))
    w_up = params.omega_n + 0.5 * params.a
    w_dn = params.omega_n - 0.5 * params.a
    # differential Stark shift of the pair from the off-resonant carrier
    stark = (rabi ** 2 / 4.0) * (1.0 / w_dn + 1.0 / w_up)
    if direction == "flop":
        det = -params.omega_n + params.a * (m + 0.5) + stark
        det += params.a_nc ** 2 * (m / (8 * w_up) - (m + 1) / (8 * w_dn))
        g = np.sqrt(spin * (spin + 1) - m * (m + 1))
        src, dst = m + 1, m
    else:
        det = params.omega_n + params.a * (m - 0.5) - stark
        det += params.a_nc ** 2 * (m / (8 * w_up) - (m - 1) / (8 * w_dn))
        g = np.sqrt(spin * (spin + 1) - m * (m - 1))
        src, dst = m - 1, m
    a_eff = rabi * params.a_nc / params.omega_n
    t_guess = 2 * np.pi / (a_eff * g)
    p = DriveParams(spin, omega=rabi, delta=det, omega_e=params.omega_e,
                    omega_n=params.omega_n, a=params.a, a_nc=params.a_nc)
    v = np.zeros(2 * d, dtype=complex)
    v[int(round(spin - src))] = 1.0  # |down, src>
    times, states = _propagate_tones(p, v, 1.6 * t_guess, n_record=400)
    pop = np.abs(states[:, d + int(round(spin - dst))]) ** 2
    best = int(np.argmax(pop))
    return float(times[best]), float(pop[best])


def schrieffer_wolff_check(params: DriveParams) -> float:
    """Residual of the generator identity producing the sideband coupling.

    With G1 = -i (a_nc/omega_n) Sz Ix, the second-order cross term with a
    transverse drive Omega*Sx is [G1, Omega*Sx] = (Omega*a_nc/omega_n)*Sy*Ix
    -- exactly the effective sideband interaction strength
    a_nc' = Omega*a_nc/omega_n. Returns the max-abs residual of that
    identity (algebraically zero).
    """
    spin = params.spin_i
    d = dim(spin)
    ix = op_collective(spin, "x").mat
    g1 = -1j * (params.a_nc / params.omega_n) * np.kron(_SZ, ix)
    drive = params.omega * np.kron(_SX, np.eye(d))
    expected = (params.omega * params.a_nc / params.omega_n) \
        * np.kron(_SY, ix)
    comm = g1 @ drive - drive @ g1
    return float(np.max(np.abs(comm - expected)))
