"""Command-line interface binding the code, noise, benchmark and pulse
modules into reproducible experiments.

Every subcommand writes a results CSV, a JSON mirror, and a resolved-config
JSON from which the run can be replayed byte-identically (timestamps live
only in the config file):

    spincat kl-scan --N 6 --I 15:60:3 --tol 1e-6
    spincat rerun out/kl-scan_config.json

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

__all__ = ["cli_dispatch", "main"]

_TABLE_RATIOS = {  # published improvement ratios R = tau_max / t_Dicke
    (6, 10.0): 3.93, (10, 10.0): 4.13,
    (6, 100.0): 5.60, (10, 100.0): 14.82,
    (6, 1000.0): 13.45, (10, 1000.0): 4.01,
}


def _parse_range(spec: str) -> list[float]:
    """'15:60:3' -> 15,18,...,60 (inclusive); '9,15,30' -> listed values."""
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) not in (2, 3):
            raise ValueError(f"bad range spec: {spec!r}")
        lo, hi = float(parts[0]), float(parts[1])
        step = float(parts[2]) if len(parts) == 3 else 1.0
        if step <= 0 or hi < lo:
            raise ValueError(f"bad range spec: {spec!r}")
        n = int(round((hi - lo) / step))
        return [lo + j * step for j in range(n + 1) if lo + j * step
                <= hi + 1e-9]
    return [float(x) for x in spec.split(",") if x]


def _parse_word(token: str):
    """'Iz', 'Iz2', 'Iz^3', 'I+', 'I-' -> ErrorWord."""
    from .catcode import ErrorWord

    t = token.strip().replace("^", "")
    if t == "I+":
        return ErrorWord(1, 0)
    if t == "I-":
        return ErrorWord(-1, 0)
    if t.startswith("Iz"):
        order = int(t[2:]) if t[2:] else 1
        return ErrorWord(0, order)
    raise ValueError(f"unknown error word: {token!r}")


def _outdir(args) -> Path:
    root = os.environ.get("SPINCAT_OUTPUT_ROOT", ".")
    out = Path(args.outdir)
    if not out.is_absolute():
        out = Path(root) / out
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(args, name: str, columns, rows, resolved: dict) -> Path:
    from .io_utils import emit_results, write_json

    out = _outdir(args)
    emit_results([list(r) for r in rows], out / name, columns=columns)
    resolved = dict(resolved)
    resolved["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    write_json(out / f"{name}_config.json", resolved)
    return out


def _resolved(args, subcommand: str) -> dict:
    skip = {"func"}
    return {
        "subcommand": subcommand,
        "args": {k: v for k, v in vars(args).items() if k not in skip},
    }


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_kl_scan(args) -> int:
    from .catcode import CatCode, max_dephasing_order

    spins = _parse_range(args.I)
    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        l_max = list(pool.map(
            lambda s: max_dephasing_order(CatCode(args.N, s), tol=args.tol),
            spins))
    alpha, beta = np.polyfit(spins, l_max, 1)
    rows = [(args.N, s, l, alpha, beta) for s, l in zip(spins, l_max)]
    _emit(args, "kl-scan",
          ["N", "I", "l_max", "alpha_fit", "beta_fit"], rows,
          _resolved(args, "kl-scan"))
    print(f"kl-scan: N={args.N}, alpha={alpha:.4f} (2/N={2 / args.N:.4f}), "
          f"beta={beta:.3f}")
    return 0


def _cmd_encode(args) -> int:
    from .catcode import CatCode
    from .gates import JointState, apply_circuit
    from .protocols import (ProtocolParams, decode_circuit, encode_circuit,
                            encode_fidelity)
    from .collective import dim

    p = ProtocolParams(CatCode(args.N, args.I))
    fid = encode_fidelity(p)
    ens = np.zeros(dim(args.I), dtype=complex)
    ens[0] = 1.0
    st = JointState.product(args.I, [0.6, 0.8], ens)
    rt = apply_circuit(decode_circuit(p),
                       apply_circuit(encode_circuit(p), st))
    roundtrip_err = 1.0 - abs(np.vdot(st.amp, rt.amp)) ** 2
    rows = [(args.N, args.I, fid, roundtrip_err)]
    _emit(args, "encode",
          ["N", "I", "encode_fidelity", "roundtrip_infidelity"], rows,
          _resolved(args, "encode"))
    print(f"encode: N={args.N} I={args.I} fidelity={fid:.8f} "
          f"roundtrip_err={roundtrip_err:.2e}")
    return 0


def _cmd_gates(args) -> int:
    if args.action != "test":
        raise ValueError(f"unknown gates action: {args.action!r}")
    from .benchmarks import ft_gate_test
    from .catcode import CatCode
    from .protocols import ProtocolParams

    p = ProtocolParams(CatCode(args.N, args.I))
    gates = args.gates.split(",")
    words = [w for w in args.words.split(",") if w]
    points = [(g, w) for g in gates for w in words]
    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        fids = list(pool.map(
            lambda gw: ft_gate_test(gw[0], _parse_word(gw[1]), p,
                                    k=args.k, l=args.l), points))
    rows = [(args.N, args.I, g, w, f)
            for (g, w), f in zip(points, fids)]
    _emit(args, "gates-test",
          ["N", "I", "gate", "error_word", "fidelity"], rows,
          _resolved(args, "gates"))
    for (g, w), f in zip(points, fids):
        print(f"gates test: {g:10s} {w:5s} fidelity={f:.6f}")
    return 0


def _cmd_correct(args) -> int:
    from .catcode import CatCode, ErrorWord
    from .gates import JointState, apply_circuit_density
    from .protocols import ProtocolParams, correct_pm

    code = CatCode(args.N, args.I)
    circ = correct_pm(ProtocolParams(code))
    rows = []
    for ladder in (1, -1):
        worst = 1.0
        for a, b in ((1, 0), (1, 1), (1, -1j)):
            psi = code.logical(a, b)
            img = ErrorWord(ladder, 0).apply(psi)
            st = JointState.product(code.spin_i, [1, 0], img.amp)
            rho = apply_circuit_density(circ, st.density(), code.spin_i)
            tgt = JointState.product(code.spin_i, [1, 0], psi.amp)
            worst = min(worst, float(np.real(np.vdot(tgt.amp,
                                                     rho @ tgt.amp))))
        rows.append((args.N, args.I, ladder, worst))
    _emit(args, "correct",
          ["N", "I", "ladder", "worst_recovered_fidelity"], rows,
          _resolved(args, "correct"))
    for _, _, ladder, worst in rows:
        print(f"correct: I{'+' if ladder > 0 else '-'} worst "
              f"fidelity={worst:.6f}")
    return 0


def _cmd_taumax(args) -> int:
    from .benchmarks import improvement_ratio

    if args.I > 60 and not args.large:
        raise ValueError("I > 60 takes minutes per point; "
                         "pass --large to confirm")
    res = improvement_ratio(args.N, args.eta, args.I,
                            f_target=args.ftarget,
                            l_values="auto" if args.large else (0, 1, 2,
                                                                3, 4))
    ref = _TABLE_RATIOS.get((args.N, float(args.eta)), "")
    rows = [(args.N, args.I, args.eta, args.ftarget, res["tau_max"],
             res["t_dicke"], res["ratio"], res["l_used"], ref)]
    _emit(args, "taumax",
          ["N", "I", "eta", "f_target", "tau_max[1/gamma_tot]",
           "t_dicke[1/gamma_tot]", "ratio", "l_used",
           "reference_ratio_at_I210"], rows, _resolved(args, "taumax"))
    print(f"taumax: N={args.N} I={args.I} eta={args.eta} "
          f"tau_max={res['tau_max']:.4e} t_dicke={res['t_dicke']:.4e} "
          f"R={res['ratio']:.3f}" + (f" (reference {ref})" if ref else ""))
    return 0


def _cmd_dicke(args) -> int:
    from .benchmarks import dicke_infidelity, dicke_infidelity_lindblad

    closed = dicke_infidelity(args.t, args.eta, args.I)
    row = [args.I, args.eta, args.t, closed]
    cols = ["I", "eta", "t[1/gamma_tot]", "infidelity_closed_form"]
    if args.lindblad:
        direct = dicke_infidelity_lindblad(args.t, args.eta, args.I)
        row += [direct, abs(direct - closed) / max(direct, 1e-300)]
        cols += ["infidelity_lindblad", "relative_difference"]
    _emit(args, "dicke", cols, [row], _resolved(args, "dicke"))
    print(f"dicke: I={args.I} eta={args.eta} t={args.t} "
          f"closed-form infidelity={closed:.4e}")
    return 0


def _cmd_pulses(args) -> int:
    from .pulses import (DriveParams, PulseSequence,
                         engineered_rotation_sim, fourier_coeffs,
                         optimize_sequence)

    if args.action == "coeffs":
        switchings = tuple(float(x) for x in args.switchings.split(",")
                           if x)
        seq = PulseSequence(args.tau, switchings)
        fr = fourier_coeffs(seq, args.lmax)
        rows = [(l, fr.p[l], fr.q[l]) for l in range(args.lmax + 1)]
        _emit(args, "pulses-coeffs", ["l", "P_l", "Q_l"], rows,
              _resolved(args, "pulses"))
        print(f"pulses coeffs: tau={args.tau} "
              f"Q={np.round(fr.q, 6).tolist()}")
    elif args.action == "optimize":
        seq = optimize_sequence(args.l, tau=args.tau, seed=args.seed)
        fr = fourier_coeffs(seq, args.l)
        rows = [(args.l, args.tau,
                 ";".join(repr(s) for s in seq.switchings),
                 fr.q[args.l], fr.p[args.l])]
        _emit(args, "pulses-optimize",
              ["l_target", "tau[1/a]", "switchings[1/a]", "Q_l", "P_l"],
              rows, _resolved(args, "pulses"))
        print(f"pulses optimize: |Q_{args.l}|={abs(fr.q[args.l]):.4f} "
              f"|P_{args.l}|={abs(fr.p[args.l]):.2e}")
    elif args.action == "simulate":
        seq = optimize_sequence(args.l, tau=np.pi * args.l / args.omega_n,
                                seed=args.seed)
        p = DriveParams(args.I, omega_n=args.omega_n, a=args.a,
                        a_nc=args.anc)
        fid, strength = engineered_rotation_sim(seq, p, args.theta,
                                                l_target=args.l)
        rows = [(args.I, args.omega_n, args.theta, fid, strength)]
        _emit(args, "pulses-simulate",
              ["I", "omega_n[a]", "theta_target", "fidelity",
               "effective_strength[a]"], rows, _resolved(args, "pulses"))
        print(f"pulses simulate: fidelity={fid:.6f} "
              f"strength={strength:.6f}")
    else:
        raise ValueError(f"unknown pulses action: {args.action!r}")
    return 0


def _cmd_cycle_time(args) -> int:
    from .benchmarks import realistic_cycle_time
    from .catcode import CatCode

    res = realistic_cycle_time(CatCode(args.N, args.I),
                               f_target=args.ftarget)
    rows = [(args.N, args.I, res.total, res.pm_stage, res.z_stage,
             res.t_cond, res.omega_flip, res.l, res.fidelity)]
    _emit(args, "cycle-time",
          ["N", "I", "total[1/a]", "pm_stage[1/a]", "z_stage[1/a]",
           "t_cond[1/a]", "omega_flip[a]", "l", "fidelity"], rows,
          _resolved(args, "cycle-time"))
    print(f"cycle-time: N={args.N} I={args.I} total={res.total:.1f}/a "
          f"(pm {res.pm_stage:.1f}, z {res.z_stage:.1f})")
    return 0


def _cmd_wigner(args) -> int:
    from .catcode import CatCode
    from .collective import wigner_sphere

    kv = dict(item.split("=") for item in args.code.split(","))
    unknown = set(kv) - {"N", "I"}
    if unknown:
        raise ValueError(f"unknown code parameters: {sorted(unknown)}")
    code = CatCode(int(kv["N"]), float(kv["I"]))
    try:
        n_theta, n_phi = (int(x) for x in args.grid.split("x"))
    except Exception as exc:
        raise ValueError(f"bad grid spec: {args.grid!r}") from exc
    field = wigner_sphere(code.logical_state(args.which),
                          n_theta=n_theta, n_phi=n_phi)
    rows = [(th, ph, field.values[i, j])
            for i, th in enumerate(field.theta)
            for j, ph in enumerate(field.phi)]
    _emit(args, "wigner", ["theta[rad]", "phi[rad]", "wigner_value"],
          rows, _resolved(args, "wigner"))
    print(f"wigner: {args.grid} grid written "
          f"(max at theta,phi = {field.argmax()})")
    return 0


def _cmd_rerun(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        saved = json.load(fh)
    sub = saved["subcommand"]
    stored = dict(saved["args"])
    stored.pop("timestamp", None)
    stored.pop("command", None)
    argv = [sub]
    action = stored.pop("action", None)
    if action is not None:
        argv.append(action)
    for key, val in stored.items():
        if val is None:
            continue
        if isinstance(val, bool):
            if val:
                argv.append(f"--{key}")
            continue
        argv.extend([f"--{key.replace('_', '-')}", str(val)])
    return cli_dispatch(argv)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="spincat",
        description="Spin-cat code experiments: scans, gate tests, noise "
                    "benchmarks, pulse engineering, and Wigner exports.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--outdir", default=".",
                       help="output directory (relative paths resolve "
                            "under $SPINCAT_OUTPUT_ROOT)")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads over independent points")
        p.add_argument("--seed", type=int, default=7,
                       help="seed for randomized searches")

    p = sub.add_parser("kl-scan", help="correctable dephasing order vs I")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--I", required=True,
                   help="range lo:hi:step or comma list")
    p.add_argument("--tol", type=float, default=1e-6)
    common(p)
    p.set_defaults(func=_cmd_kl_scan)

    p = sub.add_parser("encode", help="encoding fidelity and round trip")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--I", type=float, required=True)
    common(p)
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("gates", help="logical gate tests")
    p.add_argument("action", choices=["test"])
    p.add_argument("--N", type=int, default=6)
    p.add_argument("--I", type=float, default=60)
    p.add_argument("--gates",
                   default="cnot_ens,cnot_elec,hadamard,phase")
    p.add_argument("--words", default="Iz,Iz2,Iz3,I+,I-")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--l", type=int, default=3)
    common(p)
    p.set_defaults(func=_cmd_gates)

    p = sub.add_parser("correct", help="ladder-error correction circuit")
    p.add_argument("--N", type=int, default=6)
    p.add_argument("--I", type=float, default=30)
    common(p)
    p.set_defaults(func=_cmd_correct)

    p = sub.add_parser("taumax", help="idle tolerance vs Dicke baseline")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--I", type=float, required=True)
    p.add_argument("--ftarget", type=float, default=0.999)
    p.add_argument("--large", action="store_true",
                   help="allow I > 60 (hours-long runs)")
    common(p)
    p.set_defaults(func=_cmd_taumax)

    p = sub.add_parser("dicke", help="uncorrected Dicke-encoding baseline")
    p.add_argument("--I", type=float, required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--t", type=float, required=True,
                   help="idle time in 1/gamma_tot")
    p.add_argument("--lindblad", action="store_true",
                   help="cross-check against the master equation")
    common(p)
    p.set_defaults(func=_cmd_dicke)

    p = sub.add_parser("pulses", help="pulse engineering")
    p.add_argument("action", choices=["coeffs", "optimize", "simulate"])
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--switchings", default="",
                   help="comma list of switching times (coeffs)")
    p.add_argument("--lmax", type=int, default=4)
    p.add_argument("--l", type=int, default=2,
                   help="target harmonic (optimize/simulate)")
    p.add_argument("--I", type=float, default=4)
    p.add_argument("--omega-n", dest="omega_n", type=float, default=5.0)
    p.add_argument("--a", type=float, default=0.1)
    p.add_argument("--anc", type=float, default=0.1)
    p.add_argument("--theta", type=float, default=np.pi / 2)
    common(p)
    p.set_defaults(func=_cmd_pulses)

    p = sub.add_parser("cycle-time",
                       help="realistic correction-cycle timing")
    p.add_argument("--N", type=int, default=6)
    p.add_argument("--I", type=float, required=True)
    p.add_argument("--ftarget", type=float, default=0.998)
    common(p)
    p.set_defaults(func=_cmd_cycle_time)

    p = sub.add_parser("wigner", help="spherical Wigner function export")
    p.add_argument("--code", required=True, help="e.g. N=6,I=30")
    p.add_argument("--which", type=int, default=0, choices=[0, 1])
    p.add_argument("--grid", default="181x361")
    common(p)
    p.set_defaults(func=_cmd_wigner)

    p = sub.add_parser("rerun",
                       help="replay a run from its resolved-config JSON")
    p.add_argument("config")
    p.set_defaults(func=_cmd_rerun)

    return ap


def cli_dispatch(argv) -> int:
    """Parse argv and run the subcommand; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help, 2 for usage errors
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError, json.JSONDecodeError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
