"""Command-line entry point: ``polyroth <command> [options]``.

Exit codes: 0 success, 2 precondition or schema error, 3 unresolved
numerics or exhausted search, 4 a verification check failed.
Range options such as ``--window -50:50`` accept 'a:b' (inclusive) or
'2^a:2^b' (dyadic steps); comma lists are accepted where a sweep is expected.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import io as pio
from .errors import CheckFailed, ConstructionExhausted, NotFound, PreconditionError, UnresolvedError
from .fitting import fit_decay
from .mollify import bourgain_lower_bound
from .oscillatory import (CRIT_INTERVAL, ProductPhase, claim45_check, critical_points, dual_phase_field,
                          hbound_check, hormander_decay_probe, mixed_derivative_probe, oscillatory_integral,
                          stationary_compare)
from .patterns import DELTA_FLOOR, adversarial_sets, find_pattern, max_gap
from .poly import RealPoly, normalize_Q
from .scales import ScaleParams, build_admissible, classify_scales
from .trilinear import bilinear_decay_probe, decompose_I, trilinear_form

EXIT_OK, EXIT_PRECONDITION, EXIT_UNRESOLVED, EXIT_CHECK = 0, 2, 3, 4


@dataclass
class ExperimentConfig:
    command: str
    params: dict = field(default_factory=dict)
    out: str | None = None
    format: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(d["command"], dict(d.get("params", {})), d.get("out"), d.get("format"))

    def fmt(self, default: str) -> str:
        if self.format:
            return self.format
        if self.out and self.out.endswith(".json"):
            return "json"
        if self.out and self.out.endswith(".csv"):
            return "csv"
        return default

    def record(self) -> dict:
        """The part of the config stored inside artifacts (no output path)."""
        return {"command": self.command, "params": self.params}


def workers() -> int:
    cap = os.environ.get("POLYROTH_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = max(1, min(n, int(cap)))
        except ValueError:
            raise PreconditionError(f"POLYROTH_THREADS must be an integer, got {cap!r}") from None
    return n


# ---------------------------------------------------------------- helpers

def _params(cfg) -> ScaleParams:
    return ScaleParams(g0=int(cfg.params.get("gamma0", 10)), theta=int(cfg.params.get("theta", 30)))


def _Q(cfg):
    """(poly, pair, Q): Q is the normalized polynomial of the pair, or the input polynomial itself."""
    p = pio.load_poly(cfg.params["poly"])
    ref = cfg.params.get("pair")
    if not ref:
        return p, None, RealPoly(p.coeffs)
    pair = pio.load_pair(ref, p)
    return p, pair, normalize_Q(p, pair.j, pair.ell, pair.m0)


def _emit_table(cfg, columns, rows, payload, default="csv"):
    if not cfg.out:
        return
    if cfg.fmt(default) == "json":
        pio.write_json(cfg.out, cfg.command, {"columns": columns, "rows": rows, **payload}, cfg.record())
    else:
        pio.write_csv(cfg.out, cfg.command, columns, rows, cfg.record())


def _emit_doc(cfg, payload):
    if cfg.out:
        pio.write_json(cfg.out, cfg.command, payload, cfg.record())


def _range(s):
    lo, hi = s.split(":")
    return int(pio.parse_number(lo)), int(pio.parse_number(hi))


# ---------------------------------------------------------------- commands

def cmd_scales(cfg):
    p = pio.load_poly(cfg.params["poly"])
    window = _range(cfg.params["window"]) if cfg.params.get("window") else None
    cls = classify_scales(p, _params(cfg), window)
    rows = [[r.k, r.J[0] if r.J else "", ";".join(map(str, r.J1)), int(r.good)] for r in cls.records]
    _emit_table(cfg, ["k", "dominating_r", "in_J1r", "good"], rows,
                {"bad": cls.bad, "window": list(cls.window)})
    return f"scales: {len(rows)} scales in [{cls.window[0]}, {cls.window[1]}], {len(cls.bad)} bad", EXIT_OK


def cmd_admissible(cfg):
    p = pio.load_poly(cfg.params["poly"])
    A = build_admissible(p, _params(cfg), int(cfg.params.get("count", 8)))
    _emit_doc(cfg, {"poly": pio.poly_to_doc(p), "E": A.E, "Lambda": A.Lambda, "gamma_d": A.gamma_d,
                    "pairs": [q.to_dict() for q in A.pairs], "checks": A.checks})
    failed = [k for k, v in A.checks.items() if not v]
    msg = f"admissible: {len(A.pairs)} pairs, first ({A.E[0]}, {A.Lambda[0]}), Gamma_d={A.gamma_d}"
    if failed:
        return msg + f"; failed checks: {', '.join(failed)}", EXIT_CHECK
    return msg + "; all checks pass", EXIT_OK


def cmd_martingale(cfg):
    f = pio.load_grid(cfg.params["f"])
    mode = cfg.params.get("mode", "dyadic")
    lhs, rhs = bourgain_lower_bound(f, int(cfg.params["k"]), int(cfg.params["ell"]), mode)
    ok = lhs >= rhs - 1e-12 * max(1.0, abs(rhs))
    _emit_doc(cfg, {"lhs": lhs, "rhs": rhs, "ok": ok, "mode": mode})
    return f"martingale[{mode}]: lhs={lhs:.12g} rhs={rhs:.12g} {'ok' if ok else 'VIOLATED'}", \
        EXIT_OK if ok else EXIT_CHECK


def cmd_trilinear(cfg):
    p = pio.load_poly(cfg.params["poly"])
    f = pio.load_grid(cfg.params["f"])
    res = trilinear_form(f, p, int(cfg.params.get("j", 0)), int(cfg.params.get("n", 12)))
    _emit_doc(cfg, {"value": res.value, "value_fine": res.value_fine, "gap": res.gap, "n": res.n,
                    "extrapolated": res.extrapolated, "unresolved": res.unresolved})
    msg = f"trilinear: I={res.value:.10g} (n={res.n}), n+1 gap {res.gap:.3g}"
    return (msg + " unresolved", EXIT_UNRESOLVED) if res.unresolved else (msg, EXIT_OK)


def cmd_decompose(cfg):
    p = pio.load_poly(cfg.params["poly"])
    f = pio.load_grid(cfg.params["f"])
    P = cfg.params
    out = decompose_I(f, p, int(P.get("j", 0)), int(P["ell1"]), int(P["ell"]), int(P["ell2"]))
    out = {k: float(v) for k, v in out.items()}
    checks = {"split": out["split_error"] <= 1e-9, "I2": abs(out["I2"]) <= out["I2_bound"] + 1e-12,
              "I41": out["I41"] <= out["I41_bound"] + 1e-12}
    _emit_doc(cfg, {"values": out, "checks": checks})
    failed = [k for k, v in checks.items() if not v]
    msg = f"decompose: I={out['I']:.6g} I1={out['I1']:.6g} I2={out['I2']:.3g} I3={out['I3']:.3g}"
    return (msg + f"; failed: {', '.join(failed)}", EXIT_CHECK) if failed else (msg, EXIT_OK)


def cmd_decay(cfg):
    p, pair, _ = _Q(cfg)
    if pair is None:
        raise PreconditionError("decay needs --pair")
    P = cfg.params
    ms = pio.parse_sweep(P.get("m", "6:12"), integer=True)
    trials = int(P.get("trials", 64))
    fit = bilinear_decay_probe(p, pair, ms, trials, int(P.get("seed", 0)), P.get("n"))
    rows = [[m, _num(float(y)), trials] for m, y in zip(ms, fit.y)]
    _emit_table(cfg, ["m", "log2_norm_max", "trials"], rows, {"fit": fit.to_dict()})
    return f"decay: gamma_hat={fit.gamma:.4g} residual={fit.max_residual:.3g} ({fit.notes['regime']})", EXIT_OK


def cmd_patterns(cfg):
    P = cfg.params
    p = pio.load_poly(P["poly"])
    grid = int(P.get("grid", 1 << 20))
    action = P["action"]
    if action == "find":
        S = pio.load_set(P["set"])
        delta = float(P.get("delta", 0.0))
        try:
            inst = find_pattern(S, p, delta, grid)
        except NotFound as e:
            _emit_doc(cfg, {"found": False, "best_t": e.best})
            return f"patterns find: none with gap ratio > {delta}; best t below threshold {e.best}", EXIT_CHECK
        _emit_doc(cfg, {"found": True, **inst.to_dict()})
        return f"patterns find: x={float(inst.x):.9g} t={float(inst.t):.9g} gap_ratio={inst.gap_ratio:.6g}", EXIT_OK
    if action == "maxgap":
        S = pio.load_set(P["set"])
        g = max_gap(S, p, grid)
        _emit_doc(cfg, {"max_gap": g, "density": S.density})
        return f"patterns maxgap: {g:.9g} (density {S.density:.4g})", EXIT_OK
    kinds = [k.strip() for k in P.get("kinds", "random,cantor,shifted-blocks").split(",")]
    eps_list = pio.parse_sweep(P.get("eps", "0.1,0.25,0.5"))
    seeds = int(P.get("seeds", 4))
    N = float(P.get("N", 1024))
    jobs = [(k, e, s) for k in kinds for e in eps_list for s in range(seeds)]

    def one(job):
        kind, eps, seed = job
        S = adversarial_sets(kind, eps, N, seed)
        return [kind, eps, seed, N, S.density, max_gap(S, p, grid)]

    with ThreadPoolExecutor(max_workers=workers()) as ex:
        rows = list(ex.map(one, jobs))
    low = [r for r in rows if r[5] < DELTA_FLOOR]
    _emit_table(cfg, ["kind", "epsilon", "seed", "N", "density", "max_gap"], rows, {"floor": DELTA_FLOOR})
    msg = f"patterns sweep: {len(rows)} sets, min gap {min(r[5] for r in rows):.4g}, {len(low)} below {DELTA_FLOOR}"
    return msg, EXIT_CHECK if low else EXIT_OK


def cmd_oscillate(cfg):
    _, _, Q = _Q(cfg)
    P = cfg.params
    xi, eta, lam = float(P["xi"]), float(P["eta"]), float(P["lambda"])
    cps = critical_points(Q, xi, eta)
    res = oscillatory_integral(Q, xi, eta, lam, center=cps[0].t if len(cps) == 1 else None)
    _emit_doc(cfg, {"value": [res.value.real, res.value.imag], "abs": abs(res.value), "error": res.error,
                    "panels": res.panels, "critical_points": [c.t for c in cps],
                    "degenerate": [c.degenerate for c in cps]})
    return (f"oscillate: |I|={abs(res.value):.10g} err={res.error:.2g} panels={res.panels} "
            f"critical={[round(c.t, 12) for c in cps]}"), EXIT_OK


def cmd_stationary(cfg):
    _, _, Q = _Q(cfg)
    P = cfg.params
    xi, eta = float(P["xi"]), float(P["eta"])
    lams = pio.parse_sweep(P.get("lambda", "2^8:2^18"))
    rows, fit = stationary_compare(Q, xi, eta, lams)
    table = [[pio.dyadic(r.lam), _num(r.quad.real), _num(r.quad.imag), _num(r.main.real), _num(r.main.imag),
              _num(abs(r.remainder)), _num(r.remainder_scaled), _num(r.ratio), _num(r.quad_error)] for r in rows]
    cols = ["lambda", "quad_re", "quad_im", "main_re", "main_im", "abs_remainder", "scaled_remainder",
            "remainder_over_inv_lambda", "quad_error"]
    _emit_table(cfg, cols, table, {"fit": fit.to_dict()})
    limit = -0.9 if fit.notes["critical_points"] else -2.0
    ok = fit.slope <= limit
    msg = f"stationary-compare: slope={fit.slope:.4f} (limit {limit}) R_cap={fit.notes['R_cap']:.4g}"
    return msg, EXIT_OK if ok else EXIT_CHECK


def cmd_hbound(cfg):
    _, pair, Q = _Q(cfg)
    P = cfg.params
    d0 = pair.d0 if pair else int(P.get("d0") or Q.degree)
    rep = hbound_check(Q, d0, int(P.get("samples", 1000)), int(P.get("seed", 0)), float(P.get("slack", 0.0)))
    _emit_doc(cfg, asdict(rep))
    msg = (f"hbound: min(1 - Q'Q'''/Q''^2)={rep.min_ratio_gap:.4g} threshold={rep.threshold:.4g} "
           f"used={rep.used} skipped={rep.skipped}")
    return msg, EXIT_OK if rep.ok else EXIT_CHECK


def cmd_mixed(cfg):
    _, pair, Q = _Q(cfg)
    P = cfg.params
    alphas = pio.parse_sweep(P.get("alpha", "0.05,0.1,0.2,0.4"))
    m0 = int(P["m0"]) if P.get("m0") is not None else None
    rep = mixed_derivative_probe(Q, pair, alphas, int(P.get("samples", 200)), int(P.get("seed", 0)), m0=m0)
    rows = [[r["alpha"], r["used"], r["skipped"], _num(r["min"]), _num(r["min_closed_form"]), _num(r["c_probe"])]
            for r in rep["rows"]]
    _emit_table(cfg, ["alpha", "used", "skipped", "min_abs_mixed", "min_closed_form", "c_probe"], rows,
                {"loglog_slope": rep["loglog_slope"], "m0": rep["m0"]})
    s = rep["loglog_slope"]
    return f"mixed-derivative: m0={rep['m0']} log-log slope={'n/a' if s is None else f'{s:.3f}'}", EXIT_OK


def cmd_hormander(cfg):
    P = cfg.params
    lams = pio.parse_sweep(P.get("lambda", "2^6:2^14"))
    rect = tuple(_frange(s) for s in P.get("rect", "0:1,0:1").split(","))
    if P.get("phase", "xy") == "xy":
        phase = ProductPhase()
    else:
        _, _, Q = _Q(cfg)
        bracket = _frange(P["bracket"]) if P.get("bracket") else CRIT_INTERVAL
        phase = dual_phase_field(Q, rect, bracket)
    fit = hormander_decay_probe(phase, rect, lams, int(P.get("trials", 2)), int(P.get("seed", 0)))
    rows = [[pio.dyadic(l), _num(v)] for l, v in zip(lams, fit.notes["maxima"])]
    _emit_table(cfg, ["lambda", "norm_estimate"], rows, {"fit": fit.to_dict()})
    return f"hormander: slope={fit.slope:.4f} residual={fit.max_residual:.3g}", \
        EXIT_OK if fit.slope <= -0.4 else EXIT_CHECK


def _num(x) -> str:
    return repr(float(x))


def _frange(s):
    a, b = s.split(":")
    return pio.parse_number(a), pio.parse_number(b)


def cmd_claim45(cfg):
    p, pair, _ = _Q(cfg)
    if pair is None:
        raise PreconditionError("claim45 needs --pair")
    rep = claim45_check(p, pair, int(cfg.params.get("grid", 256)))
    _emit_doc(cfg, asdict(rep))
    msg = (f"claim45: degree {rep.degree} (expected {rep.expected_degree}), leading ratio {rep.leading_ratio:.4g}, "
           f"sign changes {rep.numeric_sign_changes}, floor {rep.floor:.3g}")
    return msg, EXIT_OK if rep.ok else EXIT_CHECK


def cmd_report(cfg):
    summary = build_report(cfg.params.get("files") or [])
    if cfg.out:
        if cfg.fmt("json") == "md":
            pio.atomic_write(cfg.out, report_markdown(summary))
        else:
            pio.write_json(cfg.out, "report", summary)
    n = sum(len(v) for k, v in summary.items() if k != "warnings")
    return f"report: {n} entries, {len(summary['warnings'])} warnings", EXIT_OK


def build_report(files) -> dict:
    out = {"admissible": [], "decay": [], "pattern_gaps": [], "stationary": [], "other": [], "warnings": []}
    for f in files:
        try:
            art = pio.read_artifact(f)
        except (OSError, ValueError) as e:
            out["warnings"].append(f"{f}: unreadable ({e})")
            continue
        if art["version"] != __version__:
            out["warnings"].append(f"{f}: version {art['version']} differs from {__version__}")
        case, cmd = Path(f).stem, art["command"]
        if cmd == "admissible" and art["kind"] == "json":
            doc = art["doc"]
            out["admissible"].append({"case": case, "pairs": doc.get("pairs", []), "checks": doc.get("checks", {})})
        elif cmd == "decay" and art["kind"] == "csv":
            rows = art["rows"]
            x = [float(r["m"]) for r in rows]
            y = [2.0 ** float(r["log2_norm_max"]) for r in rows]
            try:
                fit = fit_decay(x, y)
                out["decay"].append({"case": case, "gamma_hat": fit.gamma, "residual": fit.max_residual})
            except PreconditionError as e:
                out["warnings"].append(f"{f}: {e}")
        elif cmd == "patterns" and art["kind"] == "csv":
            by_eps = {}
            for r in art["rows"]:
                by_eps.setdefault(float(r["epsilon"]), []).append(float(r["max_gap"]))
            out["pattern_gaps"].append({"case": case, "table": [
                {"epsilon": e, "sets": len(v), "min_gap": min(v), "median_gap": float(np.median(v))}
                for e, v in sorted(by_eps.items())]})
        elif cmd == "stationary-compare" and art["kind"] == "csv":
            out["stationary"].append({"case": case, "rows": [
                {"lambda": r["lambda"], "abs_remainder": float(r["abs_remainder"]),
                 "scaled_remainder": float(r["scaled_remainder"])} for r in art["rows"]]})
        else:
            out["other"].append({"case": case, "command": cmd})
    return out


def report_markdown(summary: dict) -> str:
    lines = ["# polyroth report", ""]
    if summary["decay"]:
        lines += ["| case | gamma_hat | residual |", "|---|---|---|"]
        lines += [f"| {r['case']} | {r['gamma_hat']:.4g} | {r['residual']:.3g} |" for r in summary["decay"]]
        lines.append("")
    for g in summary["pattern_gaps"]:
        lines += [f"## gaps: {g['case']}", "", "| epsilon | sets | min | median |", "|---|---|---|---|"]
        lines += [f"| {r['epsilon']} | {r['sets']} | {r['min_gap']:.4g} | {r['median_gap']:.4g} |" for r in g["table"]]
        lines.append("")
    for s in summary["stationary"]:
        lines += [f"## stationary: {s['case']}", "", "| lambda | abs remainder |", "|---|---|"]
        lines += [f"| {r['lambda']} | {r['abs_remainder']:.4g} |" for r in s["rows"]]
        lines.append("")
    for a in summary["admissible"]:
        lines += [f"## pairs: {a['case']}", "", "| j | ell | d0 | m0 |", "|---|---|---|---|"]
        lines += [f"| {q['j']} | {q['ell']} | {q['d0']} | {q['m0']} |" for q in a["pairs"]]
        lines.append("")
    if summary["warnings"]:
        lines += ["## warnings", ""] + [f"- {w}" for w in summary["warnings"]]
    return "\n".join(lines) + "\n"


COMMANDS = {
    "scales": cmd_scales, "admissible": cmd_admissible, "martingale": cmd_martingale,
    "trilinear": cmd_trilinear, "decompose": cmd_decompose, "decay": cmd_decay, "patterns": cmd_patterns,
    "oscillate": cmd_oscillate, "stationary-compare": cmd_stationary, "hbound": cmd_hbound,
    "mixed-derivative": cmd_mixed, "hormander": cmd_hormander, "claim45": cmd_claim45, "report": cmd_report,
}


def run(config: ExperimentConfig) -> int:
    """Execute one configured command, print its summary line and return the exit code."""
    try:
        msg, code = COMMANDS[config.command](config)
    except (PreconditionError, ValueError, KeyError) as e:
        print(f"{config.command}: error: {e}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (UnresolvedError, ConstructionExhausted) as e:
        print(f"{config.command}: unresolved: {e}", file=sys.stderr)
        return EXIT_UNRESOLVED
    except (CheckFailed, AssertionError) as e:
        print(f"{config.command}: check failed: {e}", file=sys.stderr)
        return EXIT_CHECK
    print(msg)
    return code


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polyroth", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"polyroth {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def cmd(name, help, out_help="output file (.csv or .json)"):
        sp = sub.add_parser(name, help=help, description=help)
        sp.add_argument("--out", help=out_help)
        sp.add_argument("--format", choices=["csv", "json", "md"])
        return sp

    def scale_opts(sp):
        sp.add_argument("--gamma0", type=int, default=10, help="exponent g0 of Gamma0 = 2^g0")
        sp.add_argument("--theta", type=int, default=30)

    sp = cmd("scales", "classify dyadic scales; CSV columns k, dominating_r, in_J1r, good")
    sp.add_argument("--poly", required=True)
    sp.add_argument("--window", help="k range a:b (default covers every competing scale)")
    scale_opts(sp)

    sp = cmd("admissible", "build interlaced scale sequences E and Lambda; JSON with pairs and checks")
    sp.add_argument("--poly", required=True)
    sp.add_argument("--count", type=int, default=8)
    scale_opts(sp)

    sp = cmd("martingale", "cubic lower bound for dyadic averages or smooth mollifiers")
    sp.add_argument("--f", required=True, help="GridFunction or Set JSON")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--ell", type=int, required=True)
    sp.add_argument("--mode", choices=["dyadic", "smooth"], default="dyadic")

    sp = cmd("trilinear", "evaluate the trilinear form of f on [0, 1]")
    sp.add_argument("--f", required=True, help="GridFunction or Set JSON (Set intervals are divided by N)")
    sp.add_argument("--poly", required=True)
    sp.add_argument("--j", type=int, default=0)
    sp.add_argument("--n", type=int, default=12)

    sp = cmd("decompose", "split the localized form into I1 + I2 + I3 and compare with I4")
    sp.add_argument("--f", required=True)
    sp.add_argument("--poly", required=True)
    sp.add_argument("--j", type=int, default=0)
    for k in ("ell1", "ell", "ell2"):
        sp.add_argument(f"--{k}", type=int, required=True)

    sp = cmd("decay", "bilinear decay probe; CSV columns m, log2_norm_max, trials")
    sp.add_argument("--poly", required=True)
    sp.add_argument("--pair", required=True, help="pairs.json#k")
    sp.add_argument("--m", default="6:12")
    sp.add_argument("--trials", type=int, default=64)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n", type=int)

    sp = cmd("patterns", "pattern search: find | maxgap | sweep (CSV kind, epsilon, seed, N, density, max_gap)")
    sp.add_argument("action", choices=["find", "maxgap", "sweep"])
    sp.add_argument("--poly", required=True)
    sp.add_argument("--set")
    sp.add_argument("--delta", type=float, default=0.0)
    sp.add_argument("--grid", type=int, default=1 << 20)
    sp.add_argument("--kinds", default="random,cantor,shifted-blocks")
    sp.add_argument("--eps", default="0.1,0.25,0.5")
    sp.add_argument("--seeds", type=int, default=4)
    sp.add_argument("--N", type=float, default=1024)

    def phase_opts(sp, needs_xi=True):
        sp.add_argument("--poly", required=True)
        sp.add_argument("--pair", help="pairs.json#k; without it Q is the input polynomial")
        if needs_xi:
            sp.add_argument("--xi", type=float, required=True)
            sp.add_argument("--eta", type=float, required=True)

    sp = cmd("oscillate", "oscillatory integral of exp(i lambda (t xi + eta Q(t))) tau(t)")
    phase_opts(sp)
    sp.add_argument("--lambda", required=True, type=float)

    sp = cmd("stationary-compare", "quadrature against the leading stationary-phase term; CSV columns lambda, "
             "quad_re, quad_im, main_re, main_im, abs_remainder, scaled_remainder, remainder_over_inv_lambda, "
             "quad_error")
    phase_opts(sp)
    sp.add_argument("--lambda", default="2^8:2^18")

    sp = cmd("hbound", "sample the gradient bounds of H at critical points")
    phase_opts(sp, needs_xi=False)
    sp.add_argument("--d0", type=int)
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--slack", type=float, default=0.0)

    sp = cmd("mixed-derivative", "mixed derivative of Psi(xi,eta) - Psi(xi + 2^-m0 alpha, eta - alpha); CSV columns "
             "alpha, used, skipped, min_abs_mixed, min_closed_form, c_probe")
    phase_opts(sp, needs_xi=False)
    sp.add_argument("--alpha", default="0.05,0.1,0.2,0.4")
    sp.add_argument("--m0", type=int, help="override the pair's m0 (diagnostic)")
    sp.add_argument("--samples", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)

    sp = cmd("hormander", "norm decay of exp(i lambda phi(x, y)) operators; CSV columns lambda, norm_estimate")
    sp.add_argument("--phase", choices=["xy", "dual"], default="xy")
    sp.add_argument("--poly")
    sp.add_argument("--pair")
    sp.add_argument("--rect", default="0:1,0:1", help="x0:x1,y0:y1")
    sp.add_argument("--bracket", help="t range a:b holding the critical points (dual phase)")
    sp.add_argument("--lambda", default="2^6:2^14")
    sp.add_argument("--trials", type=int, default=2)
    sp.add_argument("--seed", type=int, default=0)

    sp = cmd("claim45", "degree and sign structure of the linear-dominant case expression")
    sp.add_argument("--poly", required=True)
    sp.add_argument("--pair", required=True)
    sp.add_argument("--grid", type=int, default=256)

    sp = cmd("report", "summarize result files into JSON or markdown")
    sp.add_argument("files", nargs="*")
    return ap


_NEG_VALUE = re.compile(r"^-[\d.]")


def _join_negative(argv):
    """Let '--opt -1:2' through argparse by rewriting it as '--opt=-1:2'."""
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        if a.startswith("--") and "=" not in a and i + 1 < len(argv) and _NEG_VALUE.match(argv[i + 1]):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
        else:
            out.append(a)
            i += 1
    return out


def config_from_args(ns: argparse.Namespace) -> ExperimentConfig:
    params = {k: v for k, v in vars(ns).items() if k not in ("command", "out", "format") and v is not None}
    return ExperimentConfig(ns.command, params, ns.out, ns.format)


def main(argv=None) -> int:
    argv = _join_negative(list(sys.argv[1:] if argv is None else argv))
    ns = build_parser().parse_args(argv)
    return run(config_from_args(ns))


if __name__ == "__main__":
    sys.exit(main())
