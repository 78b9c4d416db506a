"""Command-line front end: ``qfree <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_GUARD, EXIT_FAILED = 0, 1, 2, 3, 4
OUTPUT_ENV = "QFREE_OUTPUT_DIR"


class ValidationError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# output

def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    return x


def _encode(x, indent: int = 0) -> str:
    pad, inner = "  " * indent, "  " * (indent + 1)
    if x is None:
        return "null"
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return format(x, ".17g") if math.isfinite(x) else "null"
    if isinstance(x, str):
        return json.dumps(x, ensure_ascii=False)
    if isinstance(x, dict):
        if not x:
            return "{}"
        body = ",\n".join(f"{inner}{_encode(str(k))}: {_encode(v, indent + 1)}" for k, v in x.items())
        return "{\n" + body + "\n" + pad + "}"
    if isinstance(x, list):
        if not x:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in x):
            return "[" + ", ".join(_encode(v) for v in x) + "]"
        return "[\n" + ",\n".join(inner + _encode(v, indent + 1) for v in x) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(x).__name__}")


def to_json(obj) -> str:
    """JSON text with every float written to 17 significant digits."""
    return _encode(_plain(obj)) + "\n"


def _word_str(w) -> str:
    return " ".join(str(i + 1) for i in w)


class Output:
    def __init__(self, directory: str | None, stem: str):
        self.dir = Path(directory) if directory else None
        self.stem = stem
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)

    def write(self, suffix: str, text: str):
        if self.dir is not None:
            (self.dir / f"{self.stem}{suffix}").write_text(text, encoding="utf-8")

    def csv(self, suffix: str, header, rows):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([format(v, ".17g") if isinstance(v, float) else v for v in r])
        self.write(suffix, buf.getvalue())

    def report(self, obj) -> str:
        text = to_json(obj)
        self.write(".json", text)
        return text


# ---------------------------------------------------------------------------
# config

def read_config(path: str) -> dict:
    out = {}
    for ln, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{ln}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out


_ALIASES = {"Δt": "dt", "delta_t": "dt", "d": "degree"}


def apply_config(args, parser: argparse.ArgumentParser):
    if not getattr(args, "config", None):
        return args
    types = {a.dest: a.type for a in parser._actions if a.dest not in ("help", "config")}
    for k, v in read_config(args.config).items():
        k = _ALIASES.get(k, k)
        if k not in types:
            raise ValidationError(f"unknown config key {k!r}")
        conv = types[k] or str
        try:
            setattr(args, k, conv(v))
        except (TypeError, ValueError) as e:
            raise ValidationError(f"config key {k!r}: {e}") from None
    return args


def validate(args):
    if hasattr(args, "q") and not abs(args.q) < 1:
        raise ValidationError("|q| must be below 1")
    if hasattr(args, "N") and args.N < 1:
        raise ValidationError("N must be at least 1")
    for cap in ("n", "D", "degree", "K", "seeds", "points"):
        v = getattr(args, cap, None)
        if v is not None and v < (0 if cap == "D" else 1):
            raise ValidationError(f"{cap} must be at least {0 if cap == 'D' else 1}")
    for pos in ("dt", "T"):
        v = getattr(args, pos, None)
        if v is not None and not v > 0:
            raise ValidationError(f"{pos} must be positive")


# ---------------------------------------------------------------------------
# subcommands

def _params(args):
    from .qfock import QParams
    return QParams(args.q, args.N)


def _spec(args):
    from .deriv import difference_quotient, q_semicircular_spec
    from .qfock import FockTrace
    p = _params(args)
    if args.q == 0 and args.D == 0:
        return difference_quotient(args.N, FockTrace(p))
    return q_semicircular_spec(p, args.D, getattr(args, "legs", "adjoint"))


def _base(args, **extra):
    d = {"subcommand": args.cmd, "q": args.q, "N": args.N}
    d.update(extra)
    return d


def cmd_moments(args, out: Output):
    from .qfock import moment_oracle, trace_word
    from .ncalg import all_words
    p = _params(args)
    rows, worst = [], 0.0
    for w in all_words(args.N, args.degree):
        v = trace_word(w, p)
        worst = max(worst, abs(v - moment_oracle(w, p)))
        rows.append((_word_str(w), args.q, float(v)))
    out.csv(".csv", ("word", "q", "value"), rows)
    return _base(args, degree=args.degree, words=len(rows), max_oracle_diff=worst), EXIT_OK


def cmd_gram(args, out: Output):
    from . import wick
    from .ncalg import all_words
    p = _params(args)
    methods = ("brute", "recursive") if args.method == "both" else (args.method,)
    mats = {m: wick.gram(args.n, p, m) for m in methods}
    ref = mats[methods[-1]]
    words = [_word_str(w) for w in all_words(args.N, args.n, args.n)]
    for m, g in mats.items():
        out.csv(f"_{m}.csv", ["word"] + words, [[words[i]] + list(map(float, g[i])) for i in range(len(words))])
    rep = _base(args, n=args.n, method=args.method,
                lambda_min=float(np.linalg.eigvalsh(ref)[0]),
                theta_bound=wick.min_eig_bound(args.n, p, "theta"),
                simplified_bound=wick.min_eig_bound(args.n, p, "simplified"),
                words=words, matrices={m: g for m, g in mats.items()})
    if len(mats) == 2:
        diff = float(np.max(np.abs(mats["brute"] - mats["recursive"])))
        rep["max_abs_diff"] = diff
        rep["match"] = diff <= 1e-12
        return rep, EXIT_OK if diff <= 1e-12 else EXIT_VALIDATION
    return rep, EXIT_OK


def _parse_word(text: str, N: int):
    toks = text.replace(",", " ").split()
    try:
        w = tuple(int(t) - 1 for t in toks)
    except ValueError:
        raise ValidationError(f"bad word {text!r}") from None
    if any(not 0 <= i < N for i in w):
        raise ValidationError(f"letters must lie in 1..{N}")
    return w


def cmd_wick(args, out: Output):
    from . import qfock, wick
    from .ncalg import dumps
    p = _params(args)
    w = _parse_word(args.word, args.N)
    poly = wick.wick_poly(w, p)
    err = (qfock.poly_vector(poly, args.q) - qfock.FockVector.basis(args.N, w)).max_abs()
    rows = [(_word_str(k), float(np.real(c))) for k, c in poly.sorted_items()]
    out.csv(".csv", ("word", "coefficient"), rows)
    out.write(".txt", dumps(poly))
    return _base(args, word=_word_str(w), terms=len(rows), vector_err=err,
                 coefficients={k: v for k, v in rows}), EXIT_OK


def cmd_xi(args, out: Output):
    from . import wick
    from .ncalg import dumps
    xi = wick.xi_expansion(_params(args), args.D, args.legs)
    out.write(".txt", dumps(xi.terms))
    return _base(args, D=args.D, legs=args.legs, terms=len(xi.terms.terms), rho=xi.rho,
                 level_rho_norms=xi.level_rho_norms, ratio=xi.ratio, tail_bound=xi.tail_bound,
                 operator_tail=xi.operator_tail), EXIT_OK


def cmd_conjugate(args, out: Output):
    from .deriv import conjugate_from_zeta, fisher_and_wasserstein_const
    spec = _spec(args)
    conj = conjugate_from_zeta(spec, args.route, args.convention)
    rep = fisher_and_wasserstein_const(spec, conj)
    extra = {}
    if args.polynomials:
        from .ncalg import dumps
        for j in range(args.N):
            out.write(f"_xi{j + 1}.txt", dumps(conj.polynomial(j)))
    if args.cmd == "fisher":
        extra["coderivation_sq"] = rep.coderivation_sq
        extra["coderivation_skipped"] = math.isnan(rep.coderivation_sq)
    return _base(args, D=args.D, convention=args.convention, xi_norms=rep.xi_norms,
                 phi_star=rep.phi_star, C=rep.C, tail_bound=rep.tail_bound, **extra), EXIT_OK


def cmd_stationarity(args, out: Output):
    from .generator import (from_derivation, majorant_generator, stationarity_residual,
                            stationarity_time)
    from .ncalg import MajorantSeries
    spec = _spec(args)
    gen = from_derivation(spec, args.variant)
    st = stationarity_residual(gen, args.degree, args.route)
    rho = gen.R0 + 1.0 if args.rho is None else args.rho
    mg = majorant_generator(gen, rho)
    phi = MajorantSeries(1, {args.degree: 1})
    tail = spec.xi.tail_bound if spec.xi is not None and args.q != 0 else 0.0
    rows = [(_word_str(w), float(r)) for w, r in st.residuals.items()]
    out.csv(".csv", ("word", "residual"), rows)
    return _base(args, D=args.D, degree=args.degree, variant=args.variant, rho=rho, R0=gen.R0,
                 residuals={k: v for k, v in rows}, max=st.max_residual,
                 worst_word=_word_str(st.worst_word), tail_budget=tail,
                 t0=stationarity_time(mg), K=mg.K, C=mg.C(phi)), EXIT_OK


def _sde_config(args):
    from . import simulate
    from .deriv import conjugate_from_zeta
    common = dict(dt=args.dt, T=args.T, K=args.K, seed=args.seed, norm_guard=args.norm_guard,
                  moment_degree=args.degree, sample_every=args.sample_every)
    if args.q == 0:
        return simulate.ou_config(args.N, **common)
    spec = _spec(args)
    conj = conjugate_from_zeta(spec)
    xi = [conj.polynomial(j) for j in range(args.N)]
    psi = [[spec.values[k][i] for k in range(args.N)] for i in range(args.N)]
    return simulate.SDEConfig(psi, xi, **common)


def cmd_simulate(args, out: Output):
    from . import simulate
    cfg = _sde_config(args)
    rows, drifts, herm = [], {}, 0.0
    for s in range(args.seeds):
        c = simulate.SDEConfig(cfg.psi, cfg.xi, cfg.dt, cfg.T, cfg.K, args.seed + s,
                               cfg.norm_guard, cfg.moment_degree, cfg.sample_every)
        tr = simulate.run_sde(c)
        herm = max(herm, tr.max_hermiticity_residual)
        for t, m in zip(tr.times, tr.moments):
            for w, v in m.items():
                rows.append((args.seed + s, t, _word_str(w), v))
        for w in tr.words:
            drifts.setdefault(w, []).append(tr.moments[-1][w] - tr.moments[0][w])
    out.csv(".csv", ("seed", "t", "word", "trace"), rows)
    mean = {w: abs(float(np.mean(v))) for w, v in drifts.items()}
    worst = max(mean, key=mean.get)
    return _base(args, K=args.K, dt=args.dt, T=args.T, D=args.D, seed=args.seed, seeds=args.seeds,
                 max_mean_drift=mean[worst], worst_word=_word_str(worst),
                 max_hermiticity_residual=herm, guard_tripped=False), EXIT_OK


def cmd_coupling(args, out: Output):
    from . import simulate
    cfg = _sde_config(args)
    grid = np.logspace(math.log10(args.tmin), math.log10(args.tmax), args.points)
    res = simulate.coupling_experiment(cfg, grid)
    out.csv(".csv", ("t", "distance"), zip(res.times, res.distances))
    return _base(args, K=args.K, dt=args.dt, D=args.D, seed=args.seed, times=res.times,
                 distances=res.distances, slope=res.slope, intercept=res.intercept,
                 guard_tripped=False), EXIT_OK


def cmd_bounds(args, out: Output):
    from . import dimension
    grid = [args.q] if not args.grid else [float(x) for x in args.grid.split(",")]
    rows = dimension.limit_check(args.N, grid) if args.grid else [dimension.report(args.q, args.N)]
    recs = [{"q": r.q, "N": r.N, "threshold": r.threshold, "threshold_float": float(r.threshold),
             "in_range": r.in_range, "eta": r.eta_bound, "exceeds_one": r.exceeds_one,
             "status": r.status, "notes": r.notes} for r in rows]
    lines = [f"{'q':>10} {'N':>3} {'threshold':>10} {'eta':>10}  status"]
    for r in rows:
        eta = "-" if r.eta_bound is None else f"{r.eta_bound:.5f}"
        lines.append(f"{r.q:>10g} {r.N:>3} {float(r.threshold):>10.6f} {eta:>10}  {r.status}")
    out.write(".txt", "\n".join(lines) + "\n")
    rep = dict(recs[0]) if len(recs) == 1 else {"N": args.N, "rows": recs}
    rep["subcommand"] = args.cmd
    if args.grid:
        rep["monotone_toward_N"] = dimension.is_monotone_toward_N(rows)
    if args.table:
        print("\n".join(lines), file=sys.stderr)
    return rep, EXIT_OK


def cmd_verify_all(args, out: Output):
    from . import acceptance
    ids = [c.strip() for c in args.criteria.split(",") if c.strip()]
    if not ids:
        raise ValidationError("empty criterion list")
    unknown = [c for c in ids if c not in acceptance.CRITERIA]
    if unknown:
        raise ValidationError(f"unknown criteria {unknown}")
    results = acceptance.run(ids, include_literal=args.force_literal)
    for r in results:
        print(r.line(), file=sys.stderr)
    failed = [r.cid for r in results if not r.passed and not r.expected_failure]
    rep = {"subcommand": args.cmd, "criteria": [
        {"id": r.cid, "name": r.name, "passed": r.passed, "expected_failure": r.expected_failure,
         "details": r.details} for r in results], "failed": failed, "all_passed": not failed}
    return rep, EXIT_OK if not failed else EXIT_FAILED


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--q", type=float, default=0.0, help="deformation parameter, |q| < 1")
    common.add_argument("--N", type=int, default=2, help="number of generators")
    common.add_argument("--config", help="key=value file; its values override flags")
    common.add_argument("--out", default=os.environ.get(OUTPUT_ENV),
                        help=f"output directory (default ${OUTPUT_ENV}; none writes stdout only)")

    p = _Parser(prog="qfree", description="q-semicircular free-probability toolkit")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(fn=fn)
        return sp

    sp = add("moments", cmd_moments, "moment table τ(X_w) as CSV")
    sp.add_argument("--degree", type=int, default=4)

    sp = add("gram", cmd_gram, "Gram matrix of level n")
    sp.add_argument("--n", type=int, required=True, help="tensor level")
    sp.add_argument("--method", choices=("brute", "recursive", "both"), default="recursive")

    sp = add("wick", cmd_wick, "Wick polynomial of a word")
    sp.add_argument("--word", required=True, help="1-based letters, e.g. '1 2 1'")

    sp = add("xi", cmd_xi, "truncated Ξ in the tensor text format")
    sp.add_argument("--D", type=int, default=4)
    sp.add_argument("--legs", choices=("adjoint", "same"), default="adjoint")

    for name, help_ in (("conjugate", "conjugate variables"), ("fisher", "Fisher information and C")):
        sp = add(name, cmd_conjugate, help_)
        sp.add_argument("--D", type=int, default=4)
        sp.add_argument("--convention", choices=("adjoint", "literal"), default="adjoint")
        sp.add_argument("--route", choices=("auto", "dense", "tensor3", "elementary"), default="auto")
        sp.add_argument("--polynomials", action="store_true", help="write ξ_j text files")

    sp = add("stationarity", cmd_stationarity, "τ(L X_w) residuals and majorant constants")
    sp.add_argument("--D", type=int, default=4)
    sp.add_argument("--degree", type=int, default=4)
    sp.add_argument("--variant", choices=("ito", "literal"), default="ito")
    sp.add_argument("--route", choices=("auto", "trace", "poly"), default="auto")
    sp.add_argument("--rho", type=float, default=None, help="majorant radius (default R₀ + 1)")

    for name, fn, help_ in (("simulate", cmd_simulate, "Euler–Maruyama matrix SDE"),
                            ("coupling", cmd_coupling, "coupling distance scaling")):
        sp = add(name, fn, help_)
        sp.add_argument("--D", type=int, default=2)
        sp.add_argument("--K", type=int, default=100)
        sp.add_argument("--dt", type=float, default=1e-3)
        sp.add_argument("--T", type=float, default=1.0)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--degree", type=int, default=4, help="moment degree")
        sp.add_argument("--norm-guard", dest="norm_guard", type=float, default=None)
        sp.add_argument("--sample-every", dest="sample_every", type=int, default=0)
        if name == "simulate":
            sp.add_argument("--seeds", type=int, default=1)
        else:
            sp.add_argument("--tmin", type=float, default=1e-3)
            sp.add_argument("--tmax", type=float, default=1e-1)
            sp.add_argument("--points", type=int, default=9)

    sp = add("bounds", cmd_bounds, "δ₀ lower bound report")
    sp.add_argument("--n", dest="N", type=int, default=argparse.SUPPRESS, help="alias of --N")
    sp.add_argument("--grid", help="comma-separated q values for a limit table")
    sp.add_argument("--table", action="store_true", help="print a table on stderr")

    sp = add("verify-all", cmd_verify_all, "run the acceptance criteria")
    sp.add_argument("--criteria", default="1,2,3,4,5,6,7,8,9,10,11")
    sp.add_argument("--force-literal", action="store_true",
                    help="add the literal-drift expected-failure entry")
    return p


def main(argv=None) -> int:
    from .simulate import NonFiniteError, NormGuardError
    from .wick import NearSingularGramError
    from .generator import DivergentMajorantError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    sub = parser._subparsers._group_actions[0].choices[args.cmd]
    try:
        args = apply_config(args, sub)
        validate(args)
        out = Output(args.out, args.cmd)
        rep, code = args.fn(args, out)
    except (NormGuardError, NonFiniteError, NearSingularGramError, DivergentMajorantError) as e:
        sys.stdout.write(to_json({"subcommand": args.cmd, "guard_tripped": True, "error": str(e)}))
        return EXIT_GUARD
    except (ValidationError, ValueError, OSError) as e:
        print(f"qfree {args.cmd}: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    sys.stdout.write(out.report(rep))
    return code


if __name__ == "__main__":
    sys.exit(main())
