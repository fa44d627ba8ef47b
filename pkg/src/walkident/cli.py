"""``walkident`` command line: eval, verify, sweep, figure1, oracle.

Exit codes: 0 success or identity holds, 1 identity fails or closed form
disagrees with the oracle, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import sys
from fractions import Fraction

from . import closed_form as cf
from .checker import (
    BarrierParams,
    ChainParams,
    IdentityId,
    IdentityKind,
    Simple1DParams,
    WalkParams,
    barrier_grid,
    chain_grid,
    check_identity,
    gosper_grid,
    simple1d_grid,
    state_tables,
    sweep,
    walk_grid,
)
from .closed_form import CoefficientMode, GosperParams
from .exact_arith import format_decimal, format_rational, to_probability, to_rational
from .model import (
    ChainSpec,
    ModelError,
    Walk2DSpec,
    barrier_walk,
    load_model,
    simple1d_walk,
    uniform_walk,
)
from .oracle import (
    TrajectoryCapExceeded,
    chain_snapshot,
    gosper_race_snapshot,
    label_sort_key,
    mc_estimate,
    walk2d_snapshot,
)

MODELS = ("chain", "walk2d", "simple1d", "barrier2d", "gosper")
FIGURE1_N = 28
FIGURE1_PS = ("1/10", "9/10")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# rendering


def _render(fmt: str, columns: list[str], rows: list[dict], doc: dict, out) -> None:
    if fmt == "json":
        out.write(json.dumps(doc, indent=2) + "\n")
        return
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c, "")) for c in columns])
        out.write(buf.getvalue())
        return
    table = [columns] + [[_cell(row.get(c, "")) for c in columns] for row in rows]
    widths = [max(len(r[i]) for r in table) for i in range(len(columns))]
    for r in table:
        out.write("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() + "\n")
    summary = doc.get("summary")
    if summary:
        out.write(summary + "\n")


def _cell(value) -> str:
    if isinstance(value, Fraction):
        return format_rational(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return ""
    return str(value)


# ---------------------------------------------------------------------------
# argument handling


def _rational_arg(text: str) -> Fraction:
    try:
        return to_rational(text)
    except (TypeError, ValueError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _range_arg(text: str) -> list[int]:
    """``a:b`` (inclusive), ``a,b,c`` or a single integer."""
    try:
        if ":" in text:
            lo, hi = text.split(":", 1)
            return list(range(int(lo), int(hi) + 1))
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer range {text!r}") from None


def _list_arg(text: str) -> list[Fraction]:
    return [_rational_arg(x) for x in text.split(",") if x.strip()]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("json", "csv", "table"), default="table")
    p.add_argument("--mode", choices=("literal", "corrected"), default="literal")


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--n", type=int, help="chain states N, barrier size, or race length")
    g.add_argument("--p", type=_rational_arg, help="single probability (chain, simple1d, gosper)")
    for i in range(1, 5):
        g.add_argument(f"--p{i}", type=_rational_arg)
    g.add_argument("--probs", type=_list_arg, help="comma-separated level probabilities p_1..p_L")
    g.add_argument("--levels", type=int, help="delay-tower height L")
    for i in range(1, 5):
        g.add_argument(f"--j{i}", type=int, default=1, help=f"jump magnitude of move {i}")
    for i in range(1, 5):
        g.add_argument(f"--t{i}", type=int, default=1, help=f"duration of move {i}")
    g.add_argument("--uniform", action="store_true", help="p_1..p_4 = 1/4")
    g.add_argument("--model-file", help="JSON model file")


def _require(args, name: str):
    value = getattr(args, name)
    if value is None:
        raise UsageError(f"--{name.replace('_', '-')} is required")
    return value


def _four(args) -> tuple[Fraction, ...]:
    if args.uniform:
        return (Fraction(1, 4),) * 4
    ps = [args.p1, args.p2, args.p3, args.p4]
    if all(p is None for p in ps):
        raise UsageError("give --p1..--p4 or --uniform")
    if any(p is None for p in ps):
        raise UsageError("all of --p1..--p4 are required")
    return tuple(ps)


def _chain_spec(args) -> ChainSpec:
    if args.model_file:
        spec = load_model(args.model_file)
        if not isinstance(spec, ChainSpec):
            raise UsageError("model file does not describe a chain")
        return spec
    n = _require(args, "n")
    if args.probs is not None:
        probs = args.probs
    else:
        levels = args.levels or 1
        if levels == 1 and args.p is not None:
            probs = [args.p]
        else:
            named = [getattr(args, f"p{i}") for i in range(1, 5)][:levels]
            if levels > 4 or len(named) < levels or any(p is None for p in named):
                raise UsageError(f"give --p1..--p{levels} or --probs for a {levels}-level chain")
            probs = named
    if args.levels is not None and args.levels != len(probs):
        raise UsageError(f"--levels {args.levels} does not match {len(probs)} probabilities")
    return ChainSpec.from_probs(n, probs)


def _walk_spec(args) -> Walk2DSpec:
    if args.model_file:
        spec = load_model(args.model_file)
        if not isinstance(spec, Walk2DSpec):
            raise UsageError("model file does not describe a walk2d")
        return spec
    return uniform_walk(
        jumps=(args.j1, args.j2, args.j3, args.j4),
        durations=(args.t1, args.t2, args.t3, args.t4),
        probs=_four(args),
    )


def _times(args, default_all) -> list[int]:
    """``--m`` alone, or every time in ``default_all`` with ``--all-m``."""
    if args.all_m:
        return list(default_all)
    return [_require(args, "m")]


def _upto_m(args) -> list[int]:
    # free walks have no natural horizon: --all-m means 0..--m
    if args.all_m:
        return list(range(_require(args, "m") + 1))
    return [_require(args, "m")]


# ---------------------------------------------------------------------------
# eval


def cmd_eval(args, out) -> int:
    mode = CoefficientMode.parse(args.mode)
    model = args.model
    columns = ["m", "state", "value", "decimal"]
    rows: list[dict] = []
    results = []

    def add(m, state, value):
        rows.append({"m": m, "state": state, "value": value, "decimal": format_decimal(value)})

    if model == "chain":
        spec = _chain_spec(args)
        for m in _times(args, range(spec.n_states)):
            first, second = cf.chain_identity_terms(spec, m)
            positions = {}
            for k in range(1, spec.n_states):
                if spec.levels == 1:
                    q = cf.chain_position_prob(spec, k, m)
                else:
                    q = cf.multilevel_position_prob(spec, k, m)
                if q:
                    positions[k] = q
                    add(m, f"position {k}", q)
            add(m, "absorbed", second)
            add(m, "total", first + second)
            results.append({
                "m": m,
                "positions": {str(k): format_rational(q) for k, q in positions.items()},
                "absorbed": format_rational(second),
                "total": format_rational(first + second),
            })
        doc = {"model": "chain", "spec": spec.to_dict(), "results": results}
    elif model in ("walk2d", "simple1d"):
        if model == "walk2d":
            spec = _walk_spec(args)
        else:
            spec = simple1d_walk(_require(args, "p"))
        for m in _upto_m(args):
            if model == "walk2d":
                dist = cf.walk2d_distribution(spec, m, mode)
                total = cf.walk2d_identity_total(spec, m, mode)
            else:
                dist = {
                    (k, 0): q
                    for k in range(-m, m + 1)
                    if (q := cf.simple1d_point_prob(spec.moves[0].prob, k, m))
                }
                total = cf.simple1d_identity_total(spec.moves[0].prob, m)
            for (h, v), q in dist.items():
                add(m, f"({h},{v})" if model == "walk2d" else f"{h}", q)
            add(m, "total", total)
            results.append({
                "m": m,
                "points": [
                    {"h": h, "v": v, "mass": format_rational(q)} for (h, v), q in dist.items()
                ],
                "total": format_rational(total),
            })
        doc = {"model": model, "mode": mode.value, "spec": spec.to_dict(), "results": results}
    elif model == "barrier2d":
        n = _require(args, "n")
        probs = _four(args)
        barrier_walk(n, probs)  # validates
        params = BarrierParams(n, probs, 0)
        for m in _times(args, range(2 * n + 1)):
            free, wall = cf.chain2d_distribution(params.barrier, probs, m, mode)
            for (h, v), q in free.items():
                if q:
                    add(m, f"({h},{v})", q)
            for (h, v), q in wall.items():
                if q:
                    add(m, f"barrier({h},{v})", q)
            first, second = sum(free.values(), Fraction(0)), sum(wall.values(), Fraction(0))
            add(m, "free", first)
            add(m, "barrier", second)
            add(m, "total", first + second)
            results.append({
                "m": m,
                "free": format_rational(first),
                "barrier": format_rational(second),
                "total": format_rational(first + second),
            })
        doc = {"model": "barrier2d", "mode": mode.value, "n": n,
               "probs": [format_rational(p) for p in probs], "results": results}
    else:
        params = GosperParams(_require(args, "p"), _require(args, "n"))
        for (h, t), q in cf.gosper_terms(params).items():
            add("", f"race({h},{t})", q)
        total = cf.gosper_total(params)
        add("", "total", total)
        doc = {"model": "gosper", "p": format_rational(params.p), "n": params.n,
               "total": format_rational(total)}
    _render(args.format, columns, rows, doc, out)
    return 0


# ---------------------------------------------------------------------------
# verify / sweep


def _identity(args) -> IdentityId:
    return IdentityId.parse(args.id, args.levels)


def _verify_params(ident: IdentityId, args) -> list:
    kind = ident.kind
    if kind is IdentityKind.GOSPER:
        return [GosperParams(_require(args, "p"), _require(args, "n"))]
    if kind is IdentityKind.EQ3_WALK2D:
        spec = _walk_spec(args)
        return [WalkParams(spec, m) for m in _upto_m(args)]
    if kind is IdentityKind.EQ4_SIMPLE1D:
        p = _require(args, "p")
        return [Simple1DParams(p, m) for m in _upto_m(args)]
    if kind is IdentityKind.EQ5_BARRIER2D:
        n = _require(args, "n")
        probs = _four(args)
        return [BarrierParams(n, probs, m) for m in _times(args, range(2 * n + 1))]
    if kind is IdentityKind.MULTILEVEL and args.levels is None:
        args.levels = ident.levels
    spec = _chain_spec(args)
    return [ChainParams(spec, m) for m in _times(args, range(spec.n_states))]


_REPORT_COLUMNS = ["identity", "params", "mode", "total", "residual", "holds", "oracle_match"]


def _report_row(report) -> dict:
    d = report.to_dict()
    params = d["params"]
    return {
        "identity": d["identity"],
        "params": json.dumps(params, separators=(",", ":")),
        "mode": d["mode"],
        "total": d["total"],
        "residual": d["residual"],
        "holds": d["holds"],
        "oracle_match": d["matches_oracle"],
    }


def cmd_verify(args, out) -> int:
    ident = _identity(args)
    mode = CoefficientMode.parse(args.mode)
    reports = [check_identity(ident, p, mode) for p in _verify_params(ident, args)]
    all_hold = all(r.holds for r in reports)
    doc = {"identity": str(ident), "all_hold": all_hold, "reports": [r.to_dict() for r in reports]}
    rows = [_report_row(r) for r in reports]
    doc["summary"] = f"{sum(r.holds for r in reports)}/{len(reports)} hold"
    if args.format == "json":
        doc.pop("summary")
    _render(args.format, _REPORT_COLUMNS, rows, doc, out)
    return 0 if all_hold else 1


def _sweep_grid(ident: IdentityId, args):
    kind = ident.kind
    ps = args.ps or [Fraction(1, 10), Fraction(1, 2), Fraction(9, 10)]
    if kind is IdentityKind.GOSPER:
        return gosper_grid(args.ns or range(1, 21), ps)
    if kind is IdentityKind.EQ4_SIMPLE1D:
        return simple1d_grid(ps, args.ms or range(0, 41))
    if kind is IdentityKind.EQ3_WALK2D:
        ms = args.ms or range(0, 9)
        if args.model_file or args.uniform or args.p1 is not None:
            specs = [_walk_spec(args)]
        else:
            specs = [uniform_walk(probs=v) for v in _simplex_vectors(ps)]
        return walk_grid(specs, ms)
    if kind is IdentityKind.EQ5_BARRIER2D:
        vectors = [_four(args)] if (args.uniform or args.p1 is not None) else [(Fraction(1, 4),) * 4]
        return barrier_grid(args.ns or range(1, 5), vectors, args.ms or (lambda n: range(2 * n + 1)))
    levels = ident.levels
    vectors = list(itertools.product(ps, repeat=levels))
    return chain_grid(args.ns or range(2, 11), vectors, args.ms or (lambda n: range(2 * n + 1)))


def _simplex_vectors(ps):
    """Probability vectors (a, b, c, 1 - a - b - c) built from the --ps values."""
    out = []
    for a, b, c in itertools.product(ps, repeat=3):
        d = 1 - a - b - c
        if d >= 0:
            out.append((a, b, c, d))
    return out or [(Fraction(1, 4),) * 4]


def cmd_sweep(args, out) -> int:
    ident = _identity(args)
    if ident.kind is IdentityKind.MULTILEVEL and args.levels is None:
        raise UsageError("multilevel sweeps need --levels or --id multilevel:L")
    mode = CoefficientMode.parse(args.mode)
    result = sweep(ident, _sweep_grid(ident, args), mode, workers=args.workers)
    rows = [_report_row(r) for r in result.reports]
    first = result.first_failure
    doc = result.to_dict()
    summary = f"{result.holds}/{len(result.reports)} hold, {result.oracle_mismatches} oracle mismatches"
    if first is not None:
        summary += "; first counterexample: " + json.dumps(first.to_dict()["params"], separators=(",", ":"))
    if args.format != "json":
        doc["summary"] = summary
    _render(args.format, _REPORT_COLUMNS, rows, doc, out)
    return 0 if result.fails == 0 else 1


# ---------------------------------------------------------------------------
# figure1


def figure1_rows(n: int, ps) -> list[dict]:
    rows = []
    for p in ps:
        spec = ChainSpec.from_probs(n, [p])
        for m in range(n):
            first, second = cf.chain_identity_terms(spec, m)
            rows.append({
                "p": spec.p,
                "m": m,
                "first_sum": first,
                "second_sum": second,
                "total": first + second,
                "first_dec": format_decimal(first),
                "second_dec": format_decimal(second),
            })
    return rows


FIGURE1_COLUMNS = ["p", "m", "first_sum", "second_sum", "total", "first_dec", "second_dec"]


def cmd_figure1(args, out) -> int:
    n = args.n if args.n is not None else FIGURE1_N
    if n < 2:
        raise UsageError("--n must be >= 2")
    ps = args.p or [to_probability(p) for p in FIGURE1_PS]
    ps = [to_probability(p) for p in ps]
    rows = figure1_rows(n, ps)
    buf = io.StringIO()
    _render("csv", FIGURE1_COLUMNS, rows, {}, buf)
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(buf.getvalue())
        except OSError as exc:
            raise UsageError(f"cannot write {args.out}: {exc}") from None
    else:
        out.write(buf.getvalue())
    return 0


# ---------------------------------------------------------------------------
# oracle


def _oracle_target(args):
    """(snapshot, identity or None, params or None, model spec for Monte Carlo)."""
    model = args.model
    m = _require(args, "m") if model != "gosper" else args.m
    if model == "chain":
        spec = _chain_spec(args)
        ident = IdentityId(IdentityKind.MULTILEVEL, spec.levels)
        if spec.levels == 1:
            ident = IdentityId(IdentityKind.EQ1_CHAIN)
        return chain_snapshot(spec, m), ident, ChainParams(spec, m), spec
    if model == "walk2d":
        spec = _walk_spec(args)
        snap = walk2d_snapshot(spec, m)
        if spec.barrier is not None or spec.has_instant_moves:
            return snap, None, None, spec
        return snap, IdentityId(IdentityKind.EQ3_WALK2D), WalkParams(spec, m), spec
    if model == "simple1d":
        p = _require(args, "p")
        spec = simple1d_walk(p)
        return walk2d_snapshot(spec, m), IdentityId(IdentityKind.EQ4_SIMPLE1D), Simple1DParams(p, m), spec
    if model == "barrier2d":
        n = _require(args, "n")
        probs = _four(args)
        spec = barrier_walk(n, probs)
        return walk2d_snapshot(spec, m), IdentityId(IdentityKind.EQ5_BARRIER2D), BarrierParams(n, probs, m), spec
    params = GosperParams(_require(args, "p"), _require(args, "n"))
    flips = m if m is not None else 2 * params.n - 1
    return gosper_race_snapshot(params.p, params.n, flips), IdentityId(IdentityKind.GOSPER), params, None


def cmd_oracle(args, out) -> int:
    mode = CoefficientMode.parse(args.mode)
    snap, ident, params, spec = _oracle_target(args)
    oracle = {**snap.mass, **snap.absorbed_mass}
    closed = None
    if args.compare:
        if ident is None:
            raise UsageError("no closed form exists for this model; drop --compare")
        if ident.kind is IdentityKind.GOSPER and snap.mass:
            raise UsageError("gosper comparison needs at least 2n-1 flips")
        closed, _ = state_tables(ident, params, mode)
    mc = None
    if args.samples:
        if spec is None:
            raise UsageError("Monte Carlo is available for chain and lattice models only")
        mc = mc_estimate(spec, snap.time, args.samples, args.seed)

    labels = set(oracle) | set(closed or {}) | set(mc.freq if mc else {})
    columns = ["state", "oracle"]
    if closed is not None:
        columns += ["closed_form", "match"]
    if mc is not None:
        columns += ["mc_freq"]
    rows = []
    mismatches = 0
    for label in sorted(labels, key=label_sort_key):
        row = {"state": str(label), "oracle": oracle.get(label, Fraction(0))}
        if closed is not None:
            c = closed.get(label, Fraction(0))
            row["closed_form"] = c
            row["match"] = c == row["oracle"]
            mismatches += not row["match"]
        if mc is not None:
            row["mc_freq"] = f"{mc.get(label):.6f}"
        if closed is None and not row["oracle"] and mc is None:
            continue
        rows.append(row)

    doc = snap.to_dict()
    if closed is not None:
        doc["mode"] = mode.value
        doc["comparison"] = [
            {"label": r["state"], "oracle": format_rational(r["oracle"]),
             "closed_form": format_rational(r["closed_form"]), "match": r["match"]}
            for r in rows
        ]
        doc["mismatches"] = mismatches
    if mc is not None:
        doc["monte_carlo"] = {"samples": mc.samples, "seed": args.seed,
                              "freq": {str(k): f"{v:.6f}" for k, v in mc.freq.items()}}
    if args.format != "json":
        summary = f"absorbed {format_rational(snap.absorbed)}"
        if closed is not None:
            summary += f"; {'match' if not mismatches else f'{mismatches} mismatches'}"
        doc["summary"] = summary
    _render(args.format, columns, rows, doc, out)
    return 1 if mismatches else 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="walkident", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="closed-form position probabilities and totals")
    p.add_argument("model", choices=MODELS)
    _add_model_flags(p)
    p.add_argument("--m", type=int)
    p.add_argument("--all-m", action="store_true")
    _add_common(p)

    p = sub.add_parser("verify", help="check one identity; exit 0 iff it holds")
    p.add_argument("--id", required=True)
    _add_model_flags(p)
    p.add_argument("--m", type=int)
    p.add_argument("--all-m", action="store_true")
    _add_common(p)

    p = sub.add_parser("sweep", help="check an identity over a parameter grid")
    p.add_argument("--id", required=True)
    _add_model_flags(p)
    p.add_argument("--ns", type=_range_arg, help="N values, e.g. 2:10")
    p.add_argument("--ps", type=_list_arg, help="probability values, e.g. 1/10,1/2,9/10")
    p.add_argument("--ms", type=_range_arg, help="time values, e.g. 0:8 (default depends on identity)")
    p.add_argument("--workers", type=int, default=1)
    _add_common(p)

    p = sub.add_parser("figure1", help="CSV of the tower/absorbed split against m")
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=_rational_arg, action="append", help="repeatable; default 0.1 and 0.9")
    p.add_argument("--out")

    p = sub.add_parser("oracle", help="exact process snapshot, optionally compared with the closed form")
    p.add_argument("model", choices=MODELS)
    _add_model_flags(p)
    p.add_argument("--m", type=int)
    p.add_argument("--compare", action="store_true")
    p.add_argument("--samples", type=int, default=0, help="add a Monte Carlo estimate")
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)
    return parser


COMMANDS = {
    "eval": cmd_eval,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "figure1": cmd_figure1,
    "oracle": cmd_oracle,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args, out)
    except (UsageError, ModelError, ValueError, TypeError, TrajectoryCapExceeded) as exc:
        print(f"walkident: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
