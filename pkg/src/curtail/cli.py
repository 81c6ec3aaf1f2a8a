"""Command-line interface.

Every command writes CSV (tables, tidy plot data) or JSON (single objects).
Each file starts with a metadata line naming the package version and a
digest of the scenario, and contains nothing that depends on the clock.
"""

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
from dataclasses import replace
from itertools import combinations
from pathlib import Path

import numpy as np

from . import __version__
from .cp import cp_matrix, search_theta_set
from .design import DesignFamily, DesignParams, DesignRealisation, parse_family
from .estimation import EstimatorKind, accuracy_curves, estimate_table
from .exact import operating_characteristics
from .oracle import audit
from .scenario import ScenarioError, load_scenario
from .search import (
    C,
    COLUMNS,
    CRITERIA,
    SearchConfig,
    default_workers,
    omni_grid,
    search_family,
    select_index,
)
from .wald import wald_boundaries, wald_ess

log = logging.getLogger("curtail")

TABLE_COLUMNS = (
    "criterion",
    "design",
    "r1",
    "e1",
    "n1",
    "r",
    "n2",
    "n",
    "ess0",
    "pct_s_p0",
    "ess1",
    "pct_s_p1",
    "theta_f",
    "theta_e",
    "alpha",
    "power",
)


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# inputs


class _Context:
    """Resolved parameters, search settings and output location for one command."""

    def __init__(self, args):
        self.args = args
        self.scenario = None
        if getattr(args, "scenario", None):
            self.scenario = load_scenario(args.scenario)
            params = self.scenario.params
            config = self.scenario.config
            self.digest = self.scenario.digest
        else:
            vals = [getattr(args, k, None) for k in ("alpha", "beta", "p0", "p1")]
            if any(v is None for v in vals):
                raise UsageError("give --scenario or all of --alpha --beta --p0 --p1")
            try:
                params = DesignParams(*vals)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
            config = SearchConfig(params)
            blob = json.dumps(vals).encode()
            self.digest = hashlib.sha256(blob).hexdigest()[:16]
        overrides = {}
        for flag, key in (("theta_e_min", "theta_e_min"), ("grid_step", "grid_step"), ("dominance", "dominance")):
            v = getattr(args, flag, None)
            if v is not None:
                overrides[key] = v
        try:
            self.config = replace(config, **overrides)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        self.params = params
        w = getattr(args, "workers", None)
        self.workers = w if w is not None else default_workers()
        self.cache_dir = getattr(args, "cache_dir", None) or os.environ.get("CURTAIL_CACHE_DIR") or None
        out = getattr(args, "out", None)
        if out is None and self.scenario is not None:
            out = self.scenario.out_dir
        self.out = Path(out) if out else None

    def header(self, command):
        return f"# curtail {__version__} scenario={self.digest} command={command}"

    def families(self, default=None):
        text = getattr(self.args, "families", None)
        if text:
            try:
                return [parse_family(f) for f in text.split(",") if f.strip()]
            except ValueError as exc:
                raise UsageError(str(exc)) from None
        if default is not None:
            return list(default)
        if self.scenario is not None:
            return list(self.scenario.families)
        return [parse_family(f) for f in ("simon", "simongo", "nsc", "sc", "mstage")]

    @property
    def reference(self):
        return self.scenario.reference if self.scenario is not None else DesignFamily.SIMON

    def search(self, family, block=1):
        log.info("searching %s (block %d)", family.value, block)
        return search_family(self.config, family, block=block, workers=self.workers, cache_dir=self.cache_dir)


def _design_from_args(args):
    if not args.family:
        raise UsageError("--family is required")
    try:
        family, block = parse_family(args.family)
        if args.block is not None:
            block = args.block
        tf = args.theta_f if args.theta_f is not None else 0.0
        te = args.theta_e if args.theta_e is not None else 1.0
        return DesignRealisation(family, args.r, args.n, args.r1, args.n1, args.e1, tf, te, block)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid design: {exc}") from None


# ---------------------------------------------------------------------------
# output


def _fmt(x, nd):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.{nd}f}"


def _int(v):
    v = int(v)
    return "" if v < 0 else str(v)


def _write_csv(ctx, name, command, columns, rows, warnings=()):
    buf = io.StringIO()
    buf.write(ctx.header(command) + "\n")
    for w in warnings:
        buf.write(f"# warning: {w}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    _emit(ctx, name, buf.getvalue())


def _write_json(ctx, name, command, obj):
    doc = {"curtail": __version__, "scenario": ctx.digest, "command": command}
    doc.update(obj)
    _emit(ctx, name, json.dumps(doc, indent=2, sort_keys=False) + "\n")


def _emit(ctx, name, text):
    if ctx.out is None:
        sys.stdout.write(text)
        return
    ctx.out.mkdir(parents=True, exist_ok=True)
    path = ctx.out / name
    path.write_text(text)
    log.info("wrote %s", path)


def _label(family, block=1):
    return f"Block size {block}" if family is DesignFamily.BLOCK_SC else family.label


def _pct(x, ref):
    if ref is None or ref == 0:
        return ""
    return _fmt(x / ref, 2)


def _table_row(criterion, family, block, row, ref):
    n1 = int(row[C["n1"]])
    N = int(row[C["N"]])
    # thresholds are shown for every curtailed family, blank for Simon-type designs
    show = family.curtailed
    return [
        criterion,
        _label(family, block),
        _int(row[C["r1"]]),
        _int(row[C["e1"]]),
        _int(n1),
        _int(row[C["r"]]),
        str(N - n1) if n1 >= 0 else "",
        str(N),
        _fmt(row[C["ess0"]], 4),
        _pct(row[C["ess0"]], ref[0] if ref else None),
        _fmt(row[C["ess1"]], 4),
        _pct(row[C["ess1"]], ref[1] if ref else None),
        _fmt(row[C["theta_f"]], 6) if show else "",
        _fmt(row[C["theta_e"]], 6) if show else "",
        _fmt(row[C["alpha"]], 4),
        _fmt(row[C["power"]], 4),
    ]


def _optimal_rows(aset, criterion):
    i = select_index(aset.rows, criterion)
    return None if i is None else aset.rows[i]


def _criteria(args):
    c = getattr(args, "criterion", "all") or "all"
    return CRITERIA if c == "all" else (c,)


def _design_table(ctx, sets, ref_set, criteria, with_wald):
    """Rows shaped like the comparison tables, plus warnings for empty families."""
    rows, warnings = [], []
    for (family, block), aset in sets.items():
        if len(aset) == 0:
            warnings.append(f"no feasible {_label(family, block)} design")
    wald = wald_ess(ctx.params) if with_wald else None
    for crit in criteria:
        ref_row = _optimal_rows(ref_set, crit) if ref_set is not None else None
        ref = None if ref_row is None else (ref_row[C["ess0"]], ref_row[C["ess1"]])
        for (family, block), aset in sets.items():
            row = _optimal_rows(aset, crit)
            if row is None:
                continue
            rows.append(_table_row(crit, family, block, row, ref))
        if wald is not None and crit in ("h0opt", "h1opt"):
            rows.append(
                [crit, "Wald", "", "", "", "", "", "", _fmt(wald[0], 4), _pct(wald[0], ref[0] if ref else None),
                 _fmt(wald[1], 4), _pct(wald[1], ref[1] if ref else None), "", "", "", ""]
            )
    return rows, warnings


def _admissible_rows(aset):
    out = []
    for row in aset.rows:
        out.append(
            [str(int(row[C["N"]])), str(int(row[C["r"]])), _int(row[C["r1"]]), _int(row[C["n1"]]), _int(row[C["e1"]])]
            + [_fmt(row[C[k]], 10) for k in COLUMNS[5:]]
        )
    return out


def _collect(ctx, families):
    sets = {}
    for family, block in families:
        sets[(family, block)] = ctx.search(family, block)
    ref_key = (ctx.reference, 1)
    ref_set = sets[ref_key] if ref_key in sets else ctx.search(ctx.reference)
    return sets, ref_set


def _set_name(family, block):
    return f"block{block}" if family is DesignFamily.BLOCK_SC else family.value


# ---------------------------------------------------------------------------
# commands


def cmd_search(ctx):
    families = ctx.families()
    sets, ref_set = _collect(ctx, families)
    rows, warnings = _design_table(ctx, sets, ref_set, _criteria(ctx.args), with_wald=True)
    for w in warnings:
        log.warning(w)
    _write_csv(ctx, "table.csv", "search", TABLE_COLUMNS, rows, warnings)
    if ctx.out is not None:
        for (family, block), aset in sets.items():
            _write_csv(ctx, f"admissible_{_set_name(family, block)}.csv", "search", COLUMNS, _admissible_rows(aset))
    return 0


def cmd_block(ctx):
    size = ctx.args.size
    if size < 1:
        raise UsageError("--size must be positive")
    comparison = ctx.families(default=[(ctx.reference, 1), (DesignFamily.MSTAGE, 1)])
    families = [f for f in comparison if f[0] is not DesignFamily.BLOCK_SC] + [(DesignFamily.BLOCK_SC, size)]
    sets, ref_set = _collect(ctx, families)
    rows, warnings = _design_table(ctx, sets, ref_set, _criteria(ctx.args), with_wald=False)
    for w in warnings:
        log.warning(w)
    _write_csv(ctx, f"block{size}_table.csv", "block", TABLE_COLUMNS, rows, warnings)
    if ctx.out is not None:
        aset = sets[(DesignFamily.BLOCK_SC, size)]
        _write_csv(ctx, f"admissible_block{size}.csv", "block", COLUMNS, _admissible_rows(aset))
    return 0


def cmd_evaluate(ctx):
    design = _design_from_args(ctx.args)
    oc = operating_characteristics(design, ctx.params)
    _write_json(
        ctx,
        "evaluate.json",
        "evaluate",
        {
            "design": _design_dict(design),
            "alpha": oc.alpha,
            "power": oc.power,
            "ess0": oc.ess0,
            "ess1": oc.ess1,
            "n": oc.n_max,
            "feasible": bool(oc.feasible(ctx.params)),
        },
    )
    return 0


def _design_dict(d):
    return {
        "family": d.family.value,
        "r1": d.r1,
        "e1": d.e1,
        "n1": d.n1,
        "r": d.r,
        "n": d.N,
        "theta_f": d.theta_f,
        "theta_e": d.theta_e,
        "block": d.block,
    }


def cmd_cp_matrix(ctx):
    design = _design_from_args(ctx.args)
    cpm = cp_matrix(design, ctx.params.p1)
    rows = []
    for s, m in cpm.points():
        rows.append([s, m, repr(float(cpm.cp[s, m])), int(cpm.status[s, m]), int(cpm.reachable[s, m])])
    _write_csv(ctx, "cp_matrix.csv", "cp-matrix", ("s", "m", "cp", "status", "reachable"), rows)
    if ctx.out is not None:
        v = search_theta_set(design, ctx.params.p1).values
        cdf = [[repr(float(x)), _fmt((i + 1) / len(v), 6)] for i, x in enumerate(v)]
        _write_csv(ctx, "theta_cdf.csv", "cp-matrix", ("theta", "cdf"), cdf)
    return 0


def cmd_omni(ctx):
    families = ctx.families()
    named = {}
    for family, block in families:
        named[_set_name(family, block)] = ctx.search(family, block)
    empty = [k for k, v in named.items() if len(v) == 0]
    for k in empty:
        log.warning("no feasible %s design", k)
    grid = omni_grid(named, ctx.config.grid_step)
    header = ("q0", "q1", "family", "N", "r", "r1", "n1", "e1", "theta_f", "theta_e", "loss")
    rows = []
    for q0, q1, name, i, value in grid.entries:
        row = named[name].rows[i]
        rows.append(
            [_fmt(q0, 4), _fmt(q1, 4), name, str(int(row[C["N"]])), str(int(row[C["r"]])), _int(row[C["r1"]]),
             _int(row[C["n1"]]), _int(row[C["e1"]]), _fmt(row[C["theta_f"]], 6), _fmt(row[C["theta_e"]], 6),
             _fmt(value, 6)]
        )
    _write_csv(ctx, "omni_grid.csv", "omni", header, rows, [f"no feasible {k} design" for k in empty])
    if ctx.out is None:
        return 0
    tidy = []
    for k, name in enumerate(grid.names):
        for g in range(len(grid.q0)):
            tidy.append([_fmt(grid.q0[g], 4), _fmt(grid.q1[g], 4), name, _fmt(grid.best[k, g], 6)])
    _write_csv(ctx, "family_loss.csv", "omni", ("q0", "q1", "family", "loss"), tidy)
    for a, b in combinations(grid.names, 2):
        d = grid.difference(a, b)
        rows = [[_fmt(grid.q0[g], 4), _fmt(grid.q1[g], 4), _fmt(d[g], 6)] for g in range(len(d))]
        # positive values favour the second family
        _write_csv(ctx, f"loss_diff_{a}_{b}.csv", "omni", ("q0", "q1", f"loss_{a}_minus_{b}"), rows)
    return 0


def cmd_wald(ctx):
    w = wald_boundaries(ctx.params)
    ess0, ess1 = wald_ess(ctx.params)
    _write_json(
        ctx,
        "wald.json",
        "wald",
        {
            "params": {"alpha": ctx.params.alpha, "beta": ctx.params.beta, "p0": ctx.params.p0, "p1": ctx.params.p1},
            "slope": w.slope,
            "intercept_nogo": w.intercept_nogo,
            "intercept_go": w.intercept_go,
            "ess0": ess0,
            "ess1": ess1,
        },
    )
    return 0


def cmd_estimators(ctx):
    args = ctx.args
    if args.family:
        designs = [(_label(*parse_family(args.family)), _design_from_args(args))]
    else:
        designs = []
        for family, block in ctx.families():
            aset = ctx.search(family, block)
            i = select_index(aset.rows, "h0opt")
            if i is None:
                log.warning("no feasible %s design", _label(family, block))
                continue
            designs.append((_label(family, block), aset.realisation(i)))
    step = ctx.config.grid_step
    grid = np.round(np.arange(0, int(round(1 / step)) + 1) * step, 10)
    curves, summary = [], []
    for label, design in designs:
        table = estimate_table(design, ctx.params.p1)
        acc = accuracy_curves(table, grid)
        for kind in EstimatorKind:
            for g, p in enumerate(grid):
                curves.append([label, _fmt(p, 4), kind.value, _fmt(acc.bias[kind][g], 8), _fmt(acc.rmse[kind][g], 8)])
            summary.append(
                [label, design.describe(), kind.value, _fmt(acc.max_abs_bias[kind], 6), _fmt(acc.max_rmse[kind], 6)]
            )
    _write_csv(
        ctx, "estimator_summary.csv", "estimators", ("design", "realisation", "estimator", "max_abs_bias", "max_rmse"), summary
    )
    if ctx.out is not None:
        _write_csv(ctx, "estimator_curves.csv", "estimators", ("design", "p", "estimator", "bias", "rmse"), curves)
    return 0


def cmd_audit(ctx):
    design = _design_from_args(ctx.args)
    rep = audit(design, ctx.params, method=ctx.args.method, n_sims=ctx.args.n_sims, seed=ctx.args.seed)
    oc = operating_characteristics(design, ctx.params)
    _write_json(
        ctx,
        "audit.json",
        "audit",
        {
            "design": _design_dict(design),
            "method": rep.method,
            "exact": {"alpha": oc.alpha, "power": oc.power, "ess0": oc.ess0, "ess1": oc.ess1},
            "oracle": {"alpha": rep.alpha, "power": rep.power, "ess0": rep.ess0, "ess1": rep.ess1},
            "discrepancy": rep.discrepancy,
            "n_sims": rep.n_sims,
            "seed": rep.seed,
            "max_z": rep.max_z,
            "ok": rep.ok,
        },
    )
    return 0 if rep.ok else 1


COMMANDS = {
    "search": cmd_search,
    "evaluate": cmd_evaluate,
    "cp-matrix": cmd_cp_matrix,
    "omni": cmd_omni,
    "wald": cmd_wald,
    "estimators": cmd_estimators,
    "audit": cmd_audit,
    "block": cmd_block,
}


# ---------------------------------------------------------------------------
# argument parsing


def _prob(text):
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return v


def _common(p, search=False):
    p.add_argument("--scenario", help="scenario TOML file or bundled name (scenario1, scenario2, scenario3, table3)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--p0", type=float)
    p.add_argument("--p1", type=float)
    p.add_argument("--out", help="output directory (default: the scenario's, or stdout)")
    p.add_argument("-v", "--verbose", action="store_true")
    if search:
        p.add_argument("--families", help="comma-separated families, e.g. simon,nsc,sc,mstage,block4")
        p.add_argument("--criterion", default="all", choices=CRITERIA + ("all",))
        p.add_argument("--theta-e-min", type=_prob, dest="theta_e_min")
        p.add_argument("--grid-step", type=float, dest="grid_step")
        p.add_argument("--dominance", choices=("rounded", "exact"))
        p.add_argument("--workers", type=int, help="worker processes (default: $CURTAIL_WORKERS or CPU count)")
        p.add_argument("--cache-dir", dest="cache_dir", help="reuse feasible fronts stored here ($CURTAIL_CACHE_DIR)")


def _design_flags(p):
    p.add_argument("--family", help="simon, simongo, nsc, sc, mstage, single or blockB")
    p.add_argument("--r", type=int)
    p.add_argument("--n", type=int, help="maximum sample size N")
    p.add_argument("--r1", type=int)
    p.add_argument("--n1", type=int)
    p.add_argument("--e1", type=int)
    p.add_argument("--theta-f", type=float, dest="theta_f")
    p.add_argument("--theta-e", type=float, dest="theta_e")
    p.add_argument("--block", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="curtail", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"curtail {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("search", help="admissible designs and optimal-design tables")
    _common(p, search=True)

    p = sub.add_parser("block", help="search block-monitored designs")
    _common(p, search=True)
    p.add_argument("--size", type=int, required=True, help="block size B")

    p = sub.add_parser("evaluate", help="operating characteristics of one design")
    _common(p)
    _design_flags(p)

    p = sub.add_parser("cp-matrix", help="conditional power lattice of one design")
    _common(p)
    _design_flags(p)

    p = sub.add_parser("omni", help="loss over the weight grid and pairwise loss differences")
    _common(p, search=True)

    p = sub.add_parser("wald", help="sequential probability ratio test benchmark")
    _common(p)

    p = sub.add_parser("estimators", help="bias and RMSE of point estimators")
    _common(p, search=True)
    _design_flags(p)

    p = sub.add_parser("audit", help="check the exact engine against brute force or simulation")
    _common(p)
    _design_flags(p)
    p.add_argument("--method", default="auto", choices=("auto", "brute_force", "monte_carlo"))
    p.add_argument("--n-sims", type=int, default=200_000, dest="n_sims")
    p.add_argument("--seed", type=int, default=12345)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        ctx = _Context(args)
        return COMMANDS[args.command](ctx)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
