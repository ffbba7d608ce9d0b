"""Command-line front end.

    singlecross solve --config run.json --out results/
    singlecross reproduce SEC_5_2_UNION_SLICES

Machine-readable output goes to ``records.jsonl`` plus CSV tables in the
output directory (``--out``, else ``$SINGLECROSS_OUT``, else the config's
``output.dir``, else ``./singlecross_out``).  Nothing time-dependent is
written, so the same config and seed give byte-identical files.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from .errors import ConfigInvalid, SingleCrossingError, SolverStalled, UnknownExample, VerificationFailed
from .mechanism import build_from_geometry
from .multibuyer import LowerEfficientRule, MyersonRule, ZeroRule, check_sp_multibuyer, simulate
from .optimizer import SolveOptions, brute_force_oracle, solve_optimal, sweep
from .prefdomain import FamilyKind, PreferenceFamily
from .scenarios import SCENARIOS, run_scenario
from .typedist import DistKind, SliceMixture, distribution_from_record
from .verifier import verify

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_STALL = 0, 2, 3, 4
OUT_ENV = "SINGLECROSS_OUT"
COMMANDS = ("solve", "verify", "oracle", "sweep", "nbuyer", "reproduce")


# ---------------------------------------------------------------------------
# config


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigInvalid(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigInvalid(f"{path}: top level must be an object")
    return cfg


def _field(cfg: dict, dotted: str, kind=None, default=...):
    node = cfg
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            if default is not ...:
                return default
            raise ConfigInvalid(f"field {dotted!r}: missing")
        node = node[part]
    if kind is not None and not isinstance(node, kind) or isinstance(node, bool) and kind in (int, float, (int, float)):
        raise ConfigInvalid(f"field {dotted!r}: expected {getattr(kind, '__name__', kind)}, got {node!r}")
    return node


def _guard(dotted: str, build):
    try:
        return build()
    except ConfigInvalid:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigInvalid(f"field {dotted!r}: {exc}") from None


def family_from_config(block: dict, where: str = "family") -> PreferenceFamily:
    if not isinstance(block, dict):
        raise ConfigInvalid(f"field {where!r}: expected an object")
    kind = _field(block, "kind", str)
    if kind not in FamilyKind.__members__:
        raise ConfigInvalid(f"field '{where}.kind': unknown family {kind!r}")
    lo = _field(block, "lo", (int, float))
    hi = _field(block, "hi", (int, float))
    constants = _field(block, "constants", dict, {})
    return _guard(where, lambda: PreferenceFamily(kind, lo, hi, constants))


def distribution_from_config(block: dict, where: str = "distribution"):
    if not isinstance(block, dict):
        raise ConfigInvalid(f"field {where!r}: expected an object")
    kind = _field(block, "kind", str)
    if kind not in DistKind.__members__:
        raise ConfigInvalid(f"field '{where}.kind': unknown distribution {kind!r}")
    return _guard(where, lambda: distribution_from_record(block))


def solve_options(cfg: dict, seed: int, oracle: bool, grid: int | None) -> SolveOptions:
    s = cfg.get("solve", {})
    return SolveOptions(
        starts=int(_field(cfg, "solve.starts", int, 32)),
        max_evals=int(_field(cfg, "solve.max_evals", int, 10_000)),
        seed=seed,
        oracle=oracle or bool(s.get("oracle", False)),
        oracle_grid=tuple(_field(cfg, "solve.oracle_grid", list, [61, 61])),
        verify_grid=grid or int(_field(cfg, "solve.verify_grid", int, 400)),
    )


def _seed(cfg, args) -> int:
    if args.seed is not None:
        return args.seed
    return int(_field(cfg, "seed", int, 0))


def _l(cfg) -> int:
    l = _field(cfg, "solve.l", int)
    if l < 2:
        raise ConfigInvalid(f"field 'solve.l': need l >= 2, got {l}")
    return l


# ---------------------------------------------------------------------------
# output


class Emitter:
    def __init__(self, out_dir: Path, quiet: bool):
        self.out_dir, self.quiet = out_dir, quiet
        out_dir.mkdir(parents=True, exist_ok=True)
        self._records = []

    def record(self, rec: dict):
        self._records.append(rec)

    def table(self, name: str, header, rows):
        with open(self.out_dir / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([repr(v) if isinstance(v, float) else v for v in row])

    def say(self, text: str = ""):
        if not self.quiet:
            print(text)

    def close(self):
        with open(self.out_dir / "records.jsonl", "w") as fh:
            for rec in self._records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _out_dir(cfg, args) -> Path:
    if args.out:
        return Path(args.out)
    if os.environ.get(OUT_ENV):
        return Path(os.environ[OUT_ENV])
    return Path(_field(cfg, "output.dir", str, "singlecross_out"))


def _emit_solution(em: Emitter, sol, tag: str):
    em.record({**sol.to_record(), "tag": tag})
    if sol.verification is not None:
        for rec in sol.verification.to_records():
            em.record({**rec, "tag": tag})
    for s in sol.starts:
        em.record({"type": "start", "tag": tag, **s.to_record()})


def _solution_rows(sol):
    rows = []
    th = (None,) + sol.thresholds
    for k, (t, q) in enumerate(zip(sol.payments, sol.probabilities)):
        rows.append([k, th[k] if th[k] is not None else "", t, q])
    return rows


# ---------------------------------------------------------------------------
# commands


def run_solve(cfg, args, em: Emitter) -> int:
    fam = family_from_config(_field(cfg, "family", dict))
    dist = distribution_from_config(_field(cfg, "distribution", dict))
    l = _l(cfg)
    opts = solve_options(cfg, _seed(cfg, args), args.oracle, args.grid)
    sol = solve_optimal(fam, dist, l, opts)
    _emit_solution(em, sol, "solver")
    em.table("mechanism.csv", ["k", "threshold", "payment", "probability"], _solution_rows(sol))
    diag = [["objective", sol.objective], ["distinct_bundles", len(sol.distinct_bundles())]]
    diag += [[c.name, c.passed] for c in sol.verification.checks]
    if sol.foc_residuals is not None:
        diag += [[f"foc_residual_{k}", r] for k, r in enumerate(sol.foc_residuals)]
    if opts.oracle:
        orc = brute_force_oracle(fam, dist, l, opts.oracle_grid, opts.oracle_budget)
        _emit_solution(em, orc, "oracle")
        diag.append(["oracle_objective", orc.objective])
    em.table("diagnostics.csv", ["quantity", "value"], diag)
    em.say(f"objective {sol.objective:.10g} with {len(sol.distinct_bundles())} distinct bundles")
    em.say(_format_rows(["k", "threshold", "payment", "probability"], _solution_rows(sol)))
    em.say(sol.verification.summary())
    return EXIT_OK


def run_oracle(cfg, args, em: Emitter) -> int:
    fam = family_from_config(_field(cfg, "family", dict))
    dist = distribution_from_config(_field(cfg, "distribution", dict))
    l = _l(cfg)
    opts = solve_options(cfg, _seed(cfg, args), True, args.grid)
    orc = brute_force_oracle(fam, dist, l, opts.oracle_grid, opts.oracle_budget)
    _emit_solution(em, orc, "oracle")
    em.table("mechanism.csv", ["k", "threshold", "payment", "probability"], _solution_rows(orc))
    em.say(f"oracle objective {orc.objective:.10g}")
    return EXIT_OK


def run_verify(cfg, args, em: Emitter) -> int:
    fam = family_from_config(_field(cfg, "family", dict))
    block = _field(cfg, "mechanism", dict)
    bundles = _field(block, "bundles", list)
    thresholds = _field(block, "thresholds", list, [])
    support = block.get("support")
    mech = _guard("mechanism", lambda: build_from_geometry(fam, [tuple(b) for b in bundles], thresholds, support, strict=False))
    grid = args.grid or int(_field(cfg, "verify.grid_n", int, 400))
    rep = verify(mech, grid_n=grid)
    em.record(mech.to_record())
    for rec in rep.to_records():
        em.record(rec)
    em.table("diagnostics.csv", ["check", "passed"], [[c.name, c.passed] for c in rep.checks])
    em.say(rep.summary())
    return EXIT_OK if rep.fully_sp and rep.individually_rational else EXIT_VERIFY


def run_sweep(cfg, args, em: Emitter) -> int:
    fam = family_from_config(_field(cfg, "family", dict))
    dist = distribution_from_config(_field(cfg, "distribution", dict))
    ls = _field(cfg, "sweep.ls", list)
    if not ls or not all(isinstance(v, int) and v >= 2 for v in ls):
        raise ConfigInvalid("field 'sweep.ls': need a nonempty list of integers >= 2")
    opts = solve_options(cfg, _seed(cfg, args), args.oracle, args.grid)
    rows, sols = sweep(fam, dist, ls, opts)
    for row, sol in zip(rows, sols):
        em.record({"type": "sweep_row", **row.to_record()})
        _emit_solution(em, sol, f"l={row.l}")
    table = [[r.l, r.objective, r.distinct_bundles, r.converged] for r in rows]
    em.table("sweep.csv", ["l", "objective", "distinct_bundles", "converged"], table)
    em.say(_format_rows(["l", "objective", "distinct_bundles", "converged"], table))
    return EXIT_OK


def run_nbuyer(cfg, args, em: Emitter) -> int:
    fam = family_from_config(_field(cfg, "family", dict))
    dist = distribution_from_config(_field(cfg, "distribution", dict))
    n = _field(cfg, "nbuyer.n_buyers", int, 2)
    name = _field(cfg, "nbuyer.rule", str, "lower_efficient")
    samples = _field(cfg, "nbuyer.samples", int, 100_000)
    rules = {"myerson": lambda: MyersonRule(dist), "lower_efficient": lambda: LowerEfficientRule(fam, dist), "zero": ZeroRule}
    if name not in rules:
        raise ConfigInvalid(f"field 'nbuyer.rule': unknown rule {name!r}; choose from {sorted(rules)}")
    if n < 1 or samples < 1:
        raise ConfigInvalid("field 'nbuyer': n_buyers and samples must be positive")
    rule = _guard("nbuyer", rules[name])
    res = simulate(fam, dist, n, rule, samples, _seed(cfg, args))
    em.record({**res.to_record(), "rule": name, "n_buyers": n})
    rows = [["mean_revenue", res.mean], ["stderr", res.stderr], ["samples", res.samples]]
    code = EXIT_OK
    if n == 2 and _field(cfg, "nbuyer.check_sp", bool, True):
        ok, cxs = check_sp_multibuyer(rule, fam, dist, grid_n=args.grid or 200)
        em.record({"type": "check", "check": "multibuyer_strategy_proof", "passed": ok, "violations": len(cxs)})
        rows.append(["strategy_proof", ok])
        code = EXIT_OK if ok else EXIT_VERIFY
    em.table("diagnostics.csv", ["quantity", "value"], rows)
    em.say(f"{name}: mean revenue {res.mean:.6f} +- {res.stderr:.6f} over {res.samples} draws")
    return code


def run_reproduce(cfg, args, em: Emitter) -> int:
    sid = args.example_id or _field(cfg, "reproduce.id", str, None)
    if sid is None:
        raise ConfigInvalid("reproduce needs an example id")
    rows = run_scenario(sid, seed=_seed(cfg, args), grid_n=args.grid)
    table = [[r.quantity, r.expected, r.computed, r.tol, "PASS" if r.passed else "FAIL"] for r in rows]
    for r in rows:
        em.record({"type": "reproduce", "id": sid, **r.to_record()})
    em.table("reproduce.csv", ["quantity", "expected", "computed", "tol", "result"], table)
    em.say(sid)
    em.say(_format_rows(["quantity", "expected", "computed", "tol", "result"], table))
    return EXIT_OK if all(r.passed for r in rows) else EXIT_VERIFY


def _format_rows(header, rows) -> str:
    cells = [[str(h) for h in header]] + [[f"{v:.10g}" if isinstance(v, float) else str(v) for v in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in cells)


HANDLERS = {
    "solve": run_solve,
    "verify": run_verify,
    "oracle": run_oracle,
    "sweep": run_sweep,
    "nbuyer": run_nbuyer,
    "reproduce": run_reproduce,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./singlecross_out)")
    common.add_argument("--grid", type=int, help="grid size for verification checks")
    common.add_argument("--oracle", action="store_true", help="also run the brute-force oracle")
    common.add_argument("--quiet", action="store_true", help="no summary on stdout")
    parser = argparse.ArgumentParser(prog="singlecross", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "reproduce":
            p.add_argument("example_id", nargs="?", help=f"one of {', '.join(SCENARIOS)}")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.grid is not None and args.grid < 2:
            raise ConfigInvalid("--grid must be at least 2")
        cfg = load_config(args.config)
        em = Emitter(_out_dir(cfg, args), args.quiet)
        code = HANDLERS[args.command](cfg, args, em)
        em.close()
        return code
    except (ConfigInvalid, UnknownExample) as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except VerificationFailed as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except SolverStalled as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return EXIT_STALL
    except SingleCrossingError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
