"""Command line: ``contmodel {eval,fingerprint,compare,scan} ...``.

The payload goes to stdout (or ``--out``) and depends only on the command,
its arguments, the seed and the tool version.  Timing and diagnostics go to
stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field

from . import __version__
from .errors import BudgetError, ContModelError, PanelMismatchError, ParseError, ValidationError
from .evaluator import EvalOptions, evaluate
from .formula import Signature, parse_formula, print_formula
from .models import load_model, make_matrix_model, make_normed_model
from .sentences import Panel, by_name, default_panel, import_panel
from .theory import (
    FilterProxy, Fingerprint, ScanTable, compare_universal, convergence_scan, fingerprint,
    microstate_search, ultralimit,
)

EXIT_PARSE, EXIT_VALIDATION, EXIT_BUDGET, EXIT_PANEL = 2, 3, 4, 5


@dataclass
class RunRecord:
    command: str
    arguments: dict
    seed: int
    version: str = __version__
    payload: str = ""
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)

    def header(self) -> dict:
        return {"command": self.command, "arguments": self.arguments, "seed": self.seed, "version": self.version}


def parse_range(text: str) -> list[int]:
    """``"2..6"`` -> [2, 3, 4, 5, 6]; ``"4"`` -> [4]; ``"2,5"`` -> [2, 5]."""
    out = []
    for part in text.split(","):
        lo, sep, hi = part.partition("..")
        try:
            a = int(lo)
            b = int(hi) if sep else a
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad range {text!r}") from None
        if b < a:
            raise argparse.ArgumentTypeError(f"empty range {text!r}")
        out.extend(range(a, b + 1))
    return out


def _default_seed() -> int:
    raw = os.environ.get("CONTMODEL_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(f"CONTMODEL_SEED must be an integer, got {raw!r}") from None


def _options(args) -> EvalOptions:
    kw = {"seed": args.seed}
    if args.restarts is not None:
        kw["outer_restarts"] = args.restarts
        kw["inner_restarts"] = max(1, args.restarts // 2)
    if args.tol is not None:
        kw["tolerance"] = args.tol
    try:
        return EvalOptions(**kw)
    except ValueError as exc:
        raise BudgetError(str(exc)) from None


def _panel(name: str, signature):
    """``full``/``universal`` for the model's signature, ``tracial.full`` etc., or a panel file."""
    if os.path.exists(name):
        with open(name) as fh:
            return import_panel(fh.read())
    prefix, _, kind = name.rpartition(".")
    if prefix:
        signatures = {"tracial": Signature.TRACIAL, "normed": Signature.NORMED}
        if prefix not in signatures:
            raise ValueError(f"unknown panel {name!r}")
        signature = signatures[prefix]
    return default_panel(kind, signature)


def _formula(args, signature):
    if args.formula is not None:
        return "formula", parse_formula(args.formula, signature)
    if args.sentence is not None:
        s = by_name(args.sentence)
        return s.name, s.formula
    raise SystemExit("one of --sentence or --formula is required")


# ------------------------------------------------------------ commands


def cmd_eval(args, rec):
    m = load_model(args.model)
    label, f = _formula(args, m.signature)
    r = evaluate(m, f, _options(args))
    return {**rec.header(), "model": m.description, "sentence": label, "formula": print_formula(f),
            "result": r.to_json()}


def cmd_fingerprint(args, rec):
    m = load_model(args.model)
    fp = fingerprint(m, _panel(args.panel, m.signature), _options(args))
    return fp.to_json()


def cmd_compare(args, rec):
    with open(args.a) as fh:
        a = Fingerprint.loads(fh.read())
    with open(args.b) as fh:
        b = Fingerprint.loads(fh.read())
    tol = 1e-2 if args.tol is None else args.tol
    v = compare_universal(a, b, tol)
    return {**rec.header(), "a": a.model, "b": b.model, "panel": a.panel, **v.to_json()}


def _table_payload(rec, table: ScanTable, extra=None):
    if rec.extra.get("csv"):
        return table.to_csv()
    return {**rec.header(), **(extra or {}), **table.to_json()}


def cmd_scan(args, rec):
    opts = _options(args)
    what = args.what
    if what == "sigma":
        ns = args.n or [2, 3, 4, 5, 6]
        name = args.sentence or "sigma.1"
        panel = Panel(f"scan.{name}", (by_name(name),), "full", Signature.TRACIAL)
        return _table_payload(rec, convergence_scan(lambda n: make_matrix_model([(n, 1)]), panel, ns, opts))
    if what == "psi":
        ns = args.N or [2, 3, 4, 5, 6]
        panel = default_panel("full", Signature.NORMED).subset(["psi"])
        family = lambda n: make_normed_model([(p, 2) for p in range(2, n + 1)])  # noqa: E731
        return _table_payload(rec, convergence_scan(family, panel, ns, opts))
    if what == "ultralimit":
        ns = args.n or [1, 2, 3, 4]
        name = args.sentence or "comm.sup"
        s = by_name(name)
        if args.model:
            fixed = load_model(args.model)
            seq = lambda j: fixed  # noqa: E731
        elif s.signature is Signature.NORMED:
            seq = lambda j: make_normed_model([(p, 2) for p in range(2, j + 2)])  # noqa: E731
        else:
            seq = lambda j: make_matrix_model([(j, 1)])  # noqa: E731
        kind = args.proxy
        rep = ultralimit(seq, s.formula, FilterProxy(kind, tol=args.tol or 1e-2), max(ns), opts, j_min=min(ns))
        if rec.extra.get("csv"):
            rows = [(j, name, v, "heuristic") for j, v in zip(rep.indices, rep.values)]
            return ScanTable(tuple(rows), {name: rep.convergent}).to_csv()
        return {**rec.header(), "sentence": name, **rep.to_json()}
    if what == "microstates":
        if not args.target:
            raise SystemExit("scan microstates needs --target FILE")
        with open(args.target) as fh:
            spec = json.load(fh)
        target = [(e["word"], complex(e["re"], e.get("im", 0.0))) for e in spec["moments"]]
        eps = spec.get("eps", 1e-3) if args.tol is None else args.tol
        rows, runs = [], []
        for k in args.n or [1, 2, 3]:
            r = microstate_search(target, k, eps, opts)
            rows.append((k, "microstate", r.deviation, "success" if r.success else "failure"))
            runs.append({"k": k, **r.to_json()})
        if rec.extra.get("csv"):
            return ScanTable(tuple(rows), {}).to_csv()
        return {**rec.header(), "eps": eps, "runs": runs}
    raise SystemExit(f"unknown scan {what!r}")


# ------------------------------------------------------------ plumbing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="RNG seed (default: $CONTMODEL_SEED or 0)")
    common.add_argument("--restarts", type=int, default=None, help="outer restarts; inner gets half")
    common.add_argument("--tol", type=float, default=None, help="evaluator tolerance / comparison tolerance")
    common.add_argument("--out", default=None, help="write the payload to FILE instead of stdout")
    common.add_argument("--csv", action="store_true", help="emit tables as CSV")

    p = argparse.ArgumentParser(prog="contmodel", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"contmodel {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("eval", parents=[common], help="evaluate one formula on one model")
    e.add_argument("--model", required=True)
    e.add_argument("--sentence")
    e.add_argument("--formula")

    f = sub.add_parser("fingerprint", parents=[common], help="evaluate a whole panel")
    f.add_argument("--model", required=True)
    f.add_argument("--panel", default="full", help="full, universal, tracial.full, ... or a panel file")

    c = sub.add_parser("compare", parents=[common], help="order two universal fingerprints")
    c.add_argument("--a", required=True)
    c.add_argument("--b", required=True)

    s = sub.add_parser("scan", parents=[common], help="tables over model families")
    s.add_argument("what", choices=["sigma", "psi", "ultralimit", "microstates"])
    s.add_argument("--n", type=parse_range, default=None, help="matrix sizes / indices, e.g. 2..6")
    s.add_argument("--N", type=parse_range, default=None, help="truncation levels for psi, e.g. 2..6")
    s.add_argument("--sentence")
    s.add_argument("--model", help="constant sequence for ultralimit")
    s.add_argument("--proxy", default="band", choices=["band", "cofinite-limit"])
    s.add_argument("--target", help="JSON moment target for microstates")
    return p


COMMANDS = {"eval": cmd_eval, "fingerprint": cmd_fingerprint, "compare": cmd_compare, "scan": cmd_scan}


def _render(payload) -> str:
    if isinstance(payload, str):
        return payload
    return json.dumps(payload, indent=2) + "\n"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is None:
        args.seed = _default_seed()
    arguments = {k: v for k, v in sorted(vars(args).items()) if k not in ("command", "out", "seed")}
    rec = RunRecord(args.command, arguments, args.seed, extra={"csv": args.csv})
    start = time.perf_counter()
    try:
        payload = COMMANDS[args.command](args, rec)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except BudgetError as exc:
        print(f"budget error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except PanelMismatchError as exc:
        print(f"panel mismatch: {exc}", file=sys.stderr)
        return EXIT_PANEL
    except (ContModelError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    rec.payload = _render(payload)
    rec.wall_time = time.perf_counter() - start
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(rec.payload)
    else:
        sys.stdout.write(rec.payload)
    print(f"contmodel {args.command}: {rec.wall_time:.2f}s (seed {rec.seed}, version {rec.version})",
          file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
