"""Command-line front end: classify | check | verify | web-export."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from typing import Sequence

from .errors import InvalidStructure, NoRootsFound, NotAQuasigroup, SingularPoint
from .jets import GenericMap
from .oracles import derivative_suite, tolerances_for
from .quasigroup import RationalQuasigroup, linear_ramp, spheres
from .reducibility import (
    DEFAULT_BOX,
    DEFAULT_TOL,
    Classification,
    SamplerConfig,
    Structure,
    check_structure,
    classify,
    cross_validate,
)
from .web import export_web

log = logging.getLogger("quasiweb")

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE, EXIT_FAILS = 0, 1, 2, 3

GALLERY = ("eq18", "spheres", "circles")


@dataclass
class RunConfig:
    command: str
    spec: str | None = None
    expr: str | None = None
    example: str | None = None
    n: int | None = None
    structure: str | None = None
    tol: float = DEFAULT_TOL
    samples: int = 64
    seed: int = 0
    box: tuple | None = None
    fmt: str = "json"
    out: str | None = None
    trials: int = 200
    levels: tuple = ()
    allow_empty: bool = False

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("--samples must be at least 1")
        if not self.tol > 0:
            raise ValueError("--tol must be positive")
        if self.trials < 0:
            raise ValueError("--trials must be non-negative")


def parse_box(text: str) -> tuple:
    """``"lo:hi"`` for every coordinate or ``"lo:hi,lo:hi,..."`` per coordinate."""
    out = []
    for k, part in enumerate(text.split(",")):
        try:
            lo, hi = (float(v) for v in part.split(":"))
        except ValueError:
            raise ValueError(f"--box: interval {k + 1} ({part!r}) is not lo:hi") from None
        if not lo < hi:
            raise ValueError(f"--box: interval {k + 1} needs lo < hi")
        out.append((lo, hi))
    return tuple(out)


def _expand_box(box: tuple | None, n: int, default=DEFAULT_BOX) -> tuple:
    if box is None:
        return (default,) * n
    if len(box) == 1:
        return box * n
    if len(box) != n:
        raise ValueError(f"--box: {len(box)} intervals given, arity is {n}")
    return box


def gallery(name: str, n: int | None) -> RationalQuasigroup:
    if name == "eq18":
        return linear_ramp(n or 3)
    if name == "spheres":
        return spheres(n or 3)
    if name == "circles":
        if n not in (None, 2):
            raise ValueError("--example circles is the n = 2 case")
        return spheres(2)
    raise ValueError(f"--example: unknown name {name!r}; choose from {', '.join(GALLERY)}")


def load_target(cfg: RunConfig):
    if cfg.example:
        return gallery(cfg.example, cfg.n)
    if cfg.expr:
        return GenericMap.parse(cfg.expr, cfg.n)
    if not cfg.spec:
        raise ValueError("one of --spec, --map or --example is required")
    text = cfg.spec
    if not text.lstrip().startswith("{"):
        with open(text) as fh:
            text = fh.read()
    return RationalQuasigroup.loads(text)


def _emit(text: str, cfg: RunConfig):
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True) + "\n"


def cmd_classify(cfg: RunConfig) -> int:
    q = load_target(cfg)
    if not isinstance(q, RationalQuasigroup):
        raise ValueError("classify needs a rational spec (--spec or --example)")
    result = classify(q)
    _emit(_dumps(result.to_json()), cfg)
    return EXIT_DEGENERATE if result.verdict == Classification.DEGENERATE else EXIT_OK


def cmd_check(cfg: RunConfig) -> int:
    target = load_target(cfg)
    if not cfg.structure:
        raise ValueError("--structure is required for check")
    structure = Structure.parse(cfg.structure, target.n)
    sampler = SamplerConfig(cfg.samples, _expand_box(cfg.box, target.n), cfg.seed, cfg.tol)
    report = check_structure(target, structure, sampler)
    _emit(report.to_csv() if cfg.fmt == "csv" else _dumps(report.to_json()), cfg)
    holds = report.exact if report.exact is not None else report.holds
    return EXIT_OK if holds else EXIT_FAILS


def cmd_verify(cfg: RunConfig) -> int:
    if cfg.trials == 0:
        log.warning("trials = 0: nothing to verify")
    box = cfg.box if cfg.box is None or len(cfg.box) != 1 else cfg.box[0]
    sampler = SamplerConfig(cfg.samples, box, cfg.seed, cfg.tol)
    agreement = cross_validate(cfg.trials, cfg.seed, sampler)
    jet_rtol, fd_rtol = tolerances_for(cfg.tol)
    derivs = derivative_suite(5 * cfg.trials, cfg.seed, jet_rtol, fd_rtol)
    ok = agreement.ok and derivs.ok
    doc = {
        "seed": cfg.seed,
        "tol": cfg.tol,
        "samples": cfg.samples,
        "agreement": agreement.to_json(),
        "derivatives": derivs.to_json(),
        "derivative_tolerances": {"jet_rel": jet_rtol, "fd_rel": fd_rtol},
        "verdict": "pass" if ok else "fail",
    }
    _emit(_dumps(doc), cfg)
    if not ok:
        log.error("verification failed: %d/%d agreement, %d jet and %d finite-difference failures",
                  agreement.agreed, agreement.trials, derivs.jet_failures, derivs.fd_failures)
    return EXIT_OK if ok else EXIT_FAILS


def cmd_web_export(cfg: RunConfig) -> int:
    q = load_target(cfg)
    if not isinstance(q, RationalQuasigroup):
        raise ValueError("web-export needs a rational spec (--spec or --example)")
    if not cfg.levels and not cfg.allow_empty:
        raise ValueError("--levels is empty; pass --allow-empty to write a header-only file")
    anchors = ()
    default = DEFAULT_BOX
    if cfg.example in ("spheres", "circles"):
        default = (-2.0, 2.0)
        anchors = [tuple(float(i == k) for i in range(q.n)) for k in range(q.n)]
    box = _expand_box(cfg.box, q.n, default)
    summary = export_web(q, cfg.levels, cfg.fmt, None, cfg.samples, box, cfg.seed, anchors)
    _emit(summary.text, cfg)
    report = sys.stdout if cfg.out else sys.stderr
    for sl in summary.slices:
        print(f"alpha={sl.alpha!r}: {len(sl.points)} points, {len(sl.base_points)} base points", file=report)
    for alpha, msg in summary.failed.items():
        print(f"alpha={alpha!r}: skipped ({msg})", file=report)
    return EXIT_OK


COMMANDS = {
    "classify": cmd_classify,
    "check": cmd_check,
    "verify": cmd_verify,
    "web-export": cmd_web_export,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quasiweb", description=__doc__)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--spec", help="quasigroup spec JSON file, or inline JSON")
    p.add_argument("--map", dest="expr", help="generic map in prefix notation (check only)")
    p.add_argument("--example", choices=GALLERY, help="built-in instance")
    p.add_argument("--n", type=int, help="arity for --example / --map")
    p.add_argument("--structure", help='nested blocks, e.g. "[[1,2],3,4]"')
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--box", type=parse_box, help='"lo:hi" or "lo:hi,lo:hi,..."')
    p.add_argument("--format", dest="fmt", choices=("json", "csv"), default="json")
    p.add_argument("--out", help="output path (default: standard output)")
    p.add_argument("--trials", type=int, default=200, help="verify: random instances")
    p.add_argument("--levels", default="", help="web-export: comma-separated alpha values")
    p.add_argument("--allow-empty", action="store_true")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        levels = tuple(float(v) for v in args.levels.split(",") if v.strip())
    except ValueError:
        print(f"error: --levels: cannot parse {args.levels!r}", file=sys.stderr)
        return EXIT_INPUT
    try:
        cfg = RunConfig(args.command, args.spec, args.expr, args.example, args.n, args.structure,
                        args.tol, args.samples, args.seed, args.box, args.fmt, args.out,
                        args.trials, levels, args.allow_empty)
        return COMMANDS[args.command](cfg)
    except NotAQuasigroup as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (ValueError, TypeError, InvalidStructure, SingularPoint, NoRootsFound, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
