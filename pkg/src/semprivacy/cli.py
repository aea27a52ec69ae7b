"""Command-line front end: ``semprivacy {bounds,mechanism,oracle,experiment}``.

Exit codes: 0 success, 1 usage, 2 data or parse failure, 3 internal
invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

from . import bounds as bnd
from . import dataset, frl, oracle
from .probcore import JointTable, ValidationError, AxisError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
ACHIEVABILITY_TOL = 1e-9
DEFAULT_EXPERIMENT_SWEEP = "0:0.02:0.3"

log = logging.getLogger("semprivacy")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class InvariantError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    L_h1: float
    L_h2_clamped: Optional[float]
    upper_h_eps: float
    util_L1: float
    util_L2_clamped: Optional[float]
    util_upper: float
    gap: float
    mechanism_leakage: Optional[float] = None
    mechanism_utility_task: Optional[float] = None


def parse_sweep(text: str) -> list:
    """``"start:step:end"`` -> inclusive, evenly spaced epsilon grid."""
    try:
        start, step, end = (float(x) for x in text.split(":"))
    except ValueError:
        raise UsageError(f"sweep must look like start:step:end, got {text!r}") from None
    if start < 0:
        raise UsageError("epsilon must be non-negative")
    if step <= 0 or end < start:
        raise UsageError(f"invalid sweep {text!r}")
    n = int(math.floor((end - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(n)]


def _epsilons(args) -> list:
    if args.sweep is not None:
        return parse_sweep(args.sweep)
    if args.epsilon is None:
        raise UsageError("give --epsilon or --sweep")
    if args.epsilon < 0:
        raise UsageError("epsilon must be non-negative")
    return [args.epsilon]


def _load_joint(path: str) -> JointTable:
    try:
        return JointTable.from_json(Path(path).read_text())
    except FileNotFoundError:
        raise DataError(f"joint file not found: {path}") from None
    except (json.JSONDecodeError, ValidationError, AxisError) as exc:
        raise DataError(f"cannot parse joint {path}: {exc}") from None


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _csv(rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = list(rows[0].keys())
    w.writerow(names)
    for r in rows:
        w.writerow([_fmt(r[k]) for k in names])
    return buf.getvalue()


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def cmd_bounds(args, out) -> int:
    grid = _epsilons(args)
    joint = _load_joint(args.joint)
    has_task = args.h_axis in joint.names
    reports = []
    for eps in grid:
        if has_task:
            r = bnd.utility_bounds(joint, eps, s_axis=args.s_axis, f_axis=args.f_axis,
                                   h_axis=args.h_axis)
        else:
            r = bnd.theorem1_bounds(joint, eps, args.s_axis, args.f_axis)
        reports.append(r.to_dict())
    if args.format == "csv":
        out.write(_csv(reports))
    else:
        out.write(_dump(reports[0] if args.sweep is None else reports))
    return EXIT_OK


def cmd_mechanism(args, out) -> int:
    if args.epsilon < 0:
        raise UsageError("epsilon must be non-negative")
    joint = _load_joint(args.joint)
    b = bnd.theorem1_bounds(joint, args.epsilon, args.s_axis, args.f_axis)
    m = frl.efrl_mechanism(joint, args.epsilon, args.s_axis, args.f_axis)
    if not m.degenerate_s:
        if abs(m.leakage - m.epsilon) > ACHIEVABILITY_TOL:
            raise InvariantError(f"leakage {m.leakage} misses target {m.epsilon}")
        target = bnd.theorem1_bounds(joint, m.epsilon, args.s_axis, args.f_axis).L_h1
        if m.utility_semantic < target - ACHIEVABILITY_TOL:
            raise InvariantError(
                f"utility {m.utility_semantic} below lower bound {target}")
    payload = m.to_dict()
    summary = {"leakage": m.leakage, "utility_semantic": m.utility_semantic,
               "rr_prob": m.rr_prob, "L_h1": b.L_h1}
    if args.h_axis in joint.names:
        _, u_task = frl.mechanism_utilities(joint, m, args.f_axis, args.h_axis)
        payload["utility_task"] = u_task
        summary["utility_task"] = u_task
    text = _dump(payload)
    if args.out:
        Path(args.out).write_text(text)
        out.write(_dump(summary))
    else:
        out.write(text)
    return EXIT_OK


def cmd_oracle(args, out) -> int:
    if args.epsilon < 0:
        raise UsageError("epsilon must be non-negative")
    joint = _load_joint(args.joint)
    try:
        res = oracle.estimate_h_eps(joint, args.epsilon, args.u_size, args.restarts,
                                    args.seed, args.s_axis, args.f_axis)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    b = bnd.theorem1_bounds(joint, args.epsilon, args.s_axis, args.f_axis)
    lower = max(b.L_h1, b.L_h2_clamped or 0.0, 0.0)
    check = {
        "lower": lower,
        "upper": b.upper_h_eps,
        "lower_margin": res.value - lower,
        "upper_margin": b.upper_h_eps - res.value,
    }
    check["ok"] = check["lower_margin"] >= -1e-6 and check["upper_margin"] >= -1e-9
    payload = res.to_dict(include_channel=args.dump_channel)
    payload["sandwich"] = check
    out.write(_dump(payload))
    if not check["ok"]:
        raise InvariantError(f"sandwich check failed: {check}")
    return EXIT_OK


def sweep_rows(exp: dataset.ExperimentJoint, eps_grid, with_mechanism=True) -> list:
    joint = exp.joint
    rows = []
    frl_out = frl.construct_frl(joint, "S", "Z") if with_mechanism else None
    for eps in eps_grid:
        r = bnd.utility_bounds(joint, eps, f_axis="Z")
        leak = util_task = None
        if with_mechanism:
            m = frl.tune_leakage(joint, frl_out, eps)
            _, util_task = frl.mechanism_utilities(joint, m, "Z", "H")
            leak = m.leakage
            if util_task < r.util_L1 - ACHIEVABILITY_TOL and not m.clamped:
                raise InvariantError(
                    f"eps={eps}: task utility {util_task} below lower bound {r.util_L1}")
        rows.append(SweepRow(eps, r.L_h1, r.L_h2_clamped, r.upper_h_eps, r.util_L1,
                             r.util_L2_clamped, r.util_upper, r.gap, leak, util_task))
    return rows


def experiment_grid(sweep: str, h_s: float, include_hs: bool) -> list:
    grid = parse_sweep(sweep)
    if include_hs and all(abs(e - h_s) > 1e-12 for e in grid):
        grid = sorted(grid + [h_s])
    return grid


def render_svg(rows: list, width: int = 640, height: int = 400) -> str:
    """Three utility curves against epsilon as a small standalone SVG."""
    curves = [("util_L1", "lower bound 1", "#1f77b4"),
              ("util_L2_clamped", "lower bound 2 (clamped)", "#2ca02c"),
              ("util_upper", "upper bound", "#d62728")]
    xs = [r.epsilon for r in rows]
    ys = [getattr(r, k) for r in rows for k, _, _ in curves if getattr(r, k) is not None]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(0.0, min(ys)), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    ml, mr, mt, mb = 60, 20, 20, 50
    pw, ph = width - ml - mr, height - mt - mb

    def px(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def py(y):
        return mt + ph - (y - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>',
           f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>']
    for k in range(5):
        xv = x0 + (x1 - x0) * k / 4
        yv = y0 + (y1 - y0) * k / 4
        out.append(f'<text x="{px(xv):.2f}" y="{mt + ph + 18}" font-size="11" '
                   f'text-anchor="middle">{xv:.3g}</text>')
        out.append(f'<text x="{ml - 6}" y="{py(yv) + 4:.2f}" font-size="11" '
                   f'text-anchor="end">{yv:.3g}</text>')
    out.append(f'<text x="{ml + pw / 2:.2f}" y="{height - 10}" font-size="12" '
               f'text-anchor="middle">leakage epsilon (nats)</text>')
    out.append(f'<text x="14" y="{mt + ph / 2:.2f}" font-size="12" text-anchor="middle" '
               f'transform="rotate(-90 14 {mt + ph / 2:.2f})">utility (nats)</text>')
    for i, (key, label, color) in enumerate(curves):
        pts = " ".join(f"{px(r.epsilon):.2f},{py(getattr(r, key)):.2f}"
                       for r in rows if getattr(r, key) is not None)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"/>')
        ly = mt + 14 + 16 * i
        out.append(f'<line x1="{ml + 10}" y1="{ly}" x2="{ml + 34}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ml + 40}" y="{ly + 4}" font-size="11">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_experiment(args, out) -> int:
    try:
        imgs = dataset.load_mnist(args.mnist_dir)
    except FileNotFoundError as exc:
        raise DataError(str(exc)) from None
    except dataset.IdxError as exc:
        raise DataError(f"bad IDX data ({exc.kind}): {exc}") from None
    if not 0 <= args.threshold <= 255:
        raise UsageError("threshold must be a byte value")
    exp = dataset.build_experiment_joint(imgs, args.threshold)
    h_s = bnd.theorem1_bounds(exp.joint, 0.0, "S", "Z").H_S
    grid = experiment_grid(args.sweep, h_s, args.include_hs)
    rows = sweep_rows(exp, grid, with_mechanism=args.mechanism)
    table = _csv([asdict(r) for r in rows])

    gap = rows[0].gap
    summary = {
        "images": exp.total,
        "threshold": args.threshold,
        "H_S": h_s,
        "gap": gap,
        "H_H_given_Z": bnd.utility_bounds(exp.joint, 0.0, f_axis="Z").H_H_given_F,
        "H_Z_given_H": bnd.utility_bounds(exp.joint, 0.0, f_axis="Z").H_F_given_H,
        "rows": len(rows),
    }
    if args.plot:
        Path(args.plot).write_text(render_svg(rows))
    if args.summary:
        Path(args.summary).write_text(_dump(summary))
    if args.out:
        Path(args.out).write_text(table)
        info = out
    else:
        out.write(table)
        info = sys.stderr
    info.write(f"images: {exp.total}  threshold: {args.threshold}  H(S) = {h_s:.6f} nats\n")
    info.write(f"gap H(H|Z) + H(Z|H) = {gap:.6f} nats\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="semprivacy", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def axes(sp):
        sp.add_argument("--s-axis", default="S")
        sp.add_argument("--f-axis", default="F")
        sp.add_argument("--h-axis", default="H")

    b = sub.add_parser("bounds", help="closed-form bounds for a joint table")
    b.add_argument("--joint", required=True)
    g = b.add_mutually_exclusive_group(required=True)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--sweep", metavar="START:STEP:END")
    b.add_argument("--format", choices=("json", "csv"), default="json")
    axes(b)
    b.set_defaults(func=cmd_bounds)

    m = sub.add_parser("mechanism", help="build the exact-leakage disclosure mechanism")
    m.add_argument("--joint", required=True)
    m.add_argument("--epsilon", type=float, required=True)
    m.add_argument("--out")
    axes(m)
    m.set_defaults(func=cmd_mechanism)

    o = sub.add_parser("oracle", help="numerically estimate the trade-off")
    o.add_argument("--joint", required=True)
    o.add_argument("--epsilon", type=float, required=True)
    o.add_argument("--u-size", type=int)
    o.add_argument("--restarts", type=int, default=oracle.DEFAULT_RESTARTS)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--dump-channel", action="store_true")
    axes(o)
    o.set_defaults(func=cmd_oracle)

    e = sub.add_parser("experiment", help="MNIST bound sweep")
    e.add_argument("--mnist-dir", help=f"defaults to ${dataset.MNIST_DIR_ENV}")
    e.add_argument("--threshold", type=int, default=dataset.DEFAULT_THRESHOLD)
    e.add_argument("--sweep", default=DEFAULT_EXPERIMENT_SWEEP, metavar="START:STEP:END")
    e.add_argument("--no-include-hs", dest="include_hs", action="store_false",
                   help="do not add epsilon = H(S) to the grid")
    e.add_argument("--no-mechanism", dest="mechanism", action="store_false")
    e.add_argument("--out", help="CSV path (default: stdout)")
    e.add_argument("--plot", metavar="SVG")
    e.add_argument("--summary", metavar="JSON")
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, out)
    except UsageError as exc:
        print(f"semprivacy: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"semprivacy: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (AxisError, ValidationError) as exc:
        print(f"semprivacy: joint does not fit the request: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (InvariantError, frl.MonotonicityError, oracle.OracleError,
            oracle.SandwichViolation) as exc:
        print(f"semprivacy: internal invariant failed: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
