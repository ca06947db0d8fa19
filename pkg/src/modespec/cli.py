"""Command-line workflows: decompose, design lenses, simulate and invert scans.

Exit codes: 0 success, 1 numerical tolerance failure, 2 input/parse error,
3 range, design or sampling error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import beams, io, rays
from .interferometer import (IdentityC, Misalignment, MinusIdentityC, ScanConfig, run_scan,
                             scan_analytic)
from .modes import (FrameMismatchError, GridResolutionError, GridSpec, ModeSpectrum, PhysicalFrame,
                    WeightSpectrum, decompose, mode_indices)
from .propagation import SamplingError
from .reconstruction import ReconstructionError, misalignment_study, reconstruct_hg, sampling_bound

log = logging.getLogger("modespec")

EXIT_OK, EXIT_TOLERANCE, EXIT_INPUT, EXIT_RANGE = 0, 1, 2, 3

MISALIGNED_ELEMENTS = {
    "plus-middle": lambda d: Misalignment.middle_lens(d, "plus"),
    "plus-first": lambda d: Misalignment({("plus", 0): (d, 0.0)}),
    "minus-middle": lambda d: Misalignment.middle_lens(d, "minus"),
}


class ToleranceFailure(Exception):
    pass


def _frame(args) -> PhysicalFrame:
    return PhysicalFrame(args.w0, args.lambdabar)


def _grid(args) -> GridSpec:
    return GridSpec(args.grid, args.grid, args.window)


def _write(path: Path, text: str):
    path.write_text(text, encoding="utf-8")
    log.info("wrote %s", path)


def _dat(path: Path, columns: list[str], rows, blocks: int | None = None):
    """Whitespace table for gnuplot; ``blocks`` inserts a blank line every n rows."""
    lines = ["# " + " ".join(columns)]
    for i, r in enumerate(rows):
        if blocks and i and i % blocks == 0:
            lines.append("")
        lines.append(" ".join(str(v) if isinstance(v, (int, np.integer)) else io.fmt(v) for v in r))
    _write(path, "\n".join(lines) + "\n")


def _json(path: Path, obj):
    _write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _random_spectrum(frame, max_order, seed) -> ModeSpectrum:
    rng = np.random.default_rng(seed)
    idx = mode_indices(max_order)
    c = rng.normal(size=len(idx)) + 1j * rng.normal(size=len(idx))
    return ModeSpectrum(frame, dict(zip(idx, c))).normalized()


def _recipe(args, frame):
    """Beam argument: showcase name, ``random`` (seeded) or a file path."""
    name = args.beam
    if name in beams.SHOWCASE:
        return beams.SHOWCASE[name]
    if name == "random":
        return beams.CoefficientList(_random_spectrum(frame, args.max_order, args.seed))
    if name.startswith("hg:"):
        try:
            nx, ny = (int(v) for v in name[3:].split(","))
        except ValueError:
            raise io.ParseError(f"expected hg:NX,NY, got {name!r}") from None
        return beams.CoefficientList(ModeSpectrum(frame, {(nx, ny): 1.0}))
    return beams.load_beam(name)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _weight_rows(w: WeightSpectrum):
    return [(k.nx, k.ny, v) for k, v in w.entries.items()]


def cmd_decompose(args) -> int:
    frame, grid, out = _frame(args), _grid(args), _out(args)
    field = beams.realize(_recipe(args, frame), frame, grid)
    spec = decompose(field, args.max_order)
    io.write_spectrum(out / "spectrum.csv", spec)
    io.write_weights(out / "weights.csv", spec.weights())
    _dat(out / "weights.dat", ["nx", "ny", "weight"], _weight_rows(spec.weights()))
    _json(out / "report.json", {"residual": spec.residual, "max_order": args.max_order,
                                "captured_power": spec.total_power()})
    print(f"decomposed up to order {args.max_order}: captured power {spec.total_power():.10f}, "
          f"residual {spec.residual:.3e}")
    return EXIT_OK


def cmd_design_lenses(args) -> int:
    frame, out = _frame(args), _out(args)
    lo, hi = args.phi_min, args.phi_max
    if lo < rays.OPERATING_RANGE[0] - 1e-12 or hi > rays.OPERATING_RANGE[1] + 1e-12 or hi < lo:
        raise rays.DesignRangeError(f"phi range [{lo}, {hi}] must lie inside [pi, 3pi]")
    phis = np.linspace(lo, hi, args.points)
    plus_rows, minus_rows = [], []
    for (phi, *radii), (_, *angles) in zip(rays.operation_curve_plus(phis, frame), rays.operation_curve_minus(phis)):
        dp = float(np.max(np.abs(rays.compose(rays.design_s_plus(phi, frame)) - rays.s_plus(phi, frame))))
        dm = float(np.max(np.abs(rays.compose(rays.design_s_minus(phi, frame)) - rays.s_minus(phi, frame))))
        plus_rows.append((phi, *radii, dp))
        minus_rows.append((phi, *angles, dm))
    r1, r2 = np.array([r[1] for r in plus_rows]), np.array([r[2] for r in plus_rows])
    om = np.array([r[1] for r in minus_rows])
    _write(out / "curve_plus.csv", io._csv_text(["phi", "R1", "R2", "defect"],
                                                [tuple(io.fmt(v) for v in r) for r in plus_rows]))
    _write(out / "curve_minus.csv", io._csv_text(["phi", "Omega", "alpha1", "alpha2", "defect"],
                                                 [tuple(io.fmt(v) for v in r) for r in minus_rows]))
    _dat(out / "curve_plus.dat", ["phi", "R1", "R2", "defect"], plus_rows)
    _dat(out / "curve_minus.dat", ["phi", "Omega", "alpha1", "alpha2", "defect"], minus_rows)
    for phi in args.train_phi:
        tag = f"{phi / math.pi:.4f}pi"
        io.write_train(out / f"train_plus_{tag}.csv", rays.design_s_plus(phi, frame), frame)
        io.write_train(out / f"train_minus_{tag}.csv", rays.design_s_minus(phi, frame), frame)
    worst = max(max(r[-1] for r in plus_rows), max(r[-1] for r in minus_rows))
    print(f"S+ lenses (index {rays.DESIGN_INDEX}): R1=R3 in [{np.min(r1):.6g}, {np.max(r1):.6g}], "
          f"R2 in [{np.min(r2):.6g}, {np.max(r2):.6g}] over phi in [{lo:.6g}, {hi:.6g}]")
    print(f"S- scissor pairs: Omega in [{np.min(om):.6g}, {np.max(om):.6g}]")
    print("tunable-lens feasibility of these radii is left to the user")
    print(f"max matrix defect {worst:.3e}")
    _json(out / "design_report.json", {"points": args.points, "max_defect": worst, "design_index": rays.DESIGN_INDEX})
    if worst > args.tol:
        raise ToleranceFailure(f"matrix defect {worst:.3e} exceeds {args.tol:.1e}")
    return EXIT_OK


def _scan_source(args, frame, grid):
    recipe = _recipe(args, frame)
    if args.engine == "analytic":
        if isinstance(recipe, beams.CoefficientList):
            return recipe.spectrum.normalized(), None
        f = beams.realize(recipe, frame, grid)
        return decompose(f, args.max_order), f
    f = beams.realize(recipe, frame, grid)
    return f, f


def _write_scan(out: Path, name: str, scan):
    io.write_scan(out / f"{name}.csv", scan)
    rows = [(a, b, scan.values[i, j]) for i, a in enumerate(scan.phi_plus) for j, b in enumerate(scan.phi_minus)]
    _dat(out / f"{name}.dat", ["phi_plus", "phi_minus", "delta_i"], rows, blocks=scan.k_minus)


def cmd_simulate_scan(args) -> int:
    frame, grid, out = _frame(args), _grid(args), _out(args)
    source, field = _scan_source(args, frame, grid)
    scans = {}
    for name, comp in (("scan_identity", IdentityC), ("scan_minus_identity", MinusIdentityC)):
        cfg = ScanConfig(args.k_plus, args.k_minus, compensator=comp, engine=args.engine)
        scans[name] = run_scan(source, cfg, **({} if args.engine == "analytic" else {"workers": args.workers}))
        _write_scan(out, name, scans[name])
    print(f"wrote {len(scans)} scans ({args.engine} engine, K+={args.k_plus}, K-={args.k_minus})")
    if args.cross_check:
        if field is None:
            raise io.ParseError("--cross-check needs a sampled beam, not a coefficient list")
        oracle = decompose(field, args.max_order)
        dev = 0.0
        for name, s in scans.items():
            ref = scan_analytic(oracle, ScanConfig(args.k_plus, args.k_minus, compensator=s.compensator))
            dev = max(dev, float(np.max(np.abs(ref.values - s.values))))
        print(f"cross-check against the analytic engine: max deviation {dev:.3e}")
        _json(out / "cross_check.json", {"engine": args.engine, "max_deviation": dev, "tolerance": args.tol})
        if dev > args.tol:
            raise ToleranceFailure(f"engine deviation {dev:.3e} exceeds {args.tol:.1e}")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    out = _out(args)
    if args.complex:
        log.warning("coefficient phases are not recoverable from intensity differences; writing weights only")
    a, b = io.read_scan(args.scan_identity), io.read_scan(args.scan_minus_identity)
    try:
        rep = reconstruct_hg(a, b, args.max_order)
    except ReconstructionError as exc:
        raise io.ParseError(str(exc)) from None
    io.write_weights(out / "weights.csv", rep.weights)
    _dat(out / "weights.dat", ["nx", "ny", "weight"], _weight_rows(rep.weights))
    _write(out / "report.json", rep.to_json() + "\n")
    print(f"reconstructed {len(rep.weights.entries)} weights up to order {args.max_order}: "
          f"sum {rep.weights.total():.8f}, residual {rep.residual:.3e}, sampling_ok={rep.sampling_ok}")
    if not rep.sampling_ok:
        log.warning("max_order %d exceeds sampling_bound(%d) = %d or the residual is large",
                    args.max_order, min(rep.k_plus, rep.k_minus), sampling_bound(min(rep.k_plus, rep.k_minus)))
    if args.compare:
        return _compare(rep.weights, io.read_any_weights(args.compare), out, args.tol)
    return EXIT_OK


def _compare(got: WeightSpectrum, ref: WeightSpectrum, out: Path, tol: float) -> int:
    order = max(got.max_order, ref.max_order)
    rows = [(k.nx, k.ny, got[k], ref[k], got[k] - ref[k]) for k in mode_indices(order)]
    cols = ["nx", "ny", "reconstructed", "oracle", "error"]
    _write(out / "comparison.csv", io._csv_text(cols, [(r[0], r[1], *(io.fmt(v) for v in r[2:])) for r in rows]))
    _dat(out / "comparison.dat", cols, rows)
    max_err = max(abs(r[4]) for r in rows)
    tv = 0.5 * sum(abs(r[4]) for r in rows)
    _json(out / "comparison.json", {"max_error": max_err, "total_variation": tv, "tolerance": tol})
    print(f"max per-mode error {max_err:.3e}, total variation {tv:.3e}")
    if max_err > tol:
        raise ToleranceFailure(f"max per-mode error {max_err:.3e} exceeds {tol:.1e}")
    return EXIT_OK


def cmd_compare(args) -> int:
    return _compare(io.read_any_weights(args.weights), io.read_any_weights(args.oracle), _out(args), args.tol)


def cmd_misalignment_study(args) -> int:
    frame, grid, out = _frame(args), _grid(args), _out(args)
    f = beams.realize(_recipe(args, frame), frame, grid)
    k = min(args.k_plus, args.k_minus)
    order = min(args.max_order, k - 1)
    ref = decompose(f, order).weights()
    rows, slope = misalignment_study(f, [0.0] + list(args.deltas), MISALIGNED_ELEMENTS[args.element],
                                     ref, k, order, args.workers)
    cols = ["delta_over_w0", "error", "ground_weight"]
    table = [(r.delta / frame.w0, r.error, r.ground_weight) for r in rows]
    _write(out / "misalignment.csv", io._csv_text(cols, [tuple(io.fmt(v) for v in r) for r in table]))
    _dat(out / "misalignment.dat", cols, table)
    err_01 = next((r.error for r in rows if math.isclose(r.delta / frame.w0, 0.1)), None)
    _json(out / "misalignment.json", {"element": args.element, "slope": slope, "error_at_0.1": err_01,
                                      "K": k, "max_order": order})
    for r in table:
        print(f"delta/w0={r[0]:.3g}  error={r[1]:.3e}")
    print(f"log-log slope {slope:.4f}")
    failed = abs(slope - 2.0) > 0.1 or (err_01 is not None and err_01 >= 0.01)
    if failed:
        raise ToleranceFailure(f"quadratic-misalignment claim not met: slope {slope:.3f}, "
                               f"error at 0.1 w0 {err_01}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--w0", type=float, default=1.0, help="basis waist")
    common.add_argument("--lambdabar", type=float, default=0.5, help="reduced wavelength")
    common.add_argument("--grid", type=int, default=512, help="samples per axis")
    common.add_argument("--window", type=float, default=8.0, help="half window in units of w0")
    common.add_argument("--k-plus", type=int, default=10)
    common.add_argument("--k-minus", type=int, default=10)
    common.add_argument("--engine", choices=("analytic", "kernel", "train"), default="kernel")
    common.add_argument("--max-order", type=int, default=9)
    common.add_argument("--out", default=".")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--workers", type=int, default=None, help="threads for scan rows")
    common.add_argument("--tol", type=float, default=None, help="pass/fail tolerance")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="modespec", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    beam_help = "showcase name (astigmatic, necklace, multiring), hg:NX,NY, random, or a beam file"

    s = sub.add_parser("decompose", parents=[common], help="project a beam onto HG modes")
    s.add_argument("beam", help=beam_help)
    s.set_defaults(func=cmd_decompose, tol_default=0.0)

    s = sub.add_parser("design-lenses", parents=[common], help="operation curves and lens trains")
    s.add_argument("--phi-min", type=float, default=math.pi)
    s.add_argument("--phi-max", type=float, default=3 * math.pi)
    s.add_argument("--points", type=int, default=51)
    s.add_argument("--train-phi", type=float, nargs="*", default=[2 * math.pi])
    s.set_defaults(func=cmd_design_lenses, tol_default=1e-9)

    s = sub.add_parser("simulate-scan", parents=[common], help="intensity-difference scans for both compensators")
    s.add_argument("beam", help=beam_help)
    s.add_argument("--cross-check", action="store_true", help="compare against the analytic engine")
    s.set_defaults(func=cmd_simulate_scan, tol_default=1e-3)

    s = sub.add_parser("reconstruct", parents=[common], help="mode weights from two scans")
    s.add_argument("scan_identity")
    s.add_argument("scan_minus_identity")
    s.add_argument("--compare", help="oracle spectrum or weight CSV")
    s.add_argument("--complex", action="store_true", help="request complex coefficients (not recoverable)")
    s.set_defaults(func=cmd_reconstruct, tol_default=1e-3)

    s = sub.add_parser("misalignment-study", parents=[common], help="error versus lens offset")
    s.add_argument("--beam", default="hg:0,0", help=beam_help)
    s.add_argument("--deltas", type=float, nargs="+", default=[1e-3, 3e-3, 1e-2, 3e-2, 1e-1],
                   help="offsets in units of w0")
    s.add_argument("--element", choices=sorted(MISALIGNED_ELEMENTS), default="plus-middle")
    s.set_defaults(func=cmd_misalignment_study, tol_default=None)

    s = sub.add_parser("compare", parents=[common], help="per-mode comparison of two weight files")
    s.add_argument("weights")
    s.add_argument("oracle")
    s.set_defaults(func=cmd_compare, tol_default=1e-3)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if args.tol is None:
        args.tol = args.tol_default
    if hasattr(args, "deltas"):
        args.deltas = [d * args.w0 for d in args.deltas]
    try:
        return args.func(args)
    except ToleranceFailure as exc:
        print(f"tolerance failure: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except (io.ParseError, FileNotFoundError, IsADirectoryError, PermissionError, FrameMismatchError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (rays.DesignRangeError, rays.CompensatorError, SamplingError, GridResolutionError) as exc:
        print(f"range error: {exc}", file=sys.stderr)
        return EXIT_RANGE
    except ValueError as exc:
        print(f"range error: {exc}", file=sys.stderr)
        return EXIT_RANGE


if __name__ == "__main__":
    sys.exit(main())
