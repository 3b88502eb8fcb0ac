"""Single executable exposing every operation for scripting and CI.

All subcommands print machine-readable JSON on stdout (or to ``--out``) and
render failures as single-line JSON on stderr.  Exit codes: 0 success, 1
verification failure, 2 usage or parse errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from .cubical import betti_curve, compute_diagram, diagram_to_json
from .demo import Scene, run_demo, trace_to_csv
from .matching import match, matching_to_json
from .msssim import DEFAULT_CONFIG, MsssimConfig, msssim, ssim_cost
from .objective import ObjectiveConfig, evaluate, normalize_dims
from .oracles import ORACLE_MAX_SIDE, betti_by_floodfill, fd_gradient
from .raster import FieldParseError, read_field, write_field, write_grid, write_pgm
from .topo_loss import topo_loss_full, topo_loss_patch


def resolve_threads(flag_value: int | None) -> int:
    if flag_value is not None:
        return max(1, flag_value)
    env = os.environ.get("TPOT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"TPOT_THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def _emit(payload, out_path: str | None) -> None:
    text = json.dumps(payload)
    if out_path:
        Path(out_path).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _parse_dims(text: str) -> tuple[int, ...]:
    return normalize_dims(int(t) for t in text.split(",") if t.strip() != "")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="write the JSON result here instead of stdout")


def _add_objective_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda-ssim", type=float, default=30.0)
    p.add_argument("--lambda-idt", type=float, default=15.0)
    p.add_argument("--lambda-topo", type=float, default=1.0)
    p.add_argument("--ti", type=int, default=100, help="gate step for the topology term")
    p.add_argument("--patch-size", type=int, default=65)
    p.add_argument("--dims", type=_parse_dims, default=(0, 1))
    p.add_argument("--eps-min", type=float, default=0.0)


def _config_from(args) -> ObjectiveConfig:
    return ObjectiveConfig(
        lambda_ssim=args.lambda_ssim,
        lambda_idt=args.lambda_idt,
        lambda_topo=args.lambda_topo,
        gate_step=args.ti,
        patch_size=args.patch_size,
        dims=args.dims,
        eps_min=args.eps_min,
    )


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="topokit",
        description="Topology-preserving loss toolkit for 2D likelihood maps.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("diagram", help="persistence diagram of a field")
    p.add_argument("field")
    p.add_argument("--dims", type=_parse_dims, default=(0, 1))
    _add_common(p)

    p = sub.add_parser("betti", help="Betti curve from the diagram")
    p.add_argument("field")
    p.add_argument("--dims", type=_parse_dims, default=(0, 1))
    p.add_argument(
        "--thresholds",
        help="comma-separated thresholds; default: unique field values descending",
    )
    _add_common(p)

    p = sub.add_parser("match", help="rank-match two diagrams")
    p.add_argument("gen")
    p.add_argument("ref")
    p.add_argument("--dims", type=_parse_dims, default=(0, 1))
    p.add_argument("--eps-min", type=float, default=0.0)
    _add_common(p)

    p = sub.add_parser("loss", help="patch-aggregated topology loss")
    p.add_argument("gen")
    p.add_argument("ref")
    p.add_argument("--patch-size", type=int, default=65)
    p.add_argument("--dims", type=_parse_dims, default=(0, 1))
    p.add_argument("--eps-min", type=float, default=0.0)
    p.add_argument("--grad-out", help="write the gradient grid as TPR1 here")
    p.add_argument("--threads", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("msssim", help="multi-scale structural similarity")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--scales", type=int, default=None, help="cap the scale count")
    _add_common(p)

    p = sub.add_parser("objective", help="composed gated objective")
    p.add_argument("--gen", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--ident", help="optional identity anchor field")
    p.add_argument("--step", type=int, required=True)
    p.add_argument("--external-w1", type=float, default=0.0)
    p.add_argument("--grad-out", help="write the gradient grid as TPR1 here")
    p.add_argument("--threads", type=int, default=None)
    _add_objective_flags(p)
    _add_common(p)

    p = sub.add_parser("demo", help="pixel-space descent on a synthetic scene")
    p.add_argument("--scene", required=True)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--eta", type=float, default=0.05)
    p.add_argument("--trace-out", help="write the per-step CSV here")
    p.add_argument("--field-out", help="write the final field as TPR1 here")
    p.add_argument("--dump-every", type=int, default=0)
    p.add_argument("--dump-dir")
    p.add_argument("--threads", type=int, default=None)
    _add_objective_flags(p)
    _add_common(p)

    p = sub.add_parser("verify", help="diagram vs flood-fill oracle")
    p.add_argument("--field", required=True)
    _add_common(p)

    p = sub.add_parser("verify-grad", help="analytic vs finite-difference gradient")
    p.add_argument("--gen", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--patch-size", type=int, default=65)
    p.add_argument("--dims", type=_parse_dims, default=(0, 1))
    p.add_argument("--eps-min", type=float, default=0.0)
    p.add_argument("--step-h", type=float, default=1e-4)
    p.add_argument("--rtol", type=float, default=1e-3)
    p.add_argument("--threads", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("convert", help="convert between TPR1 and PGM")
    p.add_argument("src")
    p.add_argument("dest")
    p.add_argument("--maxval", type=int, default=65535, help="PGM maxval on output")
    return ap


def _cmd_diagram(args) -> int:
    field = read_field(args.field)
    _emit(diagram_to_json(compute_diagram(field, args.dims)), args.out)
    return 0


def _cmd_betti(args) -> int:
    field = read_field(args.field)
    diagram = compute_diagram(field, args.dims)
    if args.thresholds:
        thresholds = [float(t) for t in args.thresholds.split(",")]
    else:
        thresholds = [float(a) for a in np.unique(field.values)[::-1]]
    payload = {"thresholds": thresholds}
    for dim in sorted(args.dims):
        payload[f"beta{dim}"] = betti_curve(diagram, dim, thresholds)
    _emit(payload, args.out)
    return 0


def _cmd_match(args) -> int:
    gen = read_field(args.gen)
    ref = read_field(args.ref)
    matching = match(
        compute_diagram(gen, args.dims),
        compute_diagram(ref, args.dims),
        args.eps_min,
    )
    _emit(matching_to_json(matching), args.out)
    return 0


def _cmd_loss(args) -> int:
    gen = read_field(args.gen)
    ref = read_field(args.ref)
    report = topo_loss_full(
        gen, ref, args.patch_size, args.dims, args.eps_min,
        threads=resolve_threads(args.threads),
    )
    if args.grad_out:
        write_grid(report.gradient, args.grad_out)
    _emit(
        {
            "total": report.total,
            "per_patch": [
                {"anchor": [a[0], a[1]], "loss": loss}
                for a, loss in ((p.anchor, p.loss) for p in report.per_patch)
            ],
            "grad": args.grad_out or None,
        },
        args.out,
    )
    return 0


def _cmd_msssim(args) -> int:
    a = read_field(args.a)
    b = read_field(args.b)
    cfg = DEFAULT_CONFIG
    if args.scales is not None:
        if not 1 <= args.scales <= len(DEFAULT_CONFIG.scale_weights):
            raise ValueError(f"--scales must be in [1, {len(DEFAULT_CONFIG.scale_weights)}]")
        cfg = MsssimConfig(scale_weights=DEFAULT_CONFIG.scale_weights[: args.scales])
    value = msssim(a, b, cfg)
    _emit({"msssim": value, "cost": 1.0 - value}, args.out)
    return 0


def _cmd_objective(args) -> int:
    gen = read_field(args.gen)
    x = read_field(args.input)
    y = read_field(args.ident) if args.ident else None
    report = evaluate(
        gen, x, y,
        step=args.step,
        cfg=_config_from(args),
        external_w1=args.external_w1,
        threads=resolve_threads(args.threads),
    )
    if args.grad_out:
        write_grid(report.gradient, args.grad_out)
    _emit(
        {
            "step": report.step,
            "transport_cost": report.transport_cost,
            "identity_cost": report.identity_cost,
            "topo_cost": report.topo_cost,
            "external_w1": report.external_w1,
            "gate_active": report.gate_active,
            "total": report.total,
            "grad": args.grad_out or None,
        },
        args.out,
    )
    return 0


def _cmd_demo(args) -> int:
    scene = Scene(args.scene, args.size, args.seed)
    trace = run_demo(
        scene,
        cfg=_config_from(args),
        steps=args.steps,
        eta=args.eta,
        dump_every=args.dump_every,
        dump_dir=args.dump_dir,
        threads=resolve_threads(args.threads),
    )
    if args.trace_out:
        Path(args.trace_out).write_text(trace_to_csv(trace))
    if args.field_out:
        write_field(trace.final_field, args.field_out)
    last = trace.rows[-1]
    _emit(
        {
            "scene": args.scene,
            "steps": args.steps,
            "final_total": last.total,
            "final_transport": last.transport,
            "final_topo": last.topo,
            "final_betti0": last.betti0,
            "final_betti1": last.betti1,
            "trace": args.trace_out or None,
            "final_field": args.field_out or None,
        },
        args.out,
    )
    return 0


def _cmd_verify(args) -> int:
    field = read_field(args.field)
    oracle = betti_by_floodfill(field)
    diagram = compute_diagram(field, (0, 1))
    curve0 = betti_curve(diagram, 0, oracle.thresholds)
    curve1 = betti_curve(diagram, 1, oracle.thresholds)
    mismatches = []
    for i, a in enumerate(oracle.thresholds):
        if curve0[i] != oracle.beta0[i]:
            mismatches.append(
                {"threshold": a, "dim": 0, "diagram": curve0[i], "oracle": oracle.beta0[i]}
            )
        if curve1[i] != oracle.beta1[i]:
            mismatches.append(
                {"threshold": a, "dim": 1, "diagram": curve1[i], "oracle": oracle.beta1[i]}
            )
    ok = not mismatches
    _emit(
        {
            "field": args.field,
            "thresholds_checked": len(oracle.thresholds),
            "ok": ok,
            "mismatches": mismatches,
        },
        args.out,
    )
    return 0 if ok else 1


def _cmd_verify_grad(args) -> int:
    gen = read_field(args.gen)
    ref = read_field(args.ref)
    if gen.height * gen.width > ORACLE_MAX_SIDE * ORACLE_MAX_SIDE:
        raise ValueError(
            f"finite-difference check limited to {ORACLE_MAX_SIDE * ORACLE_MAX_SIDE} "
            "pixels"
        )
    threads = resolve_threads(args.threads)
    analytic = topo_loss_full(
        gen, ref, args.patch_size, args.dims, args.eps_min, threads
    ).gradient

    def loss_fn(f):
        return topo_loss_full(
            f, ref, args.patch_size, args.dims, args.eps_min, threads
        ).total

    fd = fd_gradient(loss_fn, gen, args.step_h)
    critical = analytic != 0.0
    if critical.any():
        rel = np.abs(analytic[critical] - fd[critical]) / np.maximum(
            np.abs(fd[critical]), 1e-12
        )
        max_rel = float(rel.max())
    else:
        max_rel = 0.0
    max_abs_zero = float(np.abs(fd[~critical]).max()) if (~critical).any() else 0.0
    ok = max_rel <= args.rtol and max_abs_zero <= 1e-9
    _emit(
        {
            "gen": args.gen,
            "ref": args.ref,
            "critical_pixels": int(critical.sum()),
            "max_rel_err": max_rel,
            "max_abs_at_zero": max_abs_zero,
            "rtol": args.rtol,
            "ok": ok,
        },
        args.out,
    )
    return 0 if ok else 1


def _cmd_convert(args) -> int:
    field = read_field(args.src)
    dest = Path(args.dest)
    suffix = dest.suffix.lower().lstrip(".")
    if suffix == "tpr1":
        write_field(field, dest)
    elif suffix == "pgm":
        write_pgm(field, dest, args.maxval)
    else:
        raise ValueError(f"cannot infer output format from suffix of {dest.name!r}")
    return 0


_HANDLERS = {
    "diagram": _cmd_diagram,
    "betti": _cmd_betti,
    "match": _cmd_match,
    "loss": _cmd_loss,
    "msssim": _cmd_msssim,
    "objective": _cmd_objective,
    "demo": _cmd_demo,
    "verify": _cmd_verify,
    "verify-grad": _cmd_verify_grad,
    "convert": _cmd_convert,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except (FieldParseError, ValueError, OSError, FloatingPointError) as exc:
        sys.stderr.write(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n"
        )
        return 2


if __name__ == "__main__":
    sys.exit(main())
