"""Command-line interface: ``tomocouple <verb> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from tomocouple import __version__
from tomocouple.core import Geometry, make_rng, reconstruction_circle_mask
from tomocouple.coupling import coupling_matrix, write_csv
from tomocouple.experiments import (
    MATRICES,
    PAPER_SIZE,
    PRESETS,
    emit_report,
    generate_dataset,
    get_preset,
    grid_search,
    named_matrix,
    reference_image,
    results_csv,
    run_matrix,
    solver_config,
)
from tomocouple.fbp import FilterKind, fbp_reconstruct
from tomocouple.io import read_raw, write_config, write_pgm, write_raw
from tomocouple.metrics import add_poisson_noise, psnr
from tomocouple.phantom import SHEPP_LOGAN, analytic_sinogram, rasterize
from tomocouple.projectors import ProjectorKind, get_projector
from tomocouple.solvers import Algorithm, reconstruct

log = logging.getLogger("tomocouple")


def _out(args, name) -> Path:
    p = Path(name)
    if not p.is_absolute() and args.out_dir:
        p = Path(args.out_dir) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _load(path, kind):
    arr, found = read_raw(path)
    if found != kind:
        raise SystemExit(f"{path}: expected a {kind}, found a {found}")
    return arr


def cmd_phantom(args):
    img = rasterize(SHEPP_LOGAN, args.size)
    write_raw(_out(args, args.out), img, "image")
    if args.pgm:
        write_pgm(_out(args, args.pgm), img)
    return 0


def cmd_sinogram(args):
    g = Geometry(args.views, args.size)
    if args.kind == "analytic":
        s = analytic_sinogram(SHEPP_LOGAN, g)
    else:
        img = _load(args.input, "image") if args.input else rasterize(SHEPP_LOGAN, args.size)
        if img.shape[0] != args.size:
            g = Geometry(args.views, img.shape[0])
        s = get_projector(args.kind, g).forward(img)
    write_raw(_out(args, args.out), s, "sinogram")
    return 0


def cmd_noise(args):
    s = _load(args.input, "sinogram")
    noisy = add_poisson_noise(s, args.sigma, make_rng(args.seed or 0), reference_mean=args.reference_mean)
    write_raw(_out(args, args.out), noisy, "sinogram")
    return 0


def cmd_audit(args):
    g = Geometry(args.views, args.size)
    base = args.seed or 0
    seeds = [base + k for k in range(args.seeds)]
    matrix = coupling_matrix(g, seeds)
    if args.out:
        with open(_out(args, args.out), "w", encoding="utf-8") as fh:
            write_csv(matrix, fh)
    else:
        write_csv(matrix, sys.stdout)
    return 0


def cmd_fbp(args):
    s = _load(args.input, "sinogram")
    img = fbp_reconstruct(s, args.adjoint, args.filter)
    write_raw(_out(args, args.out), img, "image")
    return 0


def _dataset_or_file(args):
    if args.input:
        return _load(args.input, "sinogram"), None
    preset = get_preset(args.data, args.size)
    return generate_dataset(preset, args.seed), preset


def cmd_recon(args):
    s, preset = _dataset_or_file(args)
    overrides = {"iterations": args.iters}
    for name in ("tv_weight", "admm_penalty", "huber_weight", "huber_delta"):
        v = getattr(args, name)
        if v is not None:
            overrides[name] = v
    if args.no_constraints:
        overrides["constraints_enabled"] = False
    cfg = solver_config(args.data if preset else "", args.algo, overrides.items())
    ref = reference_image(s.shape[1]) if preset is not None or args.reference else None
    img, trace = reconstruct(s, args.fwd, args.adj, cfg, ref=ref)
    write_raw(_out(args, args.out), img, "image")
    if args.trace:
        with open(_out(args, args.trace), "w", encoding="utf-8") as fh:
            trace.write_csv(fh)
    status = "diverged" if trace.diverged else "ok"
    msg = f"{status} after {len(trace)} iterations, final cost {trace.final_cost:.6g}"
    if ref is not None:
        msg += f", PSNR {psnr(img, ref, reconstruction_circle_mask(s.shape[1])):.2f} dB"
    print(msg)
    return 0


def cmd_matrix(args):
    specs = []
    for name in args.names:
        specs += named_matrix(name, args.size)
    results = run_matrix(specs, seed=args.seed, workers=args.threads, out_dir=args.out_dir)
    text = results_csv(results)
    if args.csv:
        _out(args, args.csv).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.report:
        summary = emit_report(results, Path(args.out_dir or ".") / "report")
        print(summary.read_text(encoding="utf-8").splitlines()[0], file=sys.stderr)
    failed = [r for r in results if r.error]
    for r in failed:
        log.error("cell %s failed: %s", r.spec, r.error)
    return 1 if failed else 0


def cmd_report(args):
    specs = []
    for name in args.names:
        specs += named_matrix(name, args.size)
    results = run_matrix(specs, seed=args.seed, workers=args.threads)
    summary = emit_report(results, args.out_dir or "report")
    print(summary.read_text(encoding="utf-8"), end="")
    return 1 if any(r.error for r in results) else 0


def _grid_values(text):
    key, _, vals = text.partition("=")
    return key.strip(), [float(v) for v in vals.split(",")]


def cmd_tune(args):
    grid = dict(_grid_values(g) for g in args.grid)
    best, rows = grid_search(args.data, args.algo, args.fwd, grid, args.size, seed=args.seed, workers=args.threads)
    for params, value in rows:
        print(" ".join(f"{k}={v:g}" for k, v in params.items()), f"psnr={value:.3f}")
    print("best:", " ".join(f"{k}={v:g}" for k, v in best.items()))
    if args.write:
        write_config(_out(args, args.write), {f"{Algorithm.parse(args.algo).value}.{k}": f"{v:g}" for k, v in best.items()})
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tomocouple", description="Projector/backprojector coupling experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--seed", type=int, default=None, help="random seed (default: per-preset / 0)")
    p.add_argument("--threads", type=int, default=1, help="worker processes for experiment matrices")
    p.add_argument("--out-dir", default=None, help="directory for relative output paths")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)
    kinds = [k.value for k in ProjectorKind]
    filters = [f.value for f in FilterKind]
    algos = [a.value for a in Algorithm]

    q = sub.add_parser("phantom", help="rasterise the Shepp-Logan phantom")
    q.add_argument("--size", type=int, default=PAPER_SIZE)
    q.add_argument("--out", default="phantom.raw")
    q.add_argument("--pgm", default=None, help="also write a PGM preview")
    q.set_defaults(func=cmd_phantom)

    q = sub.add_parser("sinogram", help="analytic or projector-generated sinogram")
    q.add_argument("--kind", choices=["analytic"] + kinds, default="analytic")
    q.add_argument("--size", type=int, default=PAPER_SIZE)
    q.add_argument("--views", type=int, default=402)
    q.add_argument("--input", default=None, help="image to project (default: phantom)")
    q.add_argument("--out", default="sinogram.raw")
    q.set_defaults(func=cmd_sinogram)

    q = sub.add_parser("noise", help="add rescaled Poisson noise")
    q.add_argument("--input", required=True)
    q.add_argument("--sigma", type=float, required=True, help="std as a fraction of the mean")
    q.add_argument("--reference-mean", type=float, default=None)
    q.add_argument("--out", default="noisy.raw")
    q.set_defaults(func=cmd_noise)

    q = sub.add_parser("audit", help="adjoint-ratio coupling matrix")
    q.add_argument("--size", type=int, default=PAPER_SIZE)
    q.add_argument("--views", type=int, default=402)
    q.add_argument("--seeds", type=int, default=3)
    q.add_argument("--out", default=None)
    q.set_defaults(func=cmd_audit)

    q = sub.add_parser("fbp", help="filtered backprojection")
    q.add_argument("--input", required=True)
    q.add_argument("--adjoint", choices=kinds, default="pd")
    q.add_argument("--filter", choices=filters, default="ramp")
    q.add_argument("--out", default="fbp.raw")
    q.set_defaults(func=cmd_fbp)

    q = sub.add_parser("recon", help="iterative reconstruction")
    q.add_argument("--algo", choices=algos, required=True)
    q.add_argument("--fwd", choices=kinds, required=True)
    q.add_argument("--adj", choices=kinds, required=True)
    q.add_argument("--data", default="sl-full", choices=sorted(PRESETS))
    q.add_argument("--size", type=int, default=PAPER_SIZE)
    q.add_argument("--input", default=None, help="sinogram file instead of a preset")
    q.add_argument("--reference", action="store_true", help="log PSNR against the phantom for --input data")
    q.add_argument("--iters", type=int, default=100)
    q.add_argument("--lambda", dest="tv_weight", type=float, default=None)
    q.add_argument("--rho", dest="admm_penalty", type=float, default=None)
    q.add_argument("--beta", dest="huber_weight", type=float, default=None)
    q.add_argument("--delta", dest="huber_delta", type=float, default=None)
    q.add_argument("--no-constraints", action="store_true")
    q.add_argument("--trace", default=None, help="convergence CSV")
    q.add_argument("--out", default="recon.raw")
    q.set_defaults(func=cmd_recon)

    for verb, helptext, func in (("matrix", "run named experiment matrices", cmd_matrix),
                                 ("report", "run matrices and write a report", cmd_report)):
        q = sub.add_parser(verb, help=helptext)
        q.add_argument("names", nargs="+", choices=MATRICES)
        q.add_argument("--size", type=int, default=PAPER_SIZE)
        if verb == "matrix":
            q.add_argument("--csv", default=None, help="results CSV (default: stdout)")
            q.add_argument("--report", action="store_true", help="also emit the report files")
        q.set_defaults(func=func)

    q = sub.add_parser("tune", help="grid search of solver hyperparameters")
    q.add_argument("--data", default="sl-full", choices=sorted(PRESETS))
    q.add_argument("--algo", choices=algos, required=True)
    q.add_argument("--fwd", choices=kinds, required=True)
    q.add_argument("--size", type=int, default=PAPER_SIZE)
    q.add_argument("--grid", action="append", required=True, help="e.g. tv_weight=0.1,1,10 (repeatable)")
    q.add_argument("--write", default=None, help="write the best values as a config file")
    q.set_defaults(func=cmd_tune)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
