"""Command-line entry point.

Exit codes: 0 ok, 2 usage, 3 capacity, 4 I/O or file format, 5 training,
6 incompatible model/target.
"""

import argparse
import copy
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import figures
from .config import RunConfig, parse_assignments, parse_widths
from .errors import IncompatibleError, PdnError, TrainingError, UsageError
from .mixture import sample_design
from .models import KINDS, PDNModel, load_model, save_model
from .modes import emit_designs, find_modes, read_designs
from .physics import Geometry, Medium, check_grid, spectrum_error, transmission
from .plane import density_grid, emit_grid, fit_projection
from .rivals import compare, emit_report, train_ann, train_tnn
from .targets import resolve_target
from .training import train_pdn

log = logging.getLogger("pdnet")


def _config(args, extra=None):
    overrides = parse_assignments(getattr(args, "set", None))
    overrides.update({k: v for k, v in (extra or {}).items() if v is not None})
    return RunConfig.load(getattr(args, "config", None), overrides)


def _require(path, what):
    if path is None or not Path(path).is_file():
        raise OSError(f"{what} not found: {path}")
    return path


def _prepare_out(path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return path


def _figure_path(path, config, tag=""):
    return Path(path).with_name(f"{Path(path).stem}{tag}.{config['figures.format']}")


def _context(config, data):
    return {
        "geometry": vars(data.geometry).copy(),
        "medium": vars(data.medium).copy(),
        "grid": [float(f) for f in data.grid],
        "dataset_fingerprint": data.fingerprint(),
        "config": config.dump(),
    }


def _physics_from(model, config):
    """Geometry, medium and grid recorded in a weights file, else from config."""
    ctx = getattr(model, "context", None) or {}
    if "geometry" in ctx:
        return Geometry(**ctx["geometry"]), Medium(**ctx["medium"]), check_grid(ctx["grid"])
    return config.geometry(), config.medium(), config.grid()


def cmd_gen_data(args):
    config = _config(args, {"geometry.layer_count": args.layers})
    geometry, medium, grid = config.geometry(), config.medium(), config.grid()
    if args.values is not None:
        data = ds.generate_grid(args.values, geometry, medium, grid,
                                None if args.allow_large else config["data.max_pairs"])
    else:
        data = ds.generate_random(args.random, args.seed, geometry, medium, grid)
    ds.save(data, _prepare_out(args.out))
    if args.csv:
        ds.export_csv(data, _prepare_out(args.csv))
    config.write_beside(args.out)
    print(f"wrote {args.out}: {len(data)} pairs, {geometry.layer_count} layers, "
          f"{grid.size} frequencies {grid[0]:g}-{grid[-1]:g} Hz, "
          f"{data.provenance}, fingerprint {data.fingerprint()}")
    return 0


def _train_flags(args):
    return {
        "train.epochs": args.epochs,
        "train.seed": args.seed,
        "train.learning_rate": args.learning_rate,
        "train.batch_size": args.batch_size,
        "train.hidden": args.hidden,
        "train.mixture_count": args.mixtures,
        "train.weight_decay": args.weight_decay,
        "train.activation": args.activation,
    }


def cmd_train(args):
    extra = _train_flags(args)
    extra["model.kind"] = args.kind
    config = _config(args, extra)
    data = ds.load(_require(args.data, "dataset"))
    scaler = config.scaler()
    if config.geometry() != data.geometry:
        log.info("using the geometry recorded in %s", args.data)
        scaler = type(scaler).from_geometry(data.geometry)
    x, y = data.spectra, scaler.to_design(data.radii)
    tc = config.train_config()
    kind = config["model.kind"]
    context = _context(config, data)
    out = _prepare_out(args.out)
    log_path = _prepare_out(args.log or f"{args.out}.loss.csv")
    losses, last_good = [], {}

    def on_epoch(epoch, loss, model):
        losses.append(loss)
        last_good["model"] = copy.deepcopy(model)

    try:
        if kind == "pdn":
            model, losses = train_pdn(x, y, tc, scaler, context, on_epoch)
        elif kind == "ann":
            model, losses = train_ann(x, y, tc, scaler, context, on_epoch)
        else:
            model, losses = train_tnn(x, y, tc, scaler, context, config["tnn.gate"],
                                      config["tnn.holdout"], config.forward_config(), on_epoch)
    except TrainingError as exc:
        _write_loss_log(losses, log_path)
        if "model" in last_good:
            save_model(last_good["model"], out)
            print(f"training diverged; last good epoch {len(losses) - 1} written to {out}",
                  file=sys.stderr)
        raise exc
    save_model(model, out)
    _write_loss_log(losses, log_path)
    config.write_beside(out)
    if config["figures.enabled"] and losses:
        figures.plot_loss(losses, _figure_path(log_path, config))
    final = f"{losses[-1]:.6f}" if losses else "n/a (0 epochs)"
    print(f"trained {kind} for {tc.epochs} epochs; final train loss {final}; wrote {out}")
    return 0


def _write_loss_log(losses, path):
    lines = ["epoch,loss"] + [f"{i},{v:.10g}" for i, v in enumerate(losses)]
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_design(args):
    config = _config(args, {"pca.resolution": args.resolution})
    model = load_model(_require(args.weights, "weights file"))
    if not isinstance(model, PDNModel):
        raise IncompatibleError(f"design needs a pdn weights file, got {model.kind}")
    geometry, medium, grid = _physics_from(model, config)
    if model.input_dim != grid.size:
        raise IncompatibleError(
            f"model expects {model.input_dim} inputs but its grid has {grid.size} points")
    target = resolve_target(args.target, grid, geometry, medium, config["target.peak_width_hz"])
    params = model.mixtures(target[None, :])[0]
    modes = find_modes(params, config.seeker_config(), model.scaler, geometry)
    projection = None
    out = _prepare_out(args.out)
    if args.pca_grid:
        if config["pca.fit_on"] == "labels":
            data = ds.load(_require(args.data, "--data (needed for pca.fit_on = labels)"))
            points = model.scaler.to_design(data.radii)
        else:
            points = sample_design(params, config["pca.samples"], config["pca.seed"])
        projection = fit_projection(points)
        grid2d = density_grid(params, projection, config["pca.resolution"], points,
                              np.array([m.location for m in modes]))
        emit_grid(grid2d, _prepare_out(args.pca_grid))
        if config["figures.enabled"]:
            figures.plot_density_grid(grid2d, _figure_path(args.pca_grid, config))
    emit_designs(modes, out, projection)
    config.write_beside(out)
    print(f"{len(modes)} design(s) for {args.target}:")
    for m in modes:
        radii = ", ".join(f"{r * 1e3:.2f}" for r in m.radii)
        print(f"  A{m.rank}: density {m.density:.4g}  radii ({radii}) mm")
    return 0


def cmd_verify(args):
    config = _config(args)
    if args.weights:
        geometry, medium, grid = _physics_from(load_model(_require(args.weights, "weights")),
                                               config)
    else:
        geometry, medium, grid = config.geometry(), config.medium(), config.grid()
    designs = read_designs(_require(args.designs, "designs CSV"))
    if not designs:
        raise UsageError(f"{args.designs} holds no designs")
    target = resolve_target(args.target, grid, geometry, medium, config["target.peak_width_hz"])
    # radii were printed at 0.01 mm; clamp rounding spill-over back into range
    radii = np.clip(np.array([d["radii"] for d in designs]), geometry.radius_min,
                    geometry.radius_max)
    spectra = transmission(radii, grid, geometry, medium)
    errors = [spectrum_error(s, target) for s in spectra]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rank", "spectrum_error"] + [f"r{i + 1}_mm" for i in range(radii.shape[1])]
                    + [f"t{f:g}" for f in grid])
    for d, r, err, s in zip(designs, radii, errors, spectra):
        writer.writerow([d["rank"], f"{err:.10e}"] + [f"{v * 1e3:.2f}" for v in r]
                        + [f"{t:.9f}" for t in s])
    out = _prepare_out(args.out)
    Path(out).write_text(buf.getvalue())
    config.write_beside(out)
    if config["figures.enabled"]:
        figures.plot_verification(grid, target, spectra,
                                  [f"A{d['rank']}: error {e:.3f}" for d, e in zip(designs, errors)],
                                  _figure_path(out, config))
    for d, err in zip(designs, errors):
        print(f"  A{d['rank']}: spectrum error {err:.4f}")
    return 0


def cmd_compare(args):
    config = _config(args, dict(_train_flags(args), **{
        "compare.test_count": args.test_count, "compare.test_seed": args.test_seed}))
    kinds = [k.strip() for k in args.models.split(",") if k.strip()]
    bad = [k for k in kinds if k not in KINDS]
    if bad or not kinds:
        raise UsageError(f"unknown model name(s) {bad}; valid names: {', '.join(KINDS)}")
    data = ds.load(_require(args.data, "dataset"))
    test = ds.generate_random(config["compare.test_count"], config["compare.test_seed"],
                              data.geometry, data.medium, data.grid)
    report = compare(data, test, kinds, config.train_config(),
                     type(config.scaler()).from_geometry(data.geometry),
                     config.seeker_config(), config["compare.variety_threshold_mm"],
                     config["compare.train_eval_count"], gate=config["tnn.gate"],
                     holdout=config["tnn.holdout"], forward_config=config.forward_config())
    out = _prepare_out(args.out)
    emit_report(report, out)
    config.write_beside(out)
    if config["figures.enabled"]:
        figures.plot_report(report, _figure_path(out, config))
    for row in report.rows:
        print(f"  {row.kind}: train {row.train_error:.4f} test {row.test_error:.4f} "
              f"time {row.time_s:.1f}s variety {row.variety_mean:.2f} [{row.status}]")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pdnet", description="Probability-density network for multivalued inverse design")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    training = argparse.ArgumentParser(add_help=False)
    training.add_argument("--epochs", type=int)
    training.add_argument("--seed", type=int)
    training.add_argument("--learning-rate", type=float)
    training.add_argument("--batch-size", type=int)
    training.add_argument("--hidden", type=str, help="comma-separated widths, e.g. 128,256")
    training.add_argument("--mixtures", type=int, help="number of mixture components")
    training.add_argument("--weight-decay", type=float)
    training.add_argument("--activation", choices=("relu", "relu6", "linear"))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common], help="generate a labelled dataset")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--values", type=int, help="grid values per layer (v^L pairs)")
    src.add_argument("--random", type=int, help="number of uniformly random structures")
    p.add_argument("--layers", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", help="also export a CSV copy")
    p.add_argument("--allow-large", action="store_true", help="lift the pair-count guard")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", parents=[common, training], help="train a model")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="weights file (.pdnw)")
    p.add_argument("--kind", choices=KINDS)
    p.add_argument("--log", help="per-epoch loss CSV (default <out>.loss.csv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("design", parents=[common], help="inverse-design a target spectrum")
    p.add_argument("--weights", required=True)
    p.add_argument("--target", required=True,
                   help="CSV path or template: bandgap:LO-HI, peak:F0[:W], structure:r1,..,rL")
    p.add_argument("--out", required=True, help="designs CSV")
    p.add_argument("--pca-grid", help="also write the PCA density grid CSV here")
    p.add_argument("--resolution", type=int)
    p.add_argument("--data", help="dataset for pca.fit_on = labels")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("verify", parents=[common], help="recompute design spectra")
    p.add_argument("--designs", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--weights", help="take geometry/medium/grid from this weights file")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("compare", parents=[common, training], help="benchmark pdn/ann/tnn")
    p.add_argument("--data", required=True)
    p.add_argument("--models", default="pdn,ann,tnn")
    p.add_argument("--out", required=True)
    p.add_argument("--test-count", type=int)
    p.add_argument("--test-seed", type=int)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "hidden", None):
        try:
            parse_widths(args.hidden)
        except UsageError as exc:
            print(f"pdnet: error: {exc}", file=sys.stderr)
            return 2
    try:
        return args.func(args)
    except PdnError as exc:
        print(f"pdnet {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"pdnet {args.command}: I/O error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
