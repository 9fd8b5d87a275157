"""Single-valued baselines and the model comparison harness.

* ANN: spectrum -> structure regression on squared error. With several valid
  structures per spectrum it converges to their average.
* TNN: a forward net F (structure -> spectrum) is trained first, then an
  inverse net G is trained through the frozen F on ``|F(G(x)) - x|^2``.

Models are scored in spectrum space: every emitted design is pushed through
the transfer-matrix oracle and the best design per target counts.
"""

import csv
import io
import logging
import os
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, FormatError, PdnError, TrainingError
from .models import PDNModel, TandemModel
from .modes import SeekerConfig, find_modes
from .net import backward, dense_specs, forward, init_weights
from .physics import spectrum_error, transmission
from .training import TrainConfig, fit, train_pdn, train_regressor

log = logging.getLogger(__name__)

FORWARD_GATE = 0.05
REPORT_COLUMNS = ["kind", "train_error", "test_error", "time_s", "variety_mean",
                  "variety_max", "status"]


def train_ann(x, y, config: TrainConfig, scaler=None, context=None, on_epoch=None):
    """Direct inverse regression; ``y`` in design units."""
    return train_regressor(x, y, config, scaler, context, kind="ann", on_epoch=on_epoch)


def tandem_loss(inverse, forward_net, x):
    """Stage-2 loss ``mean((F(G(x)) - x)^2)`` and gradients for G only."""
    design, g_cache = forward(inverse, x, "train")
    recon, f_cache = forward(forward_net, design, "infer")
    diff = recon - x
    _, d_design = backward(forward_net, f_cache, 2.0 * diff / diff.size)
    grads, _ = backward(inverse, g_cache, d_design)
    return float(np.mean(diff * diff)), grads


def train_tnn(x, y, config: TrainConfig, scaler=None, context=None,
              gate=FORWARD_GATE, holdout=0.1, forward_config=None, on_epoch=None):
    """Two-stage tandem training.

    A seeded ``holdout`` fraction is kept out of stage 1 to measure the
    forward net's mean absolute error; stage 2 is refused when it exceeds
    ``gate``. ``forward_config`` overrides the stage-1 settings (defaults to
    ``config``); ``on_epoch(epoch, loss, model)`` follows stage 2. Returns
    ``(TandemModel, losses)`` with the losses of both stages.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    order = np.random.default_rng([config.seed, 7]).permutation(x.shape[0])
    n_hold = max(1, int(round(holdout * x.shape[0])))
    hold, fit_idx = order[:n_hold], order[n_hold:]
    forward_model, stage1 = train_regressor(y[fit_idx], x[fit_idx], forward_config or config,
                                            kind="forward")
    forward_net = forward_model.net
    forward_error = float(np.mean(np.abs(forward_model.predict(y[hold]) - x[hold])))
    log.info("tandem forward net holdout error %.4f", forward_error)
    if forward_error > gate:
        raise TrainingError(
            f"forward net holdout error {forward_error:.4f} exceeds gate {gate}; "
            "refusing stage 2")
    inverse = init_weights(dense_specs(x.shape[1], config.hidden, y.shape[1],
                                       config.activation, config.batch_norm), config.seed + 3)
    model = TandemModel(inverse, forward_net, scaler,
                        dict(context or {}, forward_error=forward_error))
    callback = None if on_epoch is None else (lambda e, loss: on_epoch(e, loss, model))
    stage2 = fit(inverse.parameters(), inverse.owners(),
                 lambda index: tandem_loss(inverse, forward_net, x[index]),
                 x.shape[0], config, callback)
    return model, stage1 + stage2


def designs_for(model, spectra, geometry, seeker=SeekerConfig()):
    """Candidate structures (metres) per target spectrum, best-ranked first."""
    spectra = np.atleast_2d(spectra)
    if isinstance(model, PDNModel):
        params = model.mixtures(spectra)
        return [np.array([m.radii for m in find_modes(params[i], seeker, model.scaler, geometry)])
                for i in range(spectra.shape[0])]
    radii = model.scaler.to_physical(model.predict(spectra))
    radii = np.clip(radii, geometry.radius_min, geometry.radius_max)
    return [r[None, :] for r in radii]


def variety(designs, threshold_mm=2.0):
    """Size of the greedy set of designs pairwise >= threshold apart (L-inf, mm)."""
    kept = []
    for d in designs:
        if all(np.max(np.abs(d - k)) * 1e3 >= threshold_mm for k in kept):
            kept.append(d)
    return len(kept)


def score(model, spectra, geometry, medium, grid, seeker=SeekerConfig(), threshold_mm=2.0):
    """Best-of-designs oracle error and variety per target."""
    errors, varieties = [], []
    for target, designs in zip(np.atleast_2d(spectra), designs_for(model, spectra, geometry,
                                                                    seeker)):
        predicted = transmission(designs, grid, geometry, medium)
        errors.append(min(spectrum_error(p, target) for p in predicted))
        varieties.append(variety(designs, threshold_mm))
    return np.array(errors), np.array(varieties)


@dataclass
class ReportRow:
    kind: str
    train_error: float = float("nan")
    test_error: float = float("nan")
    time_s: float = float("nan")
    variety_mean: float = float("nan")
    variety_max: int = 0
    status: str = "ok"


@dataclass
class Report:
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def row(self, kind):
        return next(r for r in self.rows if r.kind == kind)


def evaluate(model, train_targets, test_targets, geometry, medium, grid,
             seeker=SeekerConfig(), threshold_mm=2.0, time_s=float("nan")) -> ReportRow:
    """Report row for a trained model; targets are spectra arrays (n, F)."""
    train_err, _ = score(model, train_targets, geometry, medium, grid, seeker, threshold_mm)
    test_err, var = score(model, test_targets, geometry, medium, grid, seeker, threshold_mm)
    return ReportRow(model.kind, float(train_err.mean()), float(test_err.mean()), time_s,
                     float(var.mean()), int(var.max()))


def train_kind(kind, x, y, config, scaler, context=None, **tandem):
    if kind == "pdn":
        return train_pdn(x, y, config, scaler, context)
    if kind == "ann":
        return train_ann(x, y, config, scaler, context)
    if kind == "tnn":
        return train_tnn(x, y, config, scaler, context, **tandem)
    raise DomainError(f"unknown model kind {kind!r}; valid: pdn, ann, tnn")


def compare(dataset, test, kinds, config: TrainConfig, scaler, seeker=SeekerConfig(),
            threshold_mm=2.0, train_eval_count=100, **tandem):
    """Train each model on ``dataset`` and score it on ``test``.

    One model failing is recorded in its row and does not stop the others.
    """
    x = dataset.spectra
    y = scaler.to_design(dataset.radii)
    pick = np.random.default_rng([config.seed, 11]).permutation(len(dataset))[:train_eval_count]
    report = Report(metadata={
        "dataset_fingerprint": dataset.fingerprint(),
        "test_fingerprint": test.fingerprint(),
        "seed": config.seed,
        "config": repr(config),
        "tandem": repr(tandem),
        "seeker": repr(seeker),
        "variety_threshold_mm": threshold_mm,
        "hardware": f"{platform.machine()} {platform.processor() or 'cpu'} x{os.cpu_count()}",
        "python": platform.python_version(),
    })
    for kind in kinds:
        start = time.perf_counter()
        try:
            model, _ = train_kind(kind, x, y, config, scaler, **tandem)
        except PdnError as exc:
            log.warning("%s training failed: %s", kind, exc)
            report.rows.append(ReportRow(kind, status=f"failed: {exc}"))
            continue
        elapsed = time.perf_counter() - start
        report.rows.append(evaluate(model, x[pick], test.spectra, dataset.geometry,
                                    dataset.medium, dataset.grid, seeker, threshold_mm,
                                    elapsed))
    return report


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def emit_report(report: Report, path):
    buf = io.StringIO()
    for key in sorted(report.metadata):
        buf.write(f"# {key} = {report.metadata[key]}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for row in report.rows:
        writer.writerow([_fmt(getattr(row, c)) for c in REPORT_COLUMNS])
    Path(path).write_text(buf.getvalue())


def read_report(path) -> Report:
    metadata, lines = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(" = ")
            metadata[key] = value
        elif line:
            lines.append(line)
    rows = list(csv.reader(lines))
    if not rows or rows[0] != REPORT_COLUMNS:
        raise FormatError(f"{path}: unexpected report header {rows[:1]}")
    out = []
    for raw in rows[1:]:
        out.append(ReportRow(raw[0], float(raw[1]), float(raw[2]), float(raw[3]),
                             float(raw[4]), int(raw[5]), raw[6]))
    return Report(out, metadata)
