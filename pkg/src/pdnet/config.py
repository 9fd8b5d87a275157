"""Flat ``section.key = value`` run configuration.

Precedence is command-line flags > config file > built-in defaults. Every
key has a default; unknown keys are rejected. :meth:`RunConfig.dump`
writes the effective configuration with all defaults materialized.
"""

from pathlib import Path

from .errors import UsageError
from .mixture import DesignScaler
from .modes import SeekerConfig
from .physics import Geometry, Medium, frequency_grid
from .training import TrainConfig

DEFAULTS = {
    "geometry.tube_radius": 0.0145,
    "geometry.layer_length": 0.020,
    "geometry.layer_count": 5,
    "geometry.radius_min": 0.0018125,
    "geometry.radius_max": 0.0145,
    "medium.sound_speed": 343.0,
    "medium.density": 1.21,
    "grid.start": 20.0,
    "grid.step": 20.0,
    "grid.count": 250,
    "data.max_pairs": 10_000_000,
    "model.kind": "pdn",
    "train.learning_rate": 1e-4,
    "train.batch_size": 256,
    "train.epochs": 1000,
    "train.weight_decay": 0.0,
    "train.seed": 0,
    "train.hidden": "400,800,1600,3200",
    "train.mixture_count": 50,
    "train.activation": "relu",
    "train.batch_norm": True,
    "train.isotropic": False,
    # 0 means "same as the train.* value"
    "tnn.forward_epochs": 0,
    "tnn.forward_learning_rate": 0.0,
    "tnn.forward_hidden": "",
    # negative means "same as train.weight_decay"
    "tnn.forward_weight_decay": -1.0,
    "tnn.gate": 0.05,
    "tnn.holdout": 0.1,
    "seeker.max_iterations": 500,
    "seeker.tolerance": 1e-8,
    "seeker.merge_radius": 0.02,
    "seeker.density_floor": 1e-3,
    "seeker.max_modes": 16,
    "pca.fit_on": "mixture",
    "pca.samples": 10_000,
    "pca.seed": 0,
    "pca.resolution": 64,
    "target.peak_width_hz": 100.0,
    "compare.test_count": 200,
    "compare.test_seed": 1,
    "compare.train_eval_count": 100,
    "compare.variety_threshold_mm": 2.0,
    "figures.enabled": True,
    "figures.format": "png",
}

_CHOICES = {
    "model.kind": ("pdn", "ann", "tnn"),
    "train.activation": ("relu", "relu6", "linear"),
    "pca.fit_on": ("mixture", "labels"),
    "figures.format": ("png", "svg", "pdf"),
}


def _convert(key, raw):
    default = DEFAULTS[key]
    if isinstance(raw, str):
        raw = raw.strip()
    try:
        if isinstance(default, bool):
            if isinstance(raw, bool):
                value = raw
            elif str(raw).lower() in ("true", "1", "yes", "on"):
                value = True
            elif str(raw).lower() in ("false", "0", "no", "off"):
                value = False
            else:
                raise ValueError(f"expected a boolean, got {raw!r}")
        elif isinstance(default, int):
            value = int(raw)
        elif isinstance(default, float):
            value = float(raw)
        else:
            value = str(raw)
    except ValueError as exc:
        raise UsageError(f"config key {key}: {exc}") from exc
    if key in _CHOICES and value not in _CHOICES[key]:
        raise UsageError(f"config key {key}: {value!r} not in {_CHOICES[key]}")
    return value


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


class RunConfig:
    def __init__(self, values=None):
        self.values = dict(DEFAULTS)
        if values:
            self.update(values)

    def update(self, values, source="override"):
        for key, raw in values.items():
            if key not in DEFAULTS:
                raise UsageError(f"unknown config key {key!r} ({source})")
            self.values[key] = _convert(key, raw)
        return self

    def __getitem__(self, key):
        return self.values[key]

    @classmethod
    def load(cls, path=None, overrides=None):
        """Defaults, then the file at ``path``, then ``overrides``."""
        config = cls()
        if path is not None:
            config.update_from_text(Path(path).read_text(), str(path))
        if overrides:
            config.update(overrides)
        return config

    def update_from_text(self, text, source="<text>"):
        for number, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"{source}: line {number}: expected 'key = value'")
            self.update({key.strip(): value}, f"{source}: line {number}")
        return self

    def dump(self) -> str:
        return "".join(f"{key} = {_format(self.values[key])}\n" for key in sorted(self.values))

    def write_beside(self, artifact):
        """Write the effective config as ``<artifact>.config``."""
        Path(f"{artifact}.config").write_text(self.dump())

    def geometry(self):
        v = self.values
        return Geometry(v["geometry.tube_radius"], v["geometry.layer_length"],
                        v["geometry.layer_count"], v["geometry.radius_min"],
                        v["geometry.radius_max"])

    def medium(self):
        return Medium(self["medium.sound_speed"], self["medium.density"])

    def grid(self):
        return frequency_grid(self["grid.start"], self["grid.step"], self["grid.count"])

    def scaler(self):
        return DesignScaler.from_geometry(self.geometry())

    def train_config(self):
        v = self.values
        return TrainConfig(
            learning_rate=v["train.learning_rate"], batch_size=v["train.batch_size"],
            epochs=v["train.epochs"], weight_decay=v["train.weight_decay"], seed=v["train.seed"],
            hidden=parse_widths(v["train.hidden"]), mixture_count=v["train.mixture_count"],
            activation=v["train.activation"], batch_norm=v["train.batch_norm"],
            isotropic=v["train.isotropic"])

    def forward_config(self):
        """Stage-1 settings of the tandem network."""
        base = self.train_config()
        v = self.values
        if v["tnn.forward_epochs"]:
            base.epochs = v["tnn.forward_epochs"]
        if v["tnn.forward_learning_rate"]:
            base.learning_rate = v["tnn.forward_learning_rate"]
        if v["tnn.forward_hidden"]:
            base.hidden = parse_widths(v["tnn.forward_hidden"])
        if v["tnn.forward_weight_decay"] >= 0:
            base.weight_decay = v["tnn.forward_weight_decay"]
        return base

    def seeker_config(self):
        v = self.values
        return SeekerConfig(v["seeker.max_iterations"], v["seeker.tolerance"],
                            v["seeker.merge_radius"], v["seeker.density_floor"],
                            v["seeker.max_modes"])


def parse_widths(text):
    try:
        widths = tuple(int(w) for w in str(text).split(",") if w.strip())
    except ValueError as exc:
        raise UsageError(f"bad width list {text!r}") from exc
    if not widths or min(widths) < 1:
        raise UsageError(f"bad width list {text!r}")
    return widths


def parse_assignments(items):
    """``["a.b=1", ...]`` from repeated ``--set`` flags into a dict."""
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = value
    return out
