"""Trained model containers and their ``.pdnw`` persistence."""

from dataclasses import dataclass, field

import numpy as np

from . import mixture, store
from .errors import DomainError, FormatError
from .mixture import DesignScaler, HeadWeights, MixtureParams
from .net import NetworkWeights, forward, network_from_record, network_record

KINDS = ("pdn", "ann", "tnn")
_INFER_CHUNK = 4096


def infer(net: NetworkWeights, x):
    """Inference-mode forward pass in fixed-size chunks."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    parts = [forward(net, x[i:i + _INFER_CHUNK], "infer")[0]
             for i in range(0, x.shape[0], _INFER_CHUNK)]
    return np.vstack(parts)


@dataclass
class PDNModel:
    trunk: NetworkWeights
    head: HeadWeights
    scaler: DesignScaler
    context: dict = field(default_factory=dict)
    kind: str = "pdn"

    @property
    def input_dim(self):
        return self.trunk.input_dim

    def mixtures(self, x) -> MixtureParams:
        """Batched mixture parameters for inputs x (n, input_dim)."""
        return mixture.parameterize(infer(self.trunk, x), self.head)

    def networks(self):
        return {"trunk": self.trunk}


@dataclass
class RegressorModel:
    """Single-output network; the ANN baseline and the tandem forward net."""

    net: NetworkWeights
    scaler: DesignScaler = None
    context: dict = field(default_factory=dict)
    kind: str = "ann"

    @property
    def input_dim(self):
        return self.net.input_dim

    def predict(self, x):
        return infer(self.net, x)

    def networks(self):
        return {"net": self.net}


@dataclass
class TandemModel:
    inverse: NetworkWeights
    forward: NetworkWeights
    scaler: DesignScaler
    context: dict = field(default_factory=dict)
    kind: str = "tnn"

    @property
    def input_dim(self):
        return self.inverse.input_dim

    def predict(self, x):
        return infer(self.inverse, x)

    def networks(self):
        return {"forward": self.forward, "inverse": self.inverse}


def save_model(model, path):
    header = {"kind": model.kind, "networks": {}, "context": model.context}
    arrays = []
    for name, net in sorted(model.networks().items()):
        specs, net_arrays = network_record(net)
        header["networks"][name] = specs
        arrays += net_arrays
    if model.scaler is not None:
        header["scaler"] = {"low": list(model.scaler.low), "high": list(model.scaler.high)}
    if isinstance(model, PDNModel):
        h = model.head
        header["head"] = {"m": h.m, "d": h.d, "isotropic": h.isotropic}
        arrays += h.parameters()
    store.write(path, header, arrays)


def load_model(path):
    header, arrays = store.read(path)
    try:
        kind = header["kind"]
        if kind not in KINDS:
            raise FormatError(f"unknown model kind {kind!r}")
        nets = {}
        for name, specs in sorted(header["networks"].items()):
            count = sum(6 if s["batch_norm"] else 2 for s in specs)
            nets[name] = network_from_record(specs, arrays[:count])
            arrays = arrays[count:]
        scaler = None
        if "scaler" in header:
            scaler = DesignScaler(tuple(header["scaler"]["low"]), tuple(header["scaler"]["high"]))
        context = header.get("context", {})
        if kind == "pdn":
            h = header["head"]
            if len(arrays) != 6:
                raise FormatError("head parameter count mismatch")
            head = HeadWeights(*arrays, int(h["m"]), int(h["d"]), bool(h["isotropic"]))
            return PDNModel(nets["trunk"], head, scaler, context)
        if arrays:
            raise FormatError("unexpected trailing arrays")
        if kind == "ann":
            return RegressorModel(nets["net"], scaler, context, "ann")
        return TandemModel(nets["inverse"], nets["forward"], scaler, context)
    except (KeyError, TypeError, DomainError) as exc:
        raise FormatError(f"inconsistent weights file: {exc}") from exc
