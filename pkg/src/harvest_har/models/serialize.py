"""Versioned on-disk format for fitted models.

Layout: a magic/version line, one JSON line describing the model kind,
its configuration and the ordered parameter list (name and shape), then the
parameters as raw little-endian float64 in that order.
"""
from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .ensemble import EnsembleParams
from .gnb import GnbParams
from .rcnn import RcnnConfig, RcnnParams

MAGIC = b"HARVEST-HAR-MODEL"
VERSION = 1


class ModelFormatError(ValueError):
    pass


def _ensemble_arrays(p: EnsembleParams) -> dict[str, np.ndarray]:
    out = {"gnb_priors": p.gnb.priors, "gnb_means": p.gnb.means, "gnb_variances": p.gnb.variances}
    out.update({f"mlp_{k}": v for k, v in p.mlp.items()})
    out["feature_mean"] = p.feature_mean
    out["feature_std"] = p.feature_std
    return out


def dumps(params) -> bytes:
    if isinstance(params, RcnnParams):
        meta = {"kind": "rcnn", "config": asdict(params.config)}
        arrays = dict(params.weights, input_mean=params.input_mean, input_std=params.input_std)
    elif isinstance(params, EnsembleParams):
        meta = {"kind": "ensemble",
                "config": {"weight_nb": params.weight_nb, "weight_mlp": params.weight_mlp}}
        arrays = _ensemble_arrays(params)
    else:
        raise TypeError(f"cannot serialize {type(params).__name__}")
    meta["params"] = [[k, list(np.shape(v))] for k, v in arrays.items()]
    head = MAGIC + b" %d\n" % VERSION + json.dumps(meta, sort_keys=True).encode() + b"\n"
    body = b"".join(np.ascontiguousarray(v, dtype="<f8").tobytes() for v in arrays.values())
    return head + body


def loads(blob: bytes):
    try:
        magic_line, rest = blob.split(b"\n", 1)
        meta_line, body = rest.split(b"\n", 1)
        magic, version = magic_line.split(b" ")
        meta = json.loads(meta_line)
    except ValueError as exc:
        raise ModelFormatError(f"not a model file: {exc}") from None
    if magic != MAGIC:
        raise ModelFormatError("bad magic header")
    if int(version) != VERSION:
        raise ModelFormatError(f"unsupported model format version {int(version)}")
    arrays, pos = {}, 0
    for name, shape in meta["params"]:
        size = int(np.prod(shape, dtype=np.int64)) * 8
        if pos + size > len(body):
            raise ModelFormatError(f"truncated data for parameter {name!r}")
        arrays[name] = np.frombuffer(body, dtype="<f8", count=size // 8, offset=pos).reshape(shape).copy()
        pos += size
    if pos != len(body):
        raise ModelFormatError("trailing bytes after the last parameter")
    if meta["kind"] == "rcnn":
        mean, std = arrays.pop("input_mean"), arrays.pop("input_std")
        return RcnnParams(RcnnConfig(**meta["config"]), arrays, mean, std)
    if meta["kind"] == "ensemble":
        gnb = GnbParams(arrays["gnb_priors"], arrays["gnb_means"], arrays["gnb_variances"])
        mlp = {k[4:]: v for k, v in arrays.items() if k.startswith("mlp_")}
        return EnsembleParams(gnb, mlp, arrays["feature_mean"], arrays["feature_std"],
                              meta["config"]["weight_nb"], meta["config"]["weight_mlp"])
    raise ModelFormatError(f"unknown model kind {meta['kind']!r}")


def save_model(params, path) -> None:
    Path(path).write_bytes(dumps(params))


def load_model(path):
    return loads(Path(path).read_bytes())


def model_kind(params) -> str:
    if isinstance(params, RcnnParams):
        return "rcnn"
    if isinstance(params, EnsembleParams):
        return "ensemble"
    raise TypeError(f"unknown model type {type(params).__name__}")
