"""Binary model checkpoint ("HARM" format).

Layout, all little-endian:
  magic "HARM", version u32 (=1),
  u32 JSON length + UTF-8 JSON blob (network config, discretizer, label names),
  u32 parameter count, then per parameter:
    u16 name length + UTF-8 name, u8 frozen flag, u8 rank, rank x u32 dims,
    float32 values in row-major order.

Values are stored as float32; the in-memory engine is float64.
"""

import io
import json
import struct

import numpy as np

from .errors import FormatError
from .model import NetworkConfig, TrainedModel
from .signal import ActivityLabel, DiscretizerSpec
from .tensor import Parameter, Tensor

MAGIC = b"HARM"
VERSION = 1


def _config_blob(model: TrainedModel) -> bytes:
    doc = {
        "network": model.config.to_dict(),
        "discretizer": None if model.discretizer is None else {
            "bins": model.discretizer.bins,
            "ranges": [[float(lo), float(hi)] for lo, hi in model.discretizer.ranges],
        },
        "labels": [lab.name for lab in model.labels],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def model_to_bytes(model: TrainedModel) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    blob = _config_blob(model)
    buf.write(struct.pack("<I", len(blob)))
    buf.write(blob)
    buf.write(struct.pack("<I", len(model.params)))
    for p in model.params:
        name = p.name.encode("utf-8")
        buf.write(struct.pack("<H", len(name)))
        buf.write(name)
        buf.write(struct.pack("<BB", 1 if p.frozen else 0, p.tensor.data.ndim))
        buf.write(struct.pack(f"<{p.tensor.data.ndim}I", *p.tensor.shape))
        buf.write(p.tensor.data.astype("<f4").tobytes())
    return buf.getvalue()


def save_model(model: TrainedModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(model_to_bytes(model))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError("checkpoint truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def model_from_bytes(data: bytes) -> TrainedModel:
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise FormatError("bad magic bytes: not a HARM checkpoint")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    (blob_len,) = r.unpack("<I")
    try:
        doc = json.loads(r.take(blob_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable checkpoint config blob: {exc}") from exc
    config = NetworkConfig.from_dict(doc["network"])
    disc = None
    if doc.get("discretizer") is not None:
        d = doc["discretizer"]
        disc = DiscretizerSpec(bins=d["bins"], ranges=np.asarray(d["ranges"], dtype=np.float64))
    labels = [ActivityLabel(i, name) for i, name in enumerate(doc.get("labels", []))]
    (n_params,) = r.unpack("<I")
    params = []
    for _ in range(n_params):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        frozen, rank = r.unpack("<BB")
        dims = r.unpack(f"<{rank}I")
        count = int(np.prod(dims))
        values = np.frombuffer(r.take(4 * count), dtype="<f4").astype(np.float64)
        params.append(Parameter(name, Tensor(values.reshape(dims)), frozen=bool(frozen)))
    if r.pos != len(data):
        raise FormatError("trailing bytes after checkpoint payload")
    model = TrainedModel(config=config, params=params, discretizer=disc, labels=labels)
    _validate_shapes(model)
    return model


def load_model(path) -> TrainedModel:
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())


def _validate_shapes(model: TrainedModel) -> None:
    cfg = model.config
    cfg.validate()
    expect = {"embedding": (cfg.bins, cfg.embed_dim)}
    c_in = cfg.channels * cfg.embed_dim
    for i, b in enumerate(cfg.blocks):
        expect[f"conv{i + 1}.kernels"] = (b.filters, c_in, b.kernel)
        expect[f"conv{i + 1}.bias"] = (b.filters,)
        c_in = b.filters
    expect["classifier.W"] = (cfg.classes, cfg.flat_dim())
    expect["classifier.b"] = (cfg.classes,)
    seen = {p.name: p.tensor.shape for p in model.params}
    if seen != expect:
        raise FormatError("checkpoint parameters do not match its network config")
