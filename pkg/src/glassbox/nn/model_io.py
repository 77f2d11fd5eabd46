"""Binary model checkpoints and activation dumps.

Both use the shared container framing (magic, JSON manifest, payload, CRC32).
Tensor payloads are little-endian float32, concatenated in manifest order, so
a checkpoint round-trips bit-exact and external tools can slice the payload
with nothing but the manifest.
"""

import numpy as np

from ..container import read_container, write_container
from ..errors import FormatError
from .model import LayerSpec, Model

MODEL_MAGIC = "GBOXMDL1"
TRACE_MAGIC = "GBOXACT1"


def _tensor_entries(names, arrays):
    entries = []
    offset = 0
    for name, arr in zip(names, arrays):
        nbytes = arr.size * 4
        entries.append({
            "name": name,
            "shape": list(arr.shape),
            "offset": offset,
            "nbytes": nbytes,
        })
        offset += nbytes
    return entries, offset


def _pack(arrays):
    return b"".join(np.ascontiguousarray(a, dtype="<f4").tobytes() for a in arrays)


def _unpack(payload, entry):
    start, nbytes = entry["offset"], entry["nbytes"]
    shape = tuple(entry["shape"])
    want = int(np.prod(shape)) * 4 if shape else 4
    if nbytes != want:
        raise FormatError(
            f"tensor {entry['name']!r}: {nbytes} bytes but shape {shape} needs {want}"
        )
    if start + nbytes > len(payload):
        raise FormatError(
            f"tensor {entry['name']!r} extends past end of payload"
        )
    flat = np.frombuffer(payload, dtype="<f4", count=want // 4, offset=start)
    return flat.reshape(shape).astype(np.float32)


def save_model(path, model, extra_manifest=None):
    names = sorted(model.weights)
    arrays = [model.weights[n] for n in names]
    tensors, total = _tensor_entries(names, arrays)
    manifest = {
        "format": "model",
        "version": 1,
        "layers": [spec.to_dict() for spec in model.layers],
        "input_shape": list(model.input_shape),
        "num_classes": model.num_classes,
        "feature_dim": model.feature_dim,
        "tensors": tensors,
        "payload_bytes": total,
    }
    if extra_manifest:
        manifest.update(extra_manifest)
    write_container(path, MODEL_MAGIC, manifest, _pack(arrays))


def load_model(path):
    manifest, payload = read_container(path, MODEL_MAGIC)
    if manifest.get("format") != "model":
        raise FormatError(f"not a model file: format={manifest.get('format')!r}")
    weights = {}
    for entry in manifest["tensors"]:
        weights[entry["name"]] = _unpack(payload, entry)
    return Model(
        layers=tuple(LayerSpec.from_dict(d) for d in manifest["layers"]),
        weights=weights,
        num_classes=int(manifest["num_classes"]),
        feature_dim=int(manifest["feature_dim"]),
        input_shape=tuple(manifest["input_shape"]),
    )


def save_traces(path, records, extra_manifest=None):
    """records: iterable of (sample_id, conv_final, softmax)."""
    names, arrays, index = [], [], []
    for sample_id, conv_final, probs in records:
        names.append(f"{sample_id}.conv_final")
        arrays.append(np.asarray(conv_final, dtype=np.float32))
        names.append(f"{sample_id}.softmax")
        arrays.append(np.asarray(probs, dtype=np.float32))
        index.append(str(sample_id))
    tensors, total = _tensor_entries(names, arrays)
    manifest = {
        "format": "traces",
        "version": 1,
        "samples": index,
        "tensors": tensors,
        "payload_bytes": total,
    }
    if extra_manifest:
        manifest.update(extra_manifest)
    write_container(path, TRACE_MAGIC, manifest, _pack(arrays))


def load_traces(path):
    """Returns {sample_id: {"conv_final": arr, "softmax": arr}}."""
    manifest, payload = read_container(path, TRACE_MAGIC)
    if manifest.get("format") != "traces":
        raise FormatError(f"not a trace file: format={manifest.get('format')!r}")
    by_name = {e["name"]: _unpack(payload, e) for e in manifest["tensors"]}
    out = {}
    for sample_id in manifest["samples"]:
        out[sample_id] = {
            "conv_final": by_name[f"{sample_id}.conv_final"],
            "softmax": by_name[f"{sample_id}.softmax"],
        }
    return out
