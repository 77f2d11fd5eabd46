"""Dataset container and PNG export.

The container packs each split as one float32 image block plus one uint8
mask block; the manifest records per-sample labels, distractors, and the
attribute order of each sample's masks, so slicing the blocks back into
samples needs no guesswork.
"""

import os

import numpy as np
from PIL import Image

from ..container import read_container, write_container
from ..errors import FormatError
from .synth import IMAGE_SIZE, ClassDef, DatasetSpec, SynthSample

DATASET_MAGIC = "GBOXDS01"


def _split_blocks(samples):
    images = (
        np.stack([s.image for s in samples]).astype("<f4")
        if samples else np.zeros((0, 3, IMAGE_SIZE, IMAGE_SIZE), dtype="<f4")
    )
    masks = []
    entries = []
    for s in samples:
        attr_ids = sorted(s.attribute_masks)
        for a in attr_ids:
            masks.append(s.attribute_masks[a].astype(np.uint8))
        entries.append({
            "id": s.sample_id,
            "label": s.label,
            "distractor": s.distractor_id,
            "attributes": attr_ids,
        })
    mask_block = (
        np.stack(masks).astype(np.uint8)
        if masks else np.zeros((0, IMAGE_SIZE, IMAGE_SIZE), dtype=np.uint8)
    )
    return images, mask_block, entries


def save_dataset(path, spec, train, test, classes, extra_manifest=None):
    blocks = []
    payload = b""
    manifest_splits = []
    for name, samples in (("train", train), ("test", test)):
        images, mask_block, entries = _split_blocks(samples)
        for block_name, arr, dtype in (
            (f"{name}.images", images, "<f4"),
            (f"{name}.masks", mask_block, "u1"),
        ):
            raw = arr.tobytes()
            blocks.append({
                "name": block_name,
                "dtype": dtype,
                "shape": list(arr.shape),
                "offset": len(payload),
                "nbytes": len(raw),
            })
            payload += raw
        manifest_splits.append({"name": name, "samples": entries})
    manifest = {
        "format": "dataset",
        "version": 1,
        "spec": spec.to_dict(),
        "classes": [
            {"class_id": c.class_id, "name": c.name,
             "attributes": sorted(c.attributes)}
            for c in classes
        ],
        "splits": manifest_splits,
        "blocks": blocks,
    }
    if extra_manifest:
        manifest.update(extra_manifest)
    write_container(path, DATASET_MAGIC, manifest, payload)


def _read_block(payload, entry):
    dtype = np.dtype(entry["dtype"])
    shape = tuple(entry["shape"])
    want = int(np.prod(shape)) * dtype.itemsize
    if entry["nbytes"] != want:
        raise FormatError(
            f"block {entry['name']!r}: {entry['nbytes']} bytes but "
            f"shape {shape} needs {want}"
        )
    start = entry["offset"]
    if start + want > len(payload):
        raise FormatError(f"block {entry['name']!r} extends past end of payload")
    return np.frombuffer(payload, dtype=dtype, count=want // dtype.itemsize,
                         offset=start).reshape(shape)


def load_dataset(path):
    """Returns (spec, train samples, test samples, class definitions)."""
    manifest, payload = read_container(path, DATASET_MAGIC)
    if manifest.get("format") != "dataset":
        raise FormatError(f"not a dataset file: format={manifest.get('format')!r}")
    spec = DatasetSpec.from_dict(manifest["spec"])
    classes = [
        ClassDef(class_id=c["class_id"], name=c["name"],
                 attributes=frozenset(c["attributes"]))
        for c in manifest["classes"]
    ]
    by_name = {b["name"]: _read_block(payload, b) for b in manifest["blocks"]}
    splits = {}
    for sp in manifest["splits"]:
        images = by_name[f"{sp['name']}.images"]
        mask_block = by_name[f"{sp['name']}.masks"]
        samples = []
        cursor = 0
        for i, entry in enumerate(sp["samples"]):
            masks = {}
            for a in entry["attributes"]:
                masks[a] = mask_block[cursor].astype(bool)
                cursor += 1
            samples.append(SynthSample(
                sample_id=entry["id"],
                image=images[i].astype(np.float32),
                label=int(entry["label"]),
                attribute_masks=masks,
                distractor_id=entry["distractor"],
            ))
        if cursor != mask_block.shape[0]:
            raise FormatError(
                f"split {sp['name']!r}: mask block has {mask_block.shape[0]} "
                f"masks but samples reference {cursor}"
            )
        splits[sp["name"]] = samples
    return spec, splits.get("train", []), splits.get("test", []), classes


def to_png_bytes(image):
    """(3, H, W) float in [0,1] -> PNG bytes."""
    import io

    arr = np.clip(np.rint(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr.transpose(1, 2, 0), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def export_pngs(samples, out_dir):
    """Writes {sample_id}.png per sample; returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for s in samples:
        p = os.path.join(out_dir, f"{s.sample_id}.png")
        with open(p, "wb") as fh:
            fh.write(to_png_bytes(s.image))
        paths.append(p)
    return paths
