"""Back-projection of conv-final features to input pixels.

A feature's receptive field on a sample is computed in four steps: binarize
the target map elementwise against gamma times the feature's mean, zero all
other maps, run the network in reverse (unpooling through the stored argmax
offsets, transposed convolution with the forward kernels, relu reversed as
forward-activation masking), then threshold the resulting magnitude map and
dilate with a small disk.

The reverse pass is linear once the trace fixes all routing, which is what
lets a finite-difference probe of the forward network act as an independent
oracle: any pixel that measurably moves the masked feature sum must appear
in the back-projection's support.
"""

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import TraceError
from .nn import layers as L
from .nn.model import CONV, MAXPOOL, RELU, chain_shapes, forward, forward_batch


@dataclass(frozen=True)
class RFParams:
    tau: float = 0.1
    radius: int = 2

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must be in (0, 1)")
        if self.radius < 0:
            raise ValueError("radius must be >= 0")


@dataclass
class ReceptiveField:
    sample_id: str
    feature_id: int
    magnitude_map: np.ndarray   # (H, W) float
    mask: np.ndarray            # (H, W) bool


def _conv_final_index(model):
    for i, spec in enumerate(model.layers):
        if spec.conv_final:
            return i
    raise TraceError("model has no conv_final layer")


def build_masked_feature(trace, feature_id, stats, gamma):
    """Target map binarized at gamma * mu_feature, every other map zeroed.

    A dead feature (mu = 0) yields an all-zero tensor: with no activation
    history there is nothing to call activated.
    """
    conv_final = trace.conv_final
    if not 0 <= feature_id < conv_final.shape[0]:
        raise ValueError(f"feature_id {feature_id} out of range")
    out = np.zeros_like(conv_final, dtype=np.float32)
    mu = float(stats.mu[feature_id])
    if mu > 0:
        out[feature_id] = (conv_final[feature_id] >= gamma * mu).astype(np.float32)
    return out


def backproject(model, trace, masked, reduce=True):
    """Reverse pass from the conv-final tensor back to input space.

    The pass itself is linear in `masked` once the trace has fixed the relu
    and pooling routing. With reduce the signed (C, H, W) field is collapsed
    to a per-pixel magnitude map (sum of absolute values across channels);
    reduce=False returns the raw field, which is what additivity statements
    are about.
    """
    fi = _conv_final_index(model)
    masked = np.asarray(masked, dtype=np.float32)
    if masked.shape != trace.conv_final.shape:
        raise TraceError(
            f"masked tensor shape {masked.shape} != conv_final {trace.conv_final.shape}"
        )
    in_shapes, _ = chain_shapes(model.layers, model.input_shape)
    d = masked[None]
    for idx in range(fi, -1, -1):
        spec = model.layers[idx]
        in_shape = in_shapes[idx]
        if spec.kind == RELU:
            if idx == 0 or model.layers[idx - 1].name not in trace.activations:
                raise TraceError(f"layer {spec.name}: no pre-activation in trace")
            pre = trace.activations[model.layers[idx - 1].name][None]
            if pre.shape != d.shape:
                raise TraceError(
                    f"layer {spec.name}: trace activation shape {pre.shape[1:]} "
                    f"does not fit the reverse pass shape {d.shape[1:]}"
                )
            d = L.relu_backward(d, pre)
        elif spec.kind == MAXPOOL:
            if spec.name not in trace.pool_argmax:
                raise TraceError(f"layer {spec.name}: no pool indices in trace")
            arg = trace.pool_argmax[spec.name][None]
            d = L.maxpool_backward(d, arg, (1,) + in_shape)
        elif spec.kind == CONV:
            d = L.conv_input_grad(
                d, model.weights[spec.name + ".w"], (1,) + in_shape,
                spec.stride, spec.padding,
            )
        else:
            raise TraceError(f"cannot reverse layer kind {spec.kind!r}")
    if not reduce:
        return d[0]
    return np.abs(d[0]).sum(axis=0)


def disk_offsets(radius):
    """Integer offsets of the Euclidean disk di^2 + dj^2 <= radius^2."""
    r = int(radius)
    return [
        (di, dj)
        for di in range(-r, r + 1)
        for dj in range(-r, r + 1)
        if di * di + dj * dj <= r * r
    ]


def postprocess(magnitude_map, params):
    """Threshold at tau * max, then dilate by a disk. All-zero map -> empty mask."""
    m = np.asarray(magnitude_map, dtype=np.float64)
    peak = m.max() if m.size else 0.0
    if peak <= 0:
        return np.zeros(m.shape, dtype=bool)
    base = m >= params.tau * peak
    if params.radius == 0:
        return base
    H, W = base.shape
    out = np.zeros_like(base)
    for di, dj in disk_offsets(params.radius):
        src_r = slice(max(0, -di), min(H, H - di))
        dst_r = slice(max(0, di), min(H, H + di))
        src_c = slice(max(0, -dj), min(W, W - dj))
        dst_c = slice(max(0, dj), min(W, W + dj))
        out[dst_r, dst_c] |= base[src_r, src_c]
    return out


def compute_receptive_field(model, trace, feature_id, stats, gamma, params,
                            sample_id=""):
    masked = build_masked_feature(trace, feature_id, stats, gamma)
    magnitude = backproject(model, trace, masked)
    return ReceptiveField(
        sample_id=sample_id,
        feature_id=int(feature_id),
        magnitude_map=magnitude,
        mask=postprocess(magnitude, params),
    )


def _grow_box(spec, box):
    r0, r1, c0, c1 = box
    if spec.kind == CONV:
        return (
            r0 * spec.stride - spec.padding,
            r1 * spec.stride - spec.padding + spec.kernel - 1,
            c0 * spec.stride - spec.padding,
            c1 * spec.stride - spec.padding + spec.kernel - 1,
        )
    if spec.kind == MAXPOOL:
        return (
            r0 * spec.stride,
            r1 * spec.stride + spec.window - 1,
            c0 * spec.stride,
            c1 * spec.stride + spec.window - 1,
        )
    return box


def input_support_boxes(model, positions):
    """Input-space bounding box of each conv-final position's dependence cone.

    Pixels outside every box have exactly zero influence on the masked sum,
    by convolution geometry alone, so probing can safely skip them.
    """
    fi = _conv_final_index(model)
    _, H, W = model.input_shape
    boxes = []
    for r, c in positions:
        box = (int(r), int(r), int(c), int(c))
        for idx in range(fi, -1, -1):
            box = _grow_box(model.layers[idx], box)
        boxes.append((
            max(0, box[0]), min(H - 1, box[1]),
            max(0, box[2]), min(W - 1, box[3]),
        ))
    return boxes


def influence_oracle(model, image, feature_id, stats, gamma,
                     epsilon=1e-3, threshold=1e-4, batch_size=512):
    """Pixels whose +-epsilon perturbation moves the masked feature sum.

    The element set is frozen from the unperturbed trace; the probe measures
    |s(x + eps) - s(x - eps)| of s = sum of the target map over that set.
    Returns a set of (row, col) pairs.
    """
    trace = forward(model, image)
    masked = build_masked_feature(trace, feature_id, stats, gamma)
    sel = masked[feature_id] > 0
    if not sel.any():
        return set()
    positions = np.argwhere(sel)
    candidates = sorted({
        (r, c)
        for r0, r1, c0, c1 in input_support_boxes(model, positions)
        for r in range(r0, r1 + 1)
        for c in range(c0, c1 + 1)
    })
    x = np.asarray(image, dtype=np.float32).reshape(model.input_shape)
    num_ch = x.shape[0]
    probes = [(ch, r, c) for r, c in candidates for ch in range(num_ch)]

    flagged = set()
    pairs_per_batch = max(1, batch_size // 2)
    for start in range(0, len(probes), pairs_per_batch):
        chunk = probes[start:start + pairs_per_batch]
        batch = np.repeat(x[None], 2 * len(chunk), axis=0)
        for i, (ch, r, c) in enumerate(chunk):
            batch[2 * i, ch, r, c] += epsilon
            batch[2 * i + 1, ch, r, c] -= epsilon
        out = forward_batch(model, batch, upto_conv_final=True)["conv_final"]
        s = out[:, feature_id][:, sel].sum(axis=1).astype(np.float64)
        for i, (ch, r, c) in enumerate(chunk):
            if abs(s[2 * i] - s[2 * i + 1]) > threshold:
                flagged.add((r, c))
    return flagged


def overlay_png_bytes(image, mask, color=(1.0, 0.25, 0.25), alpha=0.45):
    """Sample image with the mask highlighted as a semi-transparent tint."""
    import io

    img = np.asarray(image, dtype=np.float64).copy()
    tint = np.asarray(color, dtype=np.float64)[:, None]
    m = np.asarray(mask, dtype=bool)
    img[:, m] = (1 - alpha) * img[:, m] + alpha * tint
    arr = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr.transpose(1, 2, 0), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def overlay_filename(sample_id, feature_id):
    return f"rf_{sample_id}_{feature_id}.png"
