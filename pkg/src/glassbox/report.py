"""Static HTML/SVG report over the persisted artifacts.

Every figure is generated as a standalone SVG file with fixed-precision
coordinates and no timestamps, so rebuilding the report from the same
artifacts is byte-identical. Sections whose artifacts are missing render an
explicit "no data" panel instead of failing.
"""

import html
import json
import os

import numpy as np

from . import pipeline as P
from .analysis import activation_histogram
from .annotation import load_store
from .config import read_json_artifact
from .consistency import load_records_jsonl
from .nn.model_io import load_traces

CHART_W, CHART_H = 420, 300
MARGIN = 48

FREQUENT_COLOR = "#c0392b"
RANDOM_COLOR = "#2980b9"
BAR_COLOR = "#7f8c8d"


def _fmt(v):
    return f"{v:.2f}".rstrip("0").rstrip(".") if v == round(v, 2) else f"{v:.4f}"


def _px(v):
    return f"{v:.2f}"


def _svg_open(title):
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{CHART_W}" '
        f'height="{CHART_H}" viewBox="0 0 {CHART_W} {CHART_H}" '
        f'font-family="sans-serif" font-size="11">\n'
        f'<rect width="{CHART_W}" height="{CHART_H}" fill="white"/>\n'
        f'<text x="{CHART_W / 2:.0f}" y="16" text-anchor="middle" '
        f'font-size="13">{html.escape(title)}</text>\n'
    )


def _axes(x_label, y_label, x_ticks, y_ticks):
    """Axis lines plus tick labels; tick positions in data fractions 0..1."""
    x0, y0 = MARGIN, CHART_H - MARGIN
    x1, y1 = CHART_W - 16, 28
    parts = [
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{(x0 + x1) / 2:.0f}" y="{CHART_H - 8}" '
        f'text-anchor="middle">{html.escape(x_label)}</text>',
        f'<text x="12" y="{(y0 + y1) / 2:.0f}" text-anchor="middle" '
        f'transform="rotate(-90 12 {(y0 + y1) / 2:.0f})">'
        f'{html.escape(y_label)}</text>',
    ]
    for frac, label in x_ticks:
        x = x0 + frac * (x1 - x0)
        parts.append(f'<line x1="{_px(x)}" y1="{y0}" x2="{_px(x)}" '
                     f'y2="{y0 + 4}" stroke="black"/>')
        parts.append(f'<text x="{_px(x)}" y="{y0 + 16}" '
                     f'text-anchor="middle">{html.escape(label)}</text>')
    for frac, label in y_ticks:
        y = y0 - frac * (y0 - y1)
        parts.append(f'<line x1="{x0 - 4}" y1="{_px(y)}" x2="{x0}" '
                     f'y2="{_px(y)}" stroke="black"/>')
        parts.append(f'<text x="{x0 - 7}" y="{_px(y + 4)}" '
                     f'text-anchor="end">{html.escape(label)}</text>')
    return "\n".join(parts) + "\n"


def _polyline(values, y_max, color, n_points):
    x0, y0 = MARGIN, CHART_H - MARGIN
    x1, y1 = CHART_W - 16, 28
    pts = []
    for i, v in enumerate(values):
        x = x0 + (i / max(1, n_points - 1)) * (x1 - x0)
        y = y0 - (v / y_max) * (y0 - y1)
        pts.append(f"{_px(x)},{_px(y)}")
    return (f'<polyline fill="none" stroke="{color}" stroke-width="2" '
            f'points="{" ".join(pts)}"/>\n')


def svg_ablation_chart(class_name, frequent, random):
    n = len(frequent)
    svg = _svg_open(f"Deletion vs accuracy: {class_name}")
    x_ticks = [(i / max(1, n - 1), str(i)) for i in range(0, n, max(1, (n - 1) // 5 or 1))]
    y_ticks = [(v, _fmt(v)) for v in (0.0, 0.25, 0.5, 0.75, 1.0)]
    svg += _axes("feature maps deleted", "class accuracy", x_ticks, y_ticks)
    svg += _polyline(random, 1.0, RANDOM_COLOR, n)
    svg += _polyline(frequent, 1.0, FREQUENT_COLOR, n)
    legend_y = 36
    svg += (
        f'<rect x="{CHART_W - 150}" y="{legend_y - 9}" width="10" height="3" '
        f'fill="{FREQUENT_COLOR}"/>'
        f'<text x="{CHART_W - 136}" y="{legend_y - 4}">frequent maps</text>'
        f'<rect x="{CHART_W - 150}" y="{legend_y + 7}" width="10" height="3" '
        f'fill="{RANDOM_COLOR}"/>'
        f'<text x="{CHART_W - 136}" y="{legend_y + 12}">random maps</text>\n'
    )
    return svg + "</svg>\n"


def svg_histogram_chart(title, counts, edges):
    total = int(np.sum(counts))
    peak = max(1, int(np.max(counts))) if len(counts) else 1
    svg = _svg_open(title)
    x_ticks = [(0.0, _fmt(float(edges[0]))), (1.0, _fmt(float(edges[-1])))]
    y_ticks = [(0.0, "0"), (1.0, str(peak))]
    svg += _axes("pooled activation z", f"samples (n={total})", x_ticks, y_ticks)
    x0, y0 = MARGIN, CHART_H - MARGIN
    x1, y1 = CHART_W - 16, 28
    n = len(counts)
    for i, c in enumerate(counts):
        bx = x0 + (i / n) * (x1 - x0)
        bw = (x1 - x0) / n
        bh = (int(c) / peak) * (y0 - y1)
        svg += (f'<rect x="{_px(bx + 1)}" y="{_px(y0 - bh)}" '
                f'width="{_px(max(0.5, bw - 2))}" height="{_px(bh)}" '
                f'fill="{BAR_COLOR}"/>\n')
    return svg + "</svg>\n"


def svg_joint_heatmap(dist):
    B = dist.bins.shape[0]
    probs = dist.normalized()
    svg = _svg_open(
        f"PCR vs LCR, {dist.population} predictions (n={dist.total})"
    )
    ticks = [(j / B, _fmt(j / B)) for j in range(B + 1)]
    svg += _axes("LCR bin", "PCR bin", ticks, ticks)
    x0, y0 = MARGIN, CHART_H - MARGIN
    x1, y1 = CHART_W - 16, 28
    cw, ch = (x1 - x0) / B, (y0 - y1) / B
    for i in range(B):        # pcr bin -> vertical
        for j in range(B):    # lcr bin -> horizontal
            p = float(probs[i, j])
            # darker cell = more mass
            shade = int(round(255 - 205 * p))
            color = f"rgb({shade},{shade},255)" if dist.total else "rgb(255,255,255)"
            x = x0 + j * cw
            y = y0 - (i + 1) * ch
            svg += (f'<rect x="{_px(x)}" y="{_px(y)}" width="{_px(cw)}" '
                    f'height="{_px(ch)}" fill="{color}" stroke="#ddd"/>\n')
            if dist.bins[i, j]:
                svg += (f'<text x="{_px(x + cw / 2)}" y="{_px(y + ch / 2 + 4)}" '
                        f'text-anchor="middle">{int(dist.bins[i, j])}</text>\n')
    return svg + "</svg>\n"


def _panel(title, body):
    return (f'<section class="panel"><h2>{html.escape(title)}</h2>\n'
            f'{body}</section>\n')


def _missing(title, producer):
    return (
        f'<section class="panel missing"><h2>{html.escape(title)}</h2>'
        f'<p>No data: run <code>glassbox {html.escape(producer)}</code> '
        f'first.</p></section>\n'
    )


def _exists(home, name):
    return os.path.exists(os.path.join(home, name))


def _sample_cards(home):
    """One card per class: image, labels, top features, RF thumbnails."""
    doc = read_json_artifact(os.path.join(home, P.ANALYSES_TEST))
    store = (load_store(os.path.join(home, P.ANNOTATION))
             if _exists(home, P.ANNOTATION) else None)
    truth = {}
    classes = {}
    if _exists(home, P.DATASET):
        from .data.dataset_io import load_dataset

        _, _, test, class_defs = load_dataset(os.path.join(home, P.DATASET))
        truth = {s.sample_id: s.label for s in test}
        classes = {c.class_id: c.name for c in class_defs}

    by_class = {}
    for s in doc["samples"]:
        label = truth.get(s["sample_id"])
        if label is not None and label not in by_class:
            by_class[label] = s
    cards = []
    for label in sorted(by_class):
        s = by_class[label]
        sid = s["sample_id"]
        pred_name = classes.get(s["predicted_label"], str(s["predicted_label"]))
        true_name = classes.get(label, str(label))
        verdict = "correct" if s["predicted_label"] == label else "incorrect"
        rows = []
        for tf in s["top_features"]:
            fid = tf["feature"]
            text = f"(unlabeled feature {fid})"
            if store is not None and store.assignments.get(fid):
                names = [store.label_name(i)
                         for i in sorted(store.assignments[fid])]
                text = ", ".join(names)
            rows.append(
                f"<tr><td>{fid}</td><td>{_fmt(tf['zhat'])}</td>"
                f"<td>{html.escape(text)}</td></tr>"
            )
        overlays = "".join(
            f'<img src="../{P.OVERLAYS_DIR}/rf_{sid}_{tf["feature"]}.png" '
            f'alt="receptive field of feature {tf["feature"]}" width="64">'
            for tf in s["top_features"]
            if _exists(home, os.path.join(
                P.OVERLAYS_DIR, f"rf_{sid}_{tf['feature']}.png"))
        )
        cards.append(
            f'<div class="card {verdict}">'
            f'<img src="../{P.IMAGES_DIR}/{sid}.png" alt="{sid}" width="96">'
            f"<h3>{html.escape(sid)}</h3>"
            f"<p>predicted <b>{html.escape(pred_name)}</b>, "
            f"true <b>{html.escape(true_name)}</b> ({verdict}), "
            f"confidence {_fmt(s['icr'])}</p>"
            f'<table><tr><th>feature</th><th>zhat</th><th>attributes</th></tr>'
            f'{"".join(rows) or "<tr><td colspan=3>no features above threshold</td></tr>"}'
            f"</table><div class=\"overlays\">{overlays}</div></div>"
        )
    return '<div class="cards">' + "".join(cards) + "</div>"


def _write(path, content):
    with open(path, "w") as fh:
        fh.write(content)


def generate_report(cfg, home):
    """Build report/index.html and its SVG figures from whatever exists."""
    out_dir = os.path.join(home, P.REPORT_DIR)
    os.makedirs(out_dir, exist_ok=True)
    sections = []

    # headline metrics
    if _exists(home, P.METRICS):
        m = read_json_artifact(os.path.join(home, P.METRICS))
        sections.append(_panel("Model", (
            f"<p>train accuracy {_fmt(m['train_accuracy'])}, "
            f"test accuracy {_fmt(m['test_accuracy'])}, "
            f"{len(m['epoch_losses'])} epochs</p>"
        )))
    else:
        sections.append(_missing("Model", "train"))

    # per-class inference cards
    if _exists(home, P.ANALYSES_TEST):
        sections.append(_panel("Inference walkthroughs", _sample_cards(home)))
    else:
        sections.append(_missing("Inference walkthroughs", "analyze"))

    # activation histograms from traces
    if _exists(home, P.TRACES) and _exists(home, P.STATS):
        traces = load_traces(os.path.join(home, P.TRACES))
        stats_doc = read_json_artifact(os.path.join(home, P.STATS))
        mu = np.asarray(stats_doc["mu"])
        z = np.stack([
            traces[sid]["conv_final"].max(axis=(1, 2))
            for sid in sorted(traces)
        ]) if traces else np.zeros((0, len(mu)))
        picks = list(np.argsort(-mu, kind="stable")[:8])
        imgs = []
        for fid in picks:
            counts, edges = activation_histogram(z, int(fid), bins=20)
            name = f"hist_feature_{int(fid):03d}.svg"
            _write(os.path.join(out_dir, name), svg_histogram_chart(
                f"Feature {int(fid)} activation over the test set",
                counts, edges,
            ))
            imgs.append(f'<img src="{name}" alt="{name}">')
        sections.append(_panel(
            "Activation ranges (8 widest-range features)", "".join(imgs)
        ))
    else:
        sections.append(_missing("Activation ranges", "analyze"))

    # ablation curves
    if _exists(home, P.ABLATION):
        abl = read_json_artifact(os.path.join(home, P.ABLATION))
        imgs = []
        for cid in sorted(abl["classes"], key=int):
            entry = abl["classes"][cid]
            name = f"ablation_class{int(cid)}.svg"
            _write(os.path.join(out_dir, name), svg_ablation_chart(
                f"class{int(cid)}", entry["frequent"], entry["random"],
            ))
            imgs.append(f'<img src="{name}" alt="{name}">')
        sections.append(_panel(
            "Accuracy decay under feature-map deletion", "".join(imgs)
        ))
    else:
        sections.append(_missing("Accuracy decay under feature-map deletion",
                                 "ablate"))

    # joint heatmaps from whichever records exist
    heatmap_sections = []
    for name, title in ((P.RECORDS, "human responses"),
                        (P.RECORDS_ORACLE, "oracle responses")):
        if not _exists(home, name):
            continue
        records = load_records_jsonl(os.path.join(home, name))
        correct, incorrect = P.joint_views(records, cfg.bins)
        imgs = []
        for dist in (correct, incorrect):
            fname = f"joint_{dist.population}_{name.split('.')[0]}.svg"
            _write(os.path.join(out_dir, fname), svg_joint_heatmap(dist))
            imgs.append(f'<img src="{fname}" alt="{fname}">')
        heatmap_sections.append(_panel(
            f"PCR/LCR joint distribution ({title})", "".join(imgs)
        ))
    if heatmap_sections:
        sections.extend(heatmap_sections)
    else:
        sections.append(_missing("PCR/LCR joint distribution", "consistency"))

    # diagnosis summary
    if _exists(home, P.DIAGNOSIS):
        d = read_json_artifact(os.path.join(home, P.DIAGNOSIS))
        rows = "".join(
            f"<tr><td>{html.escape(k)}</td><td>{v}</td></tr>"
            for k, v in sorted(d["summary"].items())
        ) or "<tr><td colspan=2>no rule fired</td></tr>"
        sections.append(_panel("Diagnosis summary", (
            f"<p>threshold {_fmt(d['low_threshold'])}, "
            f"source {html.escape(d['source'])}</p>"
            f"<table><tr><th>suggestion</th><th>records</th></tr>{rows}</table>"
        )))
    else:
        sections.append(_missing("Diagnosis summary", "consistency"))

    # provenance footer
    cfg_json = json.dumps(cfg.to_dict(), sort_keys=True, indent=2)
    sections.append(_panel("Configuration", f"<pre>{html.escape(cfg_json)}</pre>"))

    page = (
        "<!DOCTYPE html>\n<html lang=\"en\"><head><meta charset=\"utf-8\">"
        "<title>Inference transparency report</title>\n"
        "<style>\n"
        "body{font-family:sans-serif;margin:2em;max-width:1100px}\n"
        ".panel{border:1px solid #ccc;border-radius:6px;padding:1em;"
        "margin-bottom:1.5em}\n"
        ".panel.missing{background:#fdf6e3}\n"
        ".cards{display:flex;flex-wrap:wrap;gap:1em}\n"
        ".card{border:1px solid #ddd;padding:.6em;width:270px}\n"
        ".card.incorrect{border-color:#c0392b}\n"
        ".card img{image-rendering:pixelated}\n"
        ".overlays img{margin-right:4px;image-rendering:pixelated}\n"
        "table{border-collapse:collapse}\n"
        "td,th{border:1px solid #ccc;padding:2px 8px;font-size:13px}\n"
        "</style></head><body>\n"
        "<h1>Inference transparency report</h1>\n"
        + "".join(sections) +
        "</body></html>\n"
    )
    _write(os.path.join(out_dir, "index.html"), page)
    return {"report": os.path.join(out_dir, "index.html")}
