"""Point CSV files, run manifests and SVG output.

A point file starts with one ``# {json}`` comment line carrying the format
version, model and parameters, followed by the header
``id,parent_id,birth_time,is_seed,x1,...,xd`` and one row per point in
arrival order. The root comes first with parent ``-1``. Floats are written
with 17 significant digits so a read gives back the exact doubles.
``birth_time`` is empty for the discrete models.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from .agora import AgoraStats, PointTree
from .branching import BranchingTree
from .errors import SchemaError, UnsupportedPlotError
from .profiles import ProcessParams

FORMAT_VERSION = 1
BASE_COLUMNS = ["id", "parent_id", "birth_time", "is_seed"]


def library_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _fmt(x: float) -> str:
    return "%.17g" % x


def _model_of(tree) -> str:
    if isinstance(tree, BranchingTree):
        return "ct"
    return getattr(tree, "model", None) or "discrete"


def tree_metadata(tree, extra: dict | None = None) -> dict:
    meta = {"format_version": FORMAT_VERSION, "model": _model_of(tree)}
    if isinstance(tree, BranchingTree):
        meta["params"] = tree.params.to_dict() if tree.params is not None else None
        meta["horizon"] = tree.horizon
        meta["stop_reason"] = tree.stop_reason
        meta["max_depth"] = tree.max_depth
    else:
        meta["stats"] = {"proposals": tree.stats.proposals, "rejections": tree.stats.rejections,
                         "seeds": tree.stats.seeds}
    if extra:
        meta.update(extra)
    return meta


def write_points_csv(tree, path, extra_meta: dict | None = None) -> Path:
    """Write a ``BranchingTree`` or ``PointTree``; returns the path written."""
    path = Path(path)
    ct = isinstance(tree, BranchingTree)
    pts = tree.chi if ct else tree.points
    parent = tree.parent if ct else tree.parents
    d = pts.shape[1]
    meta = json.dumps(tree_metadata(tree, extra_meta), sort_keys=True)
    try:
        with open(path, "w", newline="") as fh:
            fh.write("# " + meta + "\n")
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(BASE_COLUMNS + [f"x{k + 1}" for k in range(d)])
            for i in range(len(pts)):
                bt = _fmt(tree.tau[i]) if ct else ""
                seed = "1" if parent[i] == 0 else "0"
                out.writerow([str(i), str(int(parent[i])), bt, seed] + [_fmt(x) for x in pts[i]])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def _float(text, line, what):
    try:
        x = float(text)
    except ValueError:
        raise SchemaError(f"{what} {text!r} is not a number", line) from None
    if not math.isfinite(x):
        raise SchemaError(f"{what} is not finite", line)
    return x


def _int(text, line, what):
    try:
        return int(text)
    except ValueError:
        raise SchemaError(f"{what} {text!r} is not an integer", line) from None


def read_points_csv(path):
    """Inverse of ``write_points_csv``. Raises ``SchemaError`` with a line number."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    meta = {}
    lineno = 1
    if lines and lines[0].startswith("#"):
        try:
            meta = json.loads(lines[0][1:])
        except json.JSONDecodeError as exc:
            raise SchemaError(f"metadata comment is not valid JSON ({exc.msg})", 1) from None
        if not isinstance(meta, dict):
            raise SchemaError("metadata comment must be a JSON object", 1)
        version = meta.get("format_version", FORMAT_VERSION)
        if version != FORMAT_VERSION:
            raise SchemaError(f"unsupported format_version {version!r}", 1)
        lines = lines[1:]
        lineno = 2
    if not lines:
        raise SchemaError("missing header", lineno)
    header = lines[0].split(",")
    d = len(header) - len(BASE_COLUMNS)
    if header[:4] != BASE_COLUMNS or d < 1 or header[4:] != [f"x{k + 1}" for k in range(d)]:
        raise SchemaError(f"bad header {lines[0]!r}; expected id,parent_id,birth_time,is_seed,x1,...",
                          lineno)
    rows = list(csv.reader(lines[1:]))
    if not rows:
        raise SchemaError("no data rows; the root row is required", lineno)
    n = len(rows)
    parent = np.empty(n, dtype=np.int64)
    pts = np.empty((n, d))
    times = []
    for i, row in enumerate(rows):
        ln = lineno + 1 + i
        if len(row) != len(header):
            raise SchemaError(f"expected {len(header)} fields, got {len(row)}", ln)
        if _int(row[0], ln, "id") != i:
            raise SchemaError(f"id {row[0]} out of order; expected {i}", ln)
        p = _int(row[1], ln, "parent_id")
        if (i == 0 and p != -1) or (i > 0 and not 0 <= p < i):
            raise SchemaError(f"invalid parent_id {p} for id {i}", ln)
        parent[i] = p
        if row[3] not in ("0", "1") or (row[3] == "1") != (p == 0):
            raise SchemaError(f"is_seed {row[3]!r} inconsistent with parent_id {p}", ln)
        times.append(None if row[2] == "" else _float(row[2], ln, "birth_time"))
        for k in range(d):
            pts[i, k] = _float(row[4 + k], ln, f"x{k + 1}")
    has_time = [t is not None for t in times]
    if any(has_time) and not all(has_time):
        bad = has_time.index(not has_time[0])
        raise SchemaError("birth_time must be given for all rows or for none", lineno + 1 + bad)

    if all(has_time):
        tau = np.asarray(times)
        depth = np.zeros(n, dtype=np.int64)
        for i in range(1, n):
            depth[i] = depth[parent[i]] + 1
        params = ProcessParams.from_dict(meta["params"]) if meta.get("params") else None
        return BranchingTree(params=params, parent=parent, tau=tau, chi=pts, depth=depth,
                             horizon=float(meta.get("horizon", tau[-1])),
                             stop_reason=meta.get("stop_reason", "vertices"),
                             max_depth=meta.get("max_depth"))
    stats = AgoraStats(**meta["stats"]) if "stats" in meta else AgoraStats(seeds=int((parent == 0).sum()))
    tree = PointTree.from_arrays(pts, parent, stats)
    tree.model = meta.get("model")
    return tree


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, model: str, params: dict, seed: int, outputs, started: datetime,
                   extra: dict | None = None) -> Path:
    """JSON run manifest with enough settings to repeat the run and file digests."""
    path = Path(path)
    base = path.parent
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": "run-manifest",
        "model": model,
        "params": params,
        "seed": seed,
        "library_version": library_version(),
        "started": started.isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
        "outputs": {os.path.relpath(p, base): sha256_file(p) for p in outputs},
    }
    if extra:
        manifest.update(extra)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(path) -> dict:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"manifest is not valid JSON ({exc.msg})", exc.lineno) from None
    if not isinstance(data, dict) or data.get("kind") != "run-manifest":
        raise SchemaError("not a run manifest")
    if data.get("format_version") != FORMAT_VERSION:
        raise SchemaError(f"unsupported format_version {data.get('format_version')!r}")
    for key in ("model", "params", "seed"):
        if key not in data:
            raise SchemaError(f"manifest lacks {key!r}")
    return data


# ---------------------------------------------------------------------------
# SVG

def _svg_doc(width, height, body) -> str:
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n<rect width="100%" height="100%" fill="white"/>\n'
            + "".join(body) + "</svg>\n")


def emit_scatter_svg(points, path, parents=None, edges: bool = False, size: int = 800,
                     radius: float | None = None) -> Path:
    """Scatter plot of a planar point set, optionally with parent edges.

    The root (point 0) is not drawn when ``parents`` is given, since it is a
    bookkeeping vertex at the origin for the discrete models.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise UnsupportedPlotError(f"scatter plots need d = 2, got shape {pts.shape}")
    if edges and parents is None:
        raise UnsupportedPlotError("edges requested without parent indices")
    margin = 10.0
    lo = pts.min(axis=0)
    span = float((pts.max(axis=0) - lo).max()) or 1.0
    scale = (size - 2 * margin) / span
    xy = (pts - lo) * scale + margin
    xy[:, 1] = size - xy[:, 1]  # y axis points up
    if radius is None:
        radius = max(0.4, min(4.0, 0.35 * size / math.sqrt(len(pts))))
    body = []
    if edges:
        par = np.asarray(parents)
        body.append('<g stroke="#9aa" stroke-width="0.4">\n')
        for i in range(1, len(pts)):
            a, b = xy[par[i]], xy[i]
            body.append(f'<line x1="{a[0]:.2f}" y1="{a[1]:.2f}" x2="{b[0]:.2f}" y2="{b[1]:.2f}"/>\n')
        body.append("</g>\n")
    body.append('<g fill="#123">\n')
    for x, y in xy:
        body.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{radius:.2f}"/>\n')
    body.append("</g>\n")
    path = Path(path)
    path.write_text(_svg_doc(size, size, body))
    return path


def emit_loglog_svg(fit, path, width: int = 640, height: int = 480) -> Path:
    """Log-log plot of a ``DimFit``: all scales as dots, the fitted line over its window."""
    eps = np.asarray(fit.eps_values, dtype=float)
    stats = np.asarray(fit.stats, dtype=float)
    keep = stats > 0
    boxcount = fit.method.value == "boxcount"
    x = -np.log10(eps) if boxcount else np.log10(eps)
    y = np.log10(np.where(keep, stats, np.nan))
    lo, hi = fit.fit_window
    xf = x[lo:hi]
    # the fit is in natural logs; the slope is the same in log10 coordinates
    yf = (fit.intercept + fit.slope * (xf * math.log(10))) / math.log(10)
    xs = np.concatenate([x, xf])
    ys = np.concatenate([y[keep], yf])
    x0, x1 = float(np.nanmin(xs)), float(np.nanmax(xs))
    y0, y1 = float(np.nanmin(ys)), float(np.nanmax(ys))
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    m = 50

    def px(u):
        return m + (u - x0) / (x1 - x0) * (width - 2 * m)

    def py(v):
        return height - m - (v - y0) / (y1 - y0) * (height - 2 * m)

    xlabel = "log10(1/eps)" if boxcount else "log10(eps)"
    ylabel = "log10 N(eps)" if boxcount else "log10 C(eps)"
    body = [
        f'<line x1="{m}" y1="{height - m}" x2="{width - m}" y2="{height - m}" stroke="black"/>\n',
        f'<line x1="{m}" y1="{m}" x2="{m}" y2="{height - m}" stroke="black"/>\n',
        f'<text x="{width / 2:.0f}" y="{height - 12}" text-anchor="middle" font-size="13">{xlabel}</text>\n',
        f'<text x="14" y="{height / 2:.0f}" font-size="13" transform="rotate(-90 14 {height / 2:.0f})" '
        f'text-anchor="middle">{ylabel}</text>\n',
        f'<text x="{m + 8}" y="{m + 4}" font-size="13">slope {fit.slope:.3f} +/- {fit.stderr:.3f}</text>\n',
    ]
    for u, v, k in zip(x, y, keep):
        if k:
            body.append(f'<circle cx="{px(u):.2f}" cy="{py(v):.2f}" r="3" fill="#246"/>\n')
    body.append(f'<line x1="{px(xf[0]):.2f}" y1="{py(yf[0]):.2f}" x2="{px(xf[-1]):.2f}" '
                f'y2="{py(yf[-1]):.2f}" stroke="#c33" stroke-width="1.5"/>\n')
    for v, label in ((x0, f"{x0:.2f}"), (x1, f"{x1:.2f}")):
        body.append(f'<text x="{px(v):.1f}" y="{height - m + 16}" font-size="11" '
                    f'text-anchor="middle">{label}</text>\n')
    for v, label in ((y0, f"{y0:.2f}"), (y1, f"{y1:.2f}")):
        body.append(f'<text x="{m - 4}" y="{py(v) + 4:.1f}" font-size="11" '
                    f'text-anchor="end">{label}</text>\n')
    path = Path(path)
    path.write_text(_svg_doc(width, height, body))
    return path
