"""CSV / JSON / SVG writers for study results.

Floats are written with ``repr`` so that reading a CSV back with
``float()`` reproduces the in-memory values exactly.
"""
import csv
import json
import math
from pathlib import Path

import numpy as np

STUDY_COLUMNS = ("level", "N", "h", "pumping", "metabolic", "diffusive", "total", "error", "order")


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "" if math.isnan(v) else repr(v)
    return str(v)


def write_rows(path, columns, rows):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_rows(path):
    """Rows as dicts; numeric cells become int/float, empty cells NaN."""
    out = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            rec = {}
            for k, v in row.items():
                if v == "":
                    rec[k] = float("nan")
                elif v in ("true", "false"):
                    rec[k] = v == "true"
                else:
                    try:
                        rec[k] = int(v)
                    except ValueError:
                        try:
                            rec[k] = float(v)
                        except ValueError:
                            rec[k] = v
            out.append(rec)
    return out


def study_rows(result):
    for rec in result.records:
        r = rec.report
        yield (rec.level, rec.N, rec.h, r.pumping, r.metabolic, r.diffusive, r.total,
               rec.error, rec.order)


def write_study_csv(path, result):
    return write_rows(path, STUDY_COLUMNS, study_rows(result))


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def write_json(path, data):
    path = Path(path)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
    return path


def summary(result, scenario=None):
    d = {"kind": result.kind, "passed": result.passed, "messages": list(result.messages),
         "reference": result.reference, "reference_kind": result.reference_kind,
         "levels": [r.report.as_record() | {"error": r.error, "order": r.order}
                    for r in result.records]}
    if result.table_columns:
        d["table"] = {"columns": list(result.table_columns), "rows": result.table}
    extra = {k: v for k, v in result.extra.items() if k != "fields"}
    if extra:
        d["extra"] = extra
    if scenario is not None:
        d["scenario"] = scenario.to_dict()
    return d


# --- SVG heatmaps ------------------------------------------------------------

def _color(t):
    """Linear blue -> white -> red scale on t in [0, 1]."""
    t = min(max(t, 0.0), 1.0)
    if t < 0.5:
        s = t / 0.5
        rgb = (int(40 + 215 * s), int(80 + 175 * s), 255)
    else:
        s = (t - 0.5) / 0.5
        rgb = (255, int(255 - 175 * s), int(255 - 215 * s))
    return "#%02x%02x%02x" % rgb


def svg_heatmap(path, polygons, values, title=""):
    """Write polygons (unit-square coordinates) coloured by value.

    The colour scale is linear between the minimum and maximum value, which
    are printed under the plot.
    """
    values = np.asarray(values, dtype=float)
    lo, hi = float(values.min()), float(values.max())
    span = hi - lo if hi > lo else 1.0
    size, pad = 400, 20
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size + 2 * pad}" '
             f'height="{size + 2 * pad + 40}" viewBox="0 0 {size + 2 * pad} {size + 2 * pad + 40}">']
    if title:
        parts.append(f'<title>{title}</title>')
    for poly, v in zip(polygons, values):
        pts = " ".join(f"{pad + size * x:.3f},{pad + size * (1 - y):.3f}" for x, y in poly)
        parts.append(f'<polygon points="{pts}" fill="{_color((v - lo) / span)}" stroke="none"/>')
    parts.append(f'<text x="{pad}" y="{size + 2 * pad + 15}" font-size="12">min {lo:.6g}</text>')
    parts.append(f'<text x="{pad + size / 2}" y="{size + 2 * pad + 15}" font-size="12">'
                 f'max {hi:.6g}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
    return Path(path)


def write_field_svgs(outdir, mesh, c, P=None):
    """field_c1.svg / field_c2.svg (per triangle) and pressure.svg (per node cell)."""
    outdir = Path(outdir)
    if mesh.dim != 2:
        return []
    tris = mesh.nodes[mesh.triangles]
    files = [svg_heatmap(outdir / "field_c1.svg", tris, c.c1, "c1"),
             svg_heatmap(outdir / "field_c2.svg", tris, c.c2, "c2")]
    if P is not None:
        h = mesh.h
        cells = []
        for x, y in mesh.nodes:
            x0, x1 = max(x - h / 2, 0.0), min(x + h / 2, 1.0)
            y0, y1 = max(y - h / 2, 0.0), min(y + h / 2, 1.0)
            cells.append([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])
        files.append(svg_heatmap(outdir / "pressure.svg", cells, P, "pressure"))
    return files
