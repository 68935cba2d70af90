"""Analysis report assembly, deterministic JSON and CSV writers."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from . import classify as C
from .coeffs import NoBracketError, classify_endpoint, side_profile
from .eigensolver import kernel_analysis
from .karamata import PreconditionError, is_positively_increasing, is_slowly_varying

SCHEMA_VERSION = "1.0"
TOP_KEYS = ("problem", "profiles", "endpoints", "karamata", "discreteness", "regularity_zero",
            "regularity_infinity", "kernel", "riesz", "similarity", "traces", "schema_version")


def clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings, arrays dropped to lists."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "+inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, complex):
        return {"re": clean(obj.real), "im": clean(obj.imag)}
    return obj


def dumps(report):
    return json.dumps(clean(report), indent=2, sort_keys=True) + "\n"


def atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows):
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _karamata_block(problem, policy):
    out = {}
    for s in "+-":
        try:
            h = side_profile(problem, s).half.G_handle(name=f"G{s}")
        except (NoBracketError, PreconditionError) as exc:
            out[s] = {"error": str(exc)}
            continue
        row = {}
        for name, test in (("slowly_varying", is_slowly_varying), ("positively_increasing", is_positively_increasing)):
            try:
                v = test(h, policy=policy)
                row[name] = v.status
            except (PreconditionError, NoBracketError) as exc:
                row[name] = "inconclusive"
                row[f"{name}_note"] = str(exc)
        out[s] = {"function": "W o R^-1", "regime": "zero_plus" if s == "+" else "zero_minus", **row}
    return out


def _verdict_block(v: C.RegularityVerdict, ref):
    d = v.as_dict()
    d["evidence_ref"] = ref
    if v.point == "zero":
        d["regular_critical"] = v.regular_critical
        ev = v.evidence
        d["a_plus"] = ev.get("a_plus")
        d["a_minus"] = ev.get("a_minus")
        d["kernel_sum"] = ev.get("kernel_sum")
    else:
        d["numeric_D"] = v.evidence.get("numeric_D")
        d["detectors"] = {"positively_increasing": v.evidence.get("positively_increasing"),
                          "slowly_varying": v.evidence.get("slowly_varying")}
    return d


def build_report(problem, cfg=C.ClassifyConfig(), stem="report"):
    """Full pipeline; returns (report dict, {sidecar name: csv text})."""
    inf = C.regularity_at_infinity(problem, cfg)
    zero = C.regularity_at_zero(problem, cfg)
    disc = C.discreteness(problem)
    sim = C.similarity_and_riesz(problem, cfg, inf, zero, disc)
    kern = kernel_analysis(problem)
    sidecars = {}
    traces = {}
    if "q" in inf.evidence:
        name = f"{stem}.q.csv"
        sidecars[name] = csv_text(("x", "Q"), zip(inf.evidence["q_x"], inf.evidence["q"]))
        traces["q"] = name
    if "d_ratio" in inf.evidence:
        name = f"{stem}.d_ratio.csv"
        sidecars[name] = csv_text(("y", "ratio"), zip(inf.evidence["d_y"], inf.evidence["d_ratio"]))
        traces["d_ratio"] = name
    for s, d in disc.sides.items():
        if d.values is not None:
            key = f"discreteness_{'plus' if s == '+' else 'minus'}"
            name = f"{stem}.{key}.csv"
            sidecars[name] = csv_text(("t", "diagnostic"), zip(d.x, d.values))
            traces[key] = name
    endpoints = {}
    for s in "+-":
        try:
            endpoints[s] = classify_endpoint(problem, s).as_dict()
        except Exception as exc:  # numeric probes are reported, not fatal
            endpoints[s] = {"error": f"{type(exc).__name__}: {exc}"}
    profiles = {}
    for s in "+-":
        try:
            profiles[s] = side_profile(problem, s).summary()
        except NoBracketError as exc:
            profiles[s] = {"error": str(exc)}
    echo = problem.echo()
    echo["params"] = problem.meta.get("params", {})
    report = {
        "problem": echo,
        "profiles": profiles,
        "endpoints": endpoints,
        "karamata": _karamata_block(problem, cfg.policy),
        "discreteness": disc.as_dict(),
        "regularity_zero": _verdict_block(zero, traces.get("discreteness_plus")),
        "regularity_infinity": _verdict_block(inf, traces.get("q") or traces.get("d_ratio")),
        "kernel": kern.as_dict(),
        "riesz": {"status": sim.riesz.status, "note": sim.riesz.note, "route": inf.route},
        "similarity": sim.as_dict(),
        "traces": traces,
        "schema_version": SCHEMA_VERSION,
    }
    return clean(report), sidecars


def verdict_rows(report):
    """Flat (item, status, route) rows for --format csv."""
    rz, ri = report["regularity_zero"], report["regularity_infinity"]
    return [
        ("regularity_infinity", ri["status"], ri["route"]),
        ("regularity_zero", rz["status"], f"{rz['route']}:{rz['case']}" if rz.get("case") else rz["route"]),
        ("discreteness", report["discreteness"]["overall"], ""),
        ("riesz", report["riesz"]["status"], report["riesz"]["route"]),
        ("similarity", report["similarity"]["status"], json.dumps(report["similarity"]["routes"], sort_keys=True)),
        ("kernel_chain_length", report["kernel"]["chain_length"], ""),
    ]


def statuses(report):
    return [r[1] for r in verdict_rows(report) if isinstance(r[1], str)]
