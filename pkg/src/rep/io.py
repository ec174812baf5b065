"""Long-form CSV tensors and labels, JSON model files and report emission.

Tensor files carry one record per observed entry::

    patient_id,gene_id,time_index,value

Label files carry ``patient_id,time_index,label``. Columns are matched by
name, never by position. ``time_index`` is 1-based in files and the time axis
is ordered by it; patients and genes keep their order of first appearance.
A missing measurement is simply an absent record.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, FormatError, SchemaVersionError
from .linear import Standardizer
from .predictor import RepModel, ResponseMatrix
from .tensor import CpModel, MaskedTensor

SCHEMA_VERSION = 1
TENSOR_COLUMNS = ("patient_id", "gene_id", "time_index", "value")
LABEL_COLUMNS = ("patient_id", "time_index", "label")


@dataclass(frozen=True)
class AxisLabels:
    patients: tuple
    genes: tuple
    times: tuple  # 1-based time indices as they appear in files


def _reader(path, required):
    fh = open(path, newline="", encoding="utf-8")
    reader = csv.DictReader(fh)
    header = reader.fieldnames or []
    missing = [c for c in required if c not in header]
    if missing:
        fh.close()
        raise FormatError(f"{path}: missing column(s) {missing}; header is {header}", line=1)
    return fh, reader


def _parse_time(raw, line):
    try:
        t = int(raw.strip())
    except (ValueError, AttributeError):
        raise FormatError(f"time_index {raw!r} is not an integer", line=line) from None
    if t < 1:
        raise FormatError(f"time_index {t} must be >= 1", line=line)
    return t


def _parse_float(raw, line, column):
    try:
        v = float(raw)
    except (TypeError, ValueError):
        raise FormatError(f"{column} {raw!r} is not a number", line=line) from None
    if not math.isfinite(v):
        raise FormatError(f"{column} {raw!r} is not finite", line=line)
    return v


def read_tensor_records(path):
    """Parse and validate tensor records; returns ``[(pid, gid, t, value), ...]``."""
    fh, reader = _reader(path, TENSOR_COLUMNS)
    seen = {}
    records = []
    with fh:
        for row in reader:
            line = reader.line_num
            pid, gid = row["patient_id"], row["gene_id"]
            if pid is None or gid is None:
                raise FormatError("truncated record", line=line)
            t = _parse_time(row["time_index"], line)
            v = _parse_float(row["value"], line, "value")
            if v < 0:
                raise DomainError(f"line {line}: negative value {v}")
            key = (pid, gid, t)
            if key in seen:
                raise FormatError(f"duplicate record {key} (first on line {seen[key]})", line=line)
            seen[key] = line
            records.append((pid, gid, t, v))
    if not records:
        raise FormatError(f"{path}: no records")
    return records


def _first_appearance(items):
    return tuple(dict.fromkeys(items))


def load_tensor(path, genes=None, times=None):
    """Read a long-form tensor file.

    Parameters
    ----------
    path : path-like
    genes, times : sequence, optional
        Fix the gene and time axes (e.g. to match a trained model). Records
        for genes or times outside them are rejected.

    Returns
    -------
    (MaskedTensor, AxisLabels)
    """
    records = read_tensor_records(path)
    patients = _first_appearance(r[0] for r in records)
    genes = tuple(genes) if genes is not None else _first_appearance(r[1] for r in records)
    times = tuple(times) if times is not None else tuple(sorted({r[2] for r in records}))
    pi = {p: i for i, p in enumerate(patients)}
    gi = {g: j for j, g in enumerate(genes)}
    ti = {t: k for k, t in enumerate(times)}
    values = np.zeros((len(patients), len(genes), len(times)))
    mask = np.zeros(values.shape, dtype=bool)
    for pid, gid, t, v in records:
        if gid not in gi:
            raise FormatError(f"unknown gene {gid!r}")
        if t not in ti:
            raise FormatError(f"unknown time_index {t}")
        idx = (pi[pid], gi[gid], ti[t])
        values[idx] = v
        mask[idx] = True
    return MaskedTensor(values, mask), AxisLabels(patients, genes, times)


def save_tensor(path, tensor: MaskedTensor, axes: AxisLabels, *, all_entries=None):
    """Write observed entries (or every entry of ``all_entries`` if given)."""
    values = tensor.values if all_entries is None else np.asarray(all_entries)
    keep = tensor.mask if all_entries is None else np.ones(values.shape, dtype=bool)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TENSOR_COLUMNS)
        for i, j, k in zip(*np.nonzero(keep)):
            w.writerow([axes.patients[i], axes.genes[j], axes.times[k], repr(float(values[i, j, k]))])


def read_label_records(path):
    fh, reader = _reader(path, LABEL_COLUMNS)
    seen = set()
    out = []
    with fh:
        for row in reader:
            line = reader.line_num
            pid = row["patient_id"]
            t = _parse_time(row["time_index"], line)
            raw = (row["label"] or "").strip()
            if raw not in ("1", "+1", "-1"):
                raise FormatError(f"label {raw!r} must be -1 or +1", line=line)
            if (pid, t) in seen:
                raise FormatError(f"duplicate label for ({pid}, {t})", line=line)
            seen.add((pid, t))
            out.append((pid, t, int(raw)))
    if not out:
        raise FormatError(f"{path}: no records")
    return out


def load_labels(path, patients, times) -> ResponseMatrix:
    """Labels aligned to the given patient and time axes; every pair must be present."""
    table = {(p, t): lab for p, t, lab in read_label_records(path)}
    labels = np.zeros((len(patients), len(times)), dtype=int)
    for i, p in enumerate(patients):
        for k, t in enumerate(times):
            if (p, t) not in table:
                raise FormatError(f"no label for patient {p!r} at time_index {t}")
            labels[i, k] = table[(p, t)]
    return ResponseMatrix(labels, tuple(patients))


def partial_labels(path, patients, times) -> np.ndarray:
    """Labels aligned to the axes with NaN where a label is absent."""
    table = {(p, t): lab for p, t, lab in read_label_records(path)}
    out = np.full((len(patients), len(times)), np.nan)
    for i, p in enumerate(patients):
        for k, t in enumerate(times):
            if (p, t) in table:
                out[i, k] = table[(p, t)]
    return out


def save_labels(path, y: ResponseMatrix, times):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LABEL_COLUMNS)
        for i, pid in enumerate(y.patient_ids):
            for k, t in enumerate(times):
                w.writerow([pid, t, int(y.labels[i, k])])


# -- models -----------------------------------------------------------------

def _mat(a):
    return None if a is None else np.asarray(a, dtype=float).tolist()


def model_to_dict(model, axes: AxisLabels | None = None) -> dict:
    if isinstance(model, CpModel):
        d = {"schema": "cp-model", "schema_version": SCHEMA_VERSION,
             "A": _mat(model.A), "B": _mat(model.B), "C": _mat(model.C)}
    elif isinstance(model, RepModel):
        std = model.standardizer
        d = {
            "schema": "rep-model", "schema_version": SCHEMA_VERSION,
            "u": _mat(model.u), "v": float(model.v), "b": float(model.b),
            "rho": float(model.rho), "lam": float(model.lam),
            "l1_radius": None if model.l1_radius is None else float(model.l1_radius),
            "latent_ridge": float(model.latent_ridge),
            "B": _mat(model.B), "C": _mat(model.C),
            "standardizer": None if std is None else {"mean": _mat(std.mean),
                                                      "scale": _mat(std.scale)},
        }
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    if axes is not None:
        d["axes"] = {"patients": list(axes.patients), "genes": list(axes.genes),
                     "times": list(axes.times)}
    return d


def _arr(d, key):
    v = d[key]
    return None if v is None else np.asarray(v, dtype=float)


def model_from_dict(d: dict):
    if not isinstance(d, dict) or "schema" not in d:
        raise FormatError("model file has no schema field")
    if d.get("schema_version") != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"model schema_version {d.get('schema_version')!r}, expected {SCHEMA_VERSION}"
        )
    try:
        if d["schema"] == "cp-model":
            return CpModel(_arr(d, "A"), _arr(d, "B"), _arr(d, "C"))
        if d["schema"] == "rep-model":
            std = d["standardizer"]
            return RepModel(
                u=_arr(d, "u"), v=float(d["v"]), b=float(d["b"]), rho=float(d["rho"]),
                lam=float(d["lam"]), l1_radius=d["l1_radius"],
                B=_arr(d, "B"), C=_arr(d, "C"),
                standardizer=None if std is None else Standardizer(
                    np.asarray(std["mean"], dtype=float), np.asarray(std["scale"], dtype=float)),
                latent_ridge=float(d["latent_ridge"]),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed model file: {exc}") from exc
    raise FormatError(f"unknown model schema {d['schema']!r}")


def save_model(path, model, axes: AxisLabels | None = None):
    """Write a CP or REP model as JSON.

    Floats are written in their shortest round-trip form, so loading gives
    back bit-identical arrays.
    """
    text = json.dumps(model_to_dict(model, axes), indent=1)
    _atomic_write(path, text + "\n")


def load_model(path, with_axes=False):
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: cannot parse model file ({exc.msg})", line=exc.lineno) from None
    model = model_from_dict(d)
    if not with_axes:
        return model
    ax = d.get("axes")
    axes = None if ax is None else AxisLabels(tuple(ax["patients"]), tuple(ax["genes"]),
                                              tuple(int(t) for t in ax["times"]))
    return model, axes


def _atomic_write(path, text):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


# -- reports ----------------------------------------------------------------

def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


def report_to_dict(report) -> dict:
    out = {"schema": "cv-report", "schema_version": SCHEMA_VERSION,
           "protocol": report.protocol, "seed": report.seed,
           "settings": _plain(report.settings), "methods": {}}
    for name, mr in report.methods.items():
        if not mr.folds:
            raise FormatError(f"method {name!r} has no folds")
        c = mr.confusion
        roc = mr.roc
        out["methods"][name] = {
            "acc": mr.acc, "auc": roc.auc,
            "confusion": {"tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn},
            "roc": {"fpr": _plain(roc.fpr), "tpr": _plain(roc.tpr)},
            "folds": [
                {"patient_id": f.patient_id, "acc": f.acc, "params": _plain(f.params),
                 "y_true": _plain(f.y_true), "y_pred": _plain(f.y_pred),
                 "scores": _plain(f.scores)}
                for f in mr.folds
            ],
        }
    return out


def emit_report(report, out_dir) -> list:
    """Write a CV report or a masking-sweep table under ``out_dir``.

    CV reports produce ``report.json`` plus ``roc_<method>.csv`` (fpr,tpr);
    sweep tables produce ``sweep.csv`` and ``sweep.json``. Returns the paths
    written.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if isinstance(report, (list, tuple)):
        if not report:
            raise FormatError("empty sweep table")
        rows = [{"seed": r.seed, "rate": r.rate, "method": r.method, "acc": r.acc, "auc": r.auc}
                for r in report]
        p = out_dir / "sweep.csv"
        with open(p, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
        written.append(p)
        p = out_dir / "sweep.json"
        _atomic_write(p, json.dumps({"schema": "mask-sweep", "schema_version": SCHEMA_VERSION,
                                     "rows": rows}, indent=1) + "\n")
        written.append(p)
        return written

    d = report_to_dict(report)
    p = out_dir / "report.json"
    _atomic_write(p, json.dumps(d, indent=1) + "\n")
    written.append(p)
    for name, m in d["methods"].items():
        p = out_dir / f"roc_{name}.csv"
        with open(p, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["fpr", "tpr"])
            for x, y in zip(m["roc"]["fpr"], m["roc"]["tpr"]):
                w.writerow([repr(x), repr(y)])
        written.append(p)
    return written


def read_roc(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([float(r["fpr"]) for r in rows]), np.array([float(r["tpr"]) for r in rows])
