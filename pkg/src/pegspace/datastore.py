"""CSV datasets, text model files and report tables."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from pathlib import Path

import numpy as np

from .eda import PARAM_NAMES, ImpedanceParams, Wrench
from .predictor import MlpModel
from .sim import Termination, TrialOutcome
from .sweep import CATEGORIES, CategoryRanges, Dataset, TrialRecord

SCHEMA_VERSION = 1
MODEL_MAGIC = "pegspace-mlp"
MODEL_VERSION = 1
COLUMNS = ("peg",) + PARAM_NAMES + ("cat_tuple", "success", "termination", "depth_mm")
REQUIRED = PARAM_NAMES + ("success",)


class SchemaError(ValueError):
    pass


class ModelFormatError(ValueError):
    pass


def fmt(value) -> str:
    """Shortest text that round-trips a double: 17 significant digits."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return ""
    return format(value, ".17g")


def _meta_lines(metadata: dict) -> list:
    lines = [f"# schema_version: {SCHEMA_VERSION}"]
    for key in sorted(metadata):
        if key == "schema_version":
            continue
        lines.append(f"# {key}: {json.dumps(metadata[key], sort_keys=True, default=_jsonable)}")
    return lines


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not serialisable: {type(obj).__name__}")


def write_csv(path, header, rows, metadata=None) -> None:
    """Write ``rows`` under ``header`` with ``#`` metadata lines, LF endings, UTF-8."""
    buf = io.StringIO()
    for line in _meta_lines(metadata or {}):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def read_csv(path):
    """Return ``(metadata, header, rows)`` where rows are ``(line_no, fields)``."""
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    metadata, body, offset = {}, [], 0
    lines = text.split("\n")
    for i, line in enumerate(lines):
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(":")
            try:
                metadata[key.strip()] = json.loads(value)
            except json.JSONDecodeError:
                metadata[key.strip()] = value.strip()
            continue
        offset = i
        body = lines[i:]
        break
    body = [ln.rstrip("\r") for ln in body]
    while body and not body[-1].strip():
        body.pop()
    if not body:
        raise SchemaError(f"{path}: no header row")
    parsed = list(csv.reader(body))
    header = [h.strip() for h in parsed[0]]
    rows = [(offset + 2 + i, r) for i, r in enumerate(parsed[1:]) if r]
    return metadata, header, rows


def grid_rank(categories) -> int:
    """Position of a category tuple in the lexicographic grid, or -1."""
    if len(categories) != 8 or any(c not in CATEGORIES for c in categories):
        return -1
    rank = 0
    for c in categories:
        rank = rank * 3 + CATEGORIES.index(c)
    return rank


def _record_row(r: TrialRecord) -> list:
    term = r.termination
    return [r.peg, *r.params.as_array(), "".join(r.categories), bool(r.success),
            "" if term is None else term.value, r.depth_mm]


def save_dataset(dataset: Dataset, path) -> None:
    meta = dict(dataset.metadata)
    meta.setdefault("provenance", "simulated")
    write_csv(path, COLUMNS, (_record_row(r) for r in dataset.records), meta)


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "t", "yes"):
        return True
    if t in ("0", "false", "f", "no"):
        return False
    raise ValueError(f"bad boolean {text!r}")


def _parse_row(fields, col, peg_default, ranges):
    get = lambda name: fields[col[name]].strip() if name in col else ""
    values = [float(get(n)) for n in PARAM_NAMES]
    params = ImpedanceParams.from_array(values)
    success = _parse_bool(get("success"))
    peg = get("peg") or peg_default
    cats = tuple(get("cat_tuple")) if get("cat_tuple") else ranges.categorize(values)
    if any(c not in CATEGORIES + ("?",) for c in cats) or len(cats) != 8:
        raise ValueError(f"bad category tuple {get('cat_tuple')!r}")
    term_text = get("termination")
    outcome = None
    if term_text:
        term = Termination(term_text)
        if (term is Termination.INSERTED) != success:
            raise ValueError("success flag disagrees with termination")
        depth = float(get("depth_mm")) if get("depth_mm") else math.nan
        outcome = TrialOutcome(success, depth, Wrench(), math.nan, term)
    return peg, params, cats, success, outcome


def load_dataset(path, strict: bool = True, peg: str = "unknown", column_map: dict | None = None) -> Dataset:
    """Read a dataset CSV.

    Files with only the eight parameters and ``success`` are accepted;
    missing diagnostic columns default to empty. ``column_map`` renames
    external column names to ours. In strict mode any bad row raises
    :class:`SchemaError`; otherwise bad rows are quarantined.
    """
    if os.path.getsize(path) == 0:
        raise SchemaError(f"{path}: empty file")
    metadata, header, rows = read_csv(path)
    if column_map:
        header = [column_map.get(h, h) for h in header]
    col = {h: i for i, h in enumerate(header)}
    missing = [c for c in REQUIRED if c not in col]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}")
    ranges = CategoryRanges(**{k: tuple(map(tuple, v)) for k, v in metadata["category_ranges"].items()}) \
        if isinstance(metadata.get("category_ranges"), dict) else CategoryRanges()
    metadata.setdefault("provenance", "external")
    records, quarantined = [], []
    for line_no, fields in rows:
        try:
            if len(fields) != len(header):
                raise ValueError(f"expected {len(header)} fields, got {len(fields)}")
            p, params, cats, success, outcome = _parse_row(fields, col, peg, ranges)
        except ValueError as exc:
            if strict:
                raise SchemaError(f"{path}:{line_no}: {exc}") from exc
            quarantined.append((line_no, ",".join(fields), str(exc)))
            continue
        rank = grid_rank(cats)
        records.append(TrialRecord(p, params, cats, success, outcome,
                                   rank if rank >= 0 else len(records)))
    return Dataset(records, metadata, quarantined)


def dataset_fingerprint(X, y) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(X, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(y, dtype=bool).tobytes())
    return h.hexdigest()


def save_model(model: MlpModel, path, train_config=None, fingerprint: str = "") -> None:
    """Self-describing text model: dims, normalisation bounds, row-major parameters."""
    out = [f"{MODEL_MAGIC} {MODEL_VERSION}", "dims " + " ".join(str(d) for d in model.dims)]
    for lo, hi in model.feature_norm:
        out.append(f"norm {fmt(lo)} {fmt(hi)}")
    cfg = {} if train_config is None else (
        train_config if isinstance(train_config, dict) else train_config.__dict__)
    out.append("train_config " + json.dumps(cfg, sort_keys=True, default=_jsonable))
    out.append("fingerprint " + (fingerprint or "-"))
    names = ("W1", "b1", "W2", "b2", "W3", "b3")
    for name, arr in zip(names, model.parameters()):
        arr2 = np.atleast_2d(arr)
        out.append(f"{name} " + " ".join(str(s) for s in arr.shape))
        for row in arr2:
            out.append(" ".join(fmt(v) for v in row))
    out.append("end")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(out) + "\n")


def load_model(path, with_info: bool = False):
    """Read a model written by :func:`save_model`; malformed files raise :class:`ModelFormatError`."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().split("\n")
    except UnicodeDecodeError as exc:
        raise ModelFormatError(f"{path}: not a text model file") from exc
    it = iter(lines)

    def nxt():
        try:
            return next(it)
        except StopIteration:
            raise ModelFormatError(f"{path}: truncated model file") from None

    try:
        magic = nxt().split()
        if len(magic) != 2 or magic[0] != MODEL_MAGIC:
            raise ModelFormatError(f"{path}: not a {MODEL_MAGIC} file")
        if int(magic[1]) != MODEL_VERSION:
            raise ModelFormatError(f"{path}: unsupported model version {magic[1]}")
        head = nxt().split()
        if head[0] != "dims":
            raise ModelFormatError(f"{path}: expected dims line")
        dims = [int(d) for d in head[1:]]
        norm = []
        for _ in range(dims[0]):
            parts = nxt().split()
            if parts[0] != "norm" or len(parts) != 3:
                raise ModelFormatError(f"{path}: bad normalisation line")
            norm.append([float(parts[1]), float(parts[2])])
        cfg_line = nxt()
        if not cfg_line.startswith("train_config "):
            raise ModelFormatError(f"{path}: expected train_config line")
        cfg = json.loads(cfg_line[len("train_config "):])
        fp_line = nxt().split()
        if fp_line[0] != "fingerprint":
            raise ModelFormatError(f"{path}: expected fingerprint line")
        arrays = []
        for name in ("W1", "b1", "W2", "b2", "W3", "b3"):
            parts = nxt().split()
            if parts[0] != name:
                raise ModelFormatError(f"{path}: expected {name}, found {parts[0]!r}")
            shape = tuple(int(s) for s in parts[1:])
            rows = shape[0] if len(shape) == 2 else 1
            data = []
            for _ in range(rows):
                data.append([float(v) for v in nxt().split()])
            arr = np.array(data, dtype=float)
            if arr.size != int(np.prod(shape)):
                raise ModelFormatError(f"{path}: {name} has wrong size")
            arrays.append(arr.reshape(shape))
        if nxt().strip() != "end":
            raise ModelFormatError(f"{path}: missing end marker")
        model = MlpModel.from_parameters(arrays, norm)
    except ModelFormatError:
        raise
    except (ValueError, IndexError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"{path}: {exc}") from exc
    if tuple(dims) != model.dims:
        raise ModelFormatError(f"{path}: dims line disagrees with parameter shapes")
    if with_info:
        return model, {"train_config": cfg, "fingerprint": fp_line[1] if len(fp_line) > 1 else "-"}
    return model


# -- report tables ------------------------------------------------------------

def _hist_rows(hist):
    for lo, hi, n, s, r in zip(hist.edges[:-1], hist.edges[1:], hist.counts, hist.successes, hist.rates):
        yield [hist.param, lo, hi, int(n), int(s), r, n == 0]


def export_report(report, out_dir) -> list:
    """Write plot-ready tables for each figure/table equivalent; returns the paths written.

    ``report`` is a :class:`pegspace.pipeline.AnalysisReport`; sections that
    are absent (e.g. no predicted samples yet) are skipped.
    """
    out = Path(out_dir)
    meta = {"master_seed": report.master_seed, **report.options}
    written = []

    def put(name, header, rows):
        write_csv(out / name, header, rows, meta)
        written.append(out / name)

    rate_rows = []
    for peg, hists in report.histograms.items():
        put(f"fig3_hist_{peg}.csv",
            ["param", "bin_lo", "bin_hi", "count", "successes", "rate_percent", "empty"],
            [row for h in hists for row in _hist_rows(h)])
    for peg, (index, scores, success) in report.scores.items():
        k = scores.shape[1]
        put(f"fig4_scores_{peg}.csv", ["trial_index"] + [f"pc{i + 1}" for i in range(k)] + ["success"],
            [[int(i), *s, bool(f)] for i, s, f in zip(index, scores, success)])
    if report.clusters is not None:
        c = report.clusters
        k = c.scores.shape[1]
        put("fig5_clusters.csv", ["peg", "trial_index", "cluster"] + [f"pc{i + 1}" for i in range(k)],
            [[p, int(i), int(lab) + 1, *s] for p, i, lab, s in zip(c.pegs, c.index, c.labels, c.scores)])
    if report.predicted:
        rows = []
        for tag, (hists, rate) in report.predicted.items():
            for h in hists:
                total = h.counts.sum()
                for lo, hi, n in zip(h.edges[:-1], h.edges[1:], h.counts):
                    rows.append([tag, h.param, lo, hi, int(n), 100.0 * n / total if total else 0.0, rate])
        put("fig7_predicted_hist.csv",
            ["model", "param", "bin_lo", "bin_hi", "count", "percent_of_samples", "acceptance_rate_percent"],
            rows)
    for peg, (n_s, n_tot, rate) in report.success.items():
        rate_rows.append([peg, n_s, n_tot, rate])
    if rate_rows:
        put("tab1_success.csv", ["peg", "n_success", "n_total", "success_rate_percent"], rate_rows)
    if report.linfits:
        put("tab3_linfits.csv",
            ["peg", "param", "slope", "intercept", "r_squared", "p_value", "n_bins", "significant"],
            [[peg, name, f.slope, f.intercept, f.r_squared, f.p_value, f.n, f.p_value < 0.05]
             for peg, fits in report.linfits.items() for name, f in fits.items()])
    if report.vaf:
        rows = []
        for peg, v in report.vaf.items():
            rows.append([peg, "successful", v["success_slope"], v["t"], v["p"], *v["success_vaf"]])
            rows.append([peg, "random_mean", v["random_slope"], v["t"], v["p"], *v["random_vaf"]])
        put("appB_vaf.csv", ["peg", "set", "vaf_slope", "t", "p_value"] + [f"vaf_pc{i + 1}" for i in range(8)],
            rows)
    if report.manova is not None:
        m = report.manova
        put("appE_manova.csv", ["d", "wilks_lambda", "chi2", "df", "p_value", "estimated_dimension", "regularized"],
            [[d, m.wilks[d], m.chi2[d], int(m.df[d]), m.p_values[d], m.dimension, m.regularized]
             for d in range(len(m.wilks))])
    return written
