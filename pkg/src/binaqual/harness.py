"""Batch evaluation over CSV manifests, correlation statistics and Box-Cox."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .audio_io import read_wav
from .errors import BinaqualError, DegenerateInput, EmptyManifest, IoFailure, NonPositiveValue
from .metric import MetricConfig, binaqual
from .nsim import fmean

REPORT_SCHEMA_VERSION = 1
MANIFEST_COLUMNS = ("ref_path", "test_path", "label", "group", "subjective_score")
Z_95 = 1.96


def fmt_float(x: float | None) -> str:
    """Nine significant digits, the fixed precision of every emitted number."""
    if x is None:
        return ""
    return format(float(x), ".9g")


def round9(x: float | None):
    return None if x is None else float(fmt_float(x))


# -- statistics ---------------------------------------------------------------

def _check_pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise DegenerateInput("x and y must be 1-D sequences of equal length")
    if x.shape[0] < 2:
        raise DegenerateInput("need at least two observations")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DegenerateInput("inputs must be finite")
    return x, y


def pearson(x, y) -> float:
    """Sample Pearson product-moment correlation."""
    x, y = _check_pair(x, y)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateInput("zero variance")
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def average_ranks(values) -> np.ndarray:
    """1-based ranks; tied values share the mean of the ranks they span."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="mergesort")
    ranks = np.empty(v.shape[0])
    sorted_v = v[order]
    i = 0
    while i < v.shape[0]:
        j = i
        while j + 1 < v.shape[0] and sorted_v[j + 1] == sorted_v[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Pearson correlation of average-ranked data."""
    x, y = _check_pair(x, y)
    return pearson(average_ranks(x), average_ranks(y))


def box_cox(values, lam: float, epsilon: float = 0.0) -> np.ndarray:
    """``(v**lam - 1) / lam``, or ``log(v)`` when ``lam == 0``.

    ``epsilon`` is added to every value first; pass a positive shift when the
    data contain zeros.
    """
    v = np.asarray(values, dtype=np.float64) + epsilon
    if np.any(~(v > 0)):
        raise NonPositiveValue("Box-Cox needs strictly positive values; supply a positive shift epsilon")
    if lam == 0:
        return np.log(v)
    return np.expm1(lam * np.log(v)) / lam


# -- manifests ----------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    ref_path: str
    test_path: str
    label: str = ""
    group: str = ""
    subjective_score: float | None = None

    def __post_init__(self):
        if not self.ref_path or not self.test_path:
            raise ValueError("ref_path and test_path must be non-empty")
        if self.subjective_score is not None and not math.isfinite(self.subjective_score):
            raise ValueError("subjective_score must be finite")


def parse_manifest(text: str) -> list[ManifestEntry]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise EmptyManifest("manifest has no header")
    header = [h.strip() for h in reader.fieldnames]
    missing = [c for c in MANIFEST_COLUMNS[:4] if c not in header]
    if missing:
        raise EmptyManifest(f"manifest header lacks columns {missing}")
    entries = []
    for lineno, raw in enumerate(reader, start=2):
        row = {k.strip(): (v or "").strip() for k, v in raw.items() if k is not None}
        score = row.get("subjective_score", "")
        try:
            entries.append(ManifestEntry(row["ref_path"], row["test_path"], row["label"], row["group"],
                                         float(score) if score else None))
        except ValueError as exc:
            raise EmptyManifest(f"manifest line {lineno}: {exc}") from None
    if not entries:
        raise EmptyManifest("manifest contains no entries")
    return entries


def read_manifest(path: str | os.PathLike) -> tuple[list[ManifestEntry], str]:
    """Parse a manifest file; returns the entries and the directory relative paths resolve against."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read manifest {path}: {exc.strerror or exc}") from exc
    return parse_manifest(text), os.path.dirname(os.path.abspath(path))


# -- batch evaluation ---------------------------------------------------------

@dataclass(frozen=True)
class BatchRow:
    index: int
    label: str
    group: str
    ref_path: str
    test_path: str
    nsim_left: float
    nsim_right: float
    ls: float
    n_patches: int
    warnings: tuple[str, ...]
    subjective_score: float | None = None
    ls_boxcox: float | None = None


@dataclass(frozen=True)
class BatchFailure:
    index: int
    label: str
    group: str
    error: str


@dataclass(frozen=True)
class GroupAggregate:
    group: str
    n: int
    mean_ls: float
    sd_ls: float
    ci_low: float
    ci_high: float
    pearson: float | None = None
    spearman: float | None = None


@dataclass
class BatchReport:
    rows: list[BatchRow]
    failures: list[BatchFailure]
    aggregates: list[GroupAggregate]
    correlations: dict | None = None
    boxcox: dict | None = None
    config_fingerprint: str | None = None
    n_entries: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def exit_status(self) -> int:
        if not self.failures:
            return 0
        return 3 if self.rows else 2

    def to_json_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "n_entries": self.n_entries,
            "config_fingerprint": self.config_fingerprint,
            "rows": [{
                "index": r.index, "label": r.label, "group": r.group,
                "ref_path": r.ref_path, "test_path": r.test_path,
                "nsim_left": round9(r.nsim_left), "nsim_right": round9(r.nsim_right),
                "ls": round9(r.ls), "ls_boxcox": round9(r.ls_boxcox),
                "n_patches": r.n_patches, "subjective_score": round9(r.subjective_score),
                "warnings": list(r.warnings),
            } for r in self.rows],
            "failures": [{"index": f.index, "label": f.label, "group": f.group, "error": f.error}
                         for f in self.failures],
            "aggregates": [{
                "group": a.group, "n": a.n, "mean_ls": round9(a.mean_ls), "sd_ls": round9(a.sd_ls),
                "ci95_low": round9(a.ci_low), "ci95_high": round9(a.ci_high),
                "pearson": round9(a.pearson), "spearman": round9(a.spearman),
            } for a in self.aggregates],
            "correlations": None if self.correlations is None else
            {k: (round9(v) if isinstance(v, float) else v) for k, v in self.correlations.items()},
            "boxcox": None if self.boxcox is None else
            {k: round9(v) for k, v in self.boxcox.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=False) + "\n"

    def rows_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "label", "group", "ref_path", "test_path", "status", "nsim_left",
                    "nsim_right", "ls", "ls_boxcox", "n_patches", "subjective_score", "warnings", "error"])
        merged = [(r.index, r) for r in self.rows] + [(f.index, f) for f in self.failures]
        for _, item in sorted(merged, key=lambda t: t[0]):
            if isinstance(item, BatchRow):
                w.writerow([item.index, item.label, item.group, item.ref_path, item.test_path, "ok",
                            fmt_float(item.nsim_left), fmt_float(item.nsim_right), fmt_float(item.ls),
                            fmt_float(item.ls_boxcox), item.n_patches, fmt_float(item.subjective_score),
                            "; ".join(item.warnings), ""])
            else:
                w.writerow([item.index, item.label, item.group, "", "", "error",
                            "", "", "", "", "", "", "", item.error])
        return buf.getvalue()

    def groups_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["group", "n", "mean_ls", "sd_ls", "ci95_low", "ci95_high", "pearson", "spearman"])
        for a in self.aggregates:
            w.writerow([a.group, a.n, fmt_float(a.mean_ls), fmt_float(a.sd_ls), fmt_float(a.ci_low),
                        fmt_float(a.ci_high), fmt_float(a.pearson), fmt_float(a.spearman)])
        if self.correlations and self.correlations.get("pearson") is not None:
            w.writerow(["*", self.correlations["n"], "", "", "", "",
                        fmt_float(self.correlations["pearson"]), fmt_float(self.correlations["spearman"])])
        return buf.getvalue()


def _resolve(path: str, base_dir: str | None) -> str:
    if base_dir is None or os.path.isabs(path):
        return path
    return os.path.join(base_dir, path)


def _evaluate(index: int, entry: ManifestEntry, config: MetricConfig, base_dir: str | None):
    try:
        ref = read_wav(_resolve(entry.ref_path, base_dir))
        test = read_wav(_resolve(entry.test_path, base_dir))
        res = binaqual(ref, test, config)
    except BinaqualError as exc:
        return BatchFailure(index, entry.label, entry.group, f"{exc.category}: {exc}"), None
    row = BatchRow(index, entry.label, entry.group, entry.ref_path, entry.test_path,
                   res.left.nsim, res.right.nsim, res.ls, res.left.n_patches,
                   tuple(f"{w.code}: {w.detail}" for w in res.warnings), entry.subjective_score)
    return row, res.config_fingerprint


def _safe_corr(fn, x, y):
    try:
        return fn(x, y)
    except DegenerateInput:
        return None


def aggregate_groups(rows: list[BatchRow]) -> list[GroupAggregate]:
    """Per-group mean LS with a normal-approximation 95% interval (approximate for small n)."""
    groups: dict[str, list[BatchRow]] = {}
    for r in rows:
        groups.setdefault(r.group, []).append(r)
    out = []
    for name in sorted(groups):
        members = groups[name]
        ls = [r.ls for r in members]
        n = len(ls)
        mean = fmean(ls)
        sd = math.sqrt(math.fsum((v - mean) ** 2 for v in ls) / (n - 1)) if n > 1 else 0.0
        half = Z_95 * sd / math.sqrt(n)
        scored = [r for r in members if r.subjective_score is not None]
        p = s = None
        if len(scored) >= 2:
            xs = [r.ls for r in scored]
            ys = [r.subjective_score for r in scored]
            p, s = _safe_corr(pearson, xs, ys), _safe_corr(spearman, xs, ys)
        out.append(GroupAggregate(name, n, mean, sd, mean - half, mean + half, p, s))
    return out


def run_batch(manifest, config: MetricConfig = MetricConfig(), jobs: int = 1,
              base_dir: str | None = None, boxcox_lambda: float | None = None,
              boxcox_epsilon: float = 0.0) -> BatchReport:
    """Score every manifest entry; failures are recorded instead of aborting the batch.

    Rows are keyed by manifest index, so the report does not depend on ``jobs``.
    """
    manifest = list(manifest)
    if not manifest:
        raise EmptyManifest("manifest contains no entries")
    jobs = max(1, int(jobs))
    if jobs == 1:
        results = [_evaluate(i, e, config, base_dir) for i, e in enumerate(manifest)]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda ie: _evaluate(ie[0], ie[1], config, base_dir),
                                    enumerate(manifest)))

    rows = [r for r, _ in results if isinstance(r, BatchRow)]
    failures = [r for r, _ in results if isinstance(r, BatchFailure)]
    fingerprints = sorted({fp for _, fp in results if fp})

    boxcox_meta = None
    if boxcox_lambda is not None and rows:
        transformed = box_cox([r.ls for r in rows], boxcox_lambda, boxcox_epsilon)
        rows = [BatchRow(**{**r.__dict__, "ls_boxcox": float(t)}) for r, t in zip(rows, transformed)]
        boxcox_meta = {"lambda": float(boxcox_lambda), "epsilon": float(boxcox_epsilon)}

    correlations = None
    scored = [r for r in rows if r.subjective_score is not None]
    if scored:
        xs = [r.ls for r in scored]
        ys = [r.subjective_score for r in scored]
        correlations = {"n": len(scored), "pearson": _safe_corr(pearson, xs, ys),
                        "spearman": _safe_corr(spearman, xs, ys)}

    return BatchReport(rows=rows, failures=failures, aggregates=aggregate_groups(rows),
                       correlations=correlations, boxcox=boxcox_meta,
                       config_fingerprint=fingerprints[0] if len(fingerprints) == 1 else None,
                       n_entries=len(manifest))
