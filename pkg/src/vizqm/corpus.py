"""Append-only JSON-lines store of past scores, percentile ranking and ranking plots."""

from __future__ import annotations

import fcntl
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .errors import CorruptRecord, DuplicateId, InputError, UnknownMetric
from .imagecore import ImageRGB

METRICS = ("S_ec", "S_sy", "S_wv", "S_hs")
METRIC_LABELS = {
    "S_ec": "edge congestion",
    "S_sy": "saliency",
    "S_wv": "WAVE colour preference",
    "S_hs": "Hasler-Susstrunk colourfulness",
}
HIST_BINS = 20
RECORD_FIELDS = ("id", "ts", "cohort", "scores", "config_fp")


@dataclass(frozen=True)
class CorpusRecord:
    id: str
    ts: int
    cohort: str
    scores: dict[str, float]
    config_fp: str
    meta: dict = field(default_factory=dict)

    def to_json(self) -> str:
        obj = {"id": self.id, "ts": self.ts, "cohort": self.cohort,
               "scores": dict(self.scores), "config_fp": self.config_fp}
        if self.meta:
            obj["meta"] = dict(self.meta)
        return json.dumps(obj, sort_keys=False, separators=(",", ":"), allow_nan=False)

    @classmethod
    def from_obj(cls, obj) -> "CorpusRecord":
        if not isinstance(obj, dict):
            raise ValueError("record is not a JSON object")
        missing = [k for k in RECORD_FIELDS if k not in obj]
        if missing:
            raise ValueError(f"missing field(s) {', '.join(missing)}")
        if not isinstance(obj["id"], str) or not obj["id"]:
            raise ValueError("id must be a non-empty string")
        if not isinstance(obj["ts"], int) or isinstance(obj["ts"], bool):
            raise ValueError("ts must be an integer")
        if not isinstance(obj["cohort"], str):
            raise ValueError("cohort must be a string")
        if not isinstance(obj["config_fp"], str) or not obj["config_fp"]:
            raise ValueError("config_fp must be a non-empty string")
        scores = obj["scores"]
        if not isinstance(scores, dict):
            raise ValueError("scores must be an object")
        for name, value in scores.items():
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValueError(f"score {name!r} is not a finite number")
        meta = obj.get("meta", {})
        if not isinstance(meta, dict):
            raise ValueError("meta must be an object")
        return cls(obj["id"], obj["ts"], obj["cohort"],
                   {k: float(v) for k, v in scores.items()}, obj["config_fp"], meta)


@dataclass(frozen=True, eq=False)
class RankingResult:
    metric: str
    score: float
    percentile: float | None
    corpus_size: int
    bin_edges: np.ndarray
    counts: np.ndarray


class CorpusStore:
    """In-memory snapshot of a corpus file plus the append path for new records."""

    def __init__(self, path: str | Path, records: list[CorpusRecord] | None = None):
        self.path = Path(path)
        self.records: list[CorpusRecord] = list(records or [])
        self._ids = {r.id for r in self.records}

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, record_id: str) -> bool:
        return record_id in self._ids

    def __iter__(self):
        return iter(self.records)

    def scores(self, metric: str) -> np.ndarray:
        return np.array([r.scores[metric] for r in self.records if metric in r.scores], dtype=np.float64)

    def known_metrics(self) -> list[str]:
        names = list(METRICS)
        for r in self.records:
            names.extend(k for k in r.scores if k not in names)
        return names

    def add(self, record: CorpusRecord) -> CorpusRecord:
        return corpus_add(self, record)

    def rank(self, metric: str, score: float) -> RankingResult:
        return rank(self, metric, score)


def corpus_open(path: str | Path) -> CorpusStore:
    path = Path(path)
    if not path.exists():
        return CorpusStore(path)
    records: list[CorpusRecord] = []
    seen: set[str] = set()
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise CorruptRecord(text_line_of(path, exc.start), "not valid UTF-8") from None
    except OSError as exc:
        raise InputError(f"cannot read corpus {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = CorpusRecord.from_obj(json.loads(line))
        except (json.JSONDecodeError, ValueError) as exc:
            raise CorruptRecord(lineno, str(exc)) from None
        if record.id in seen:
            raise CorruptRecord(lineno, f"duplicate id {record.id!r}")
        seen.add(record.id)
        records.append(record)
    return CorpusStore(path, records)


def text_line_of(path: Path, byte_offset: int) -> int:
    return path.read_bytes()[:byte_offset].count(b"\n") + 1


def corpus_add(store: CorpusStore, record: CorpusRecord) -> CorpusRecord:
    """Append `record` to the file and the snapshot.

    A record whose config fingerprint differs from the latest stored record is
    accepted, with ``meta["config_mismatch"]`` set.
    """
    if record.id in store:
        raise DuplicateId(record.id)
    if store.records and store.records[-1].config_fp != record.config_fp:
        record = CorpusRecord(record.id, record.ts, record.cohort, record.scores, record.config_fp,
                              {**record.meta, "config_mismatch": True})
    line = record.to_json() + "\n"
    store.path.parent.mkdir(parents=True, exist_ok=True)
    with open(store.path, "a+b") as fh:
        fcntl.flock(fh, fcntl.LOCK_EX)
        try:
            # Another writer may have appended since our snapshot; re-check ids on disk.
            fh.seek(0)
            existing = fh.read()
            if existing and record.id in corpus_open(store.path):
                raise DuplicateId(record.id)
            prefix = b"\n" if existing and not existing.endswith(b"\n") else b""
            fh.write(prefix + line.encode("utf-8"))
            fh.flush()
        finally:
            fcntl.flock(fh, fcntl.LOCK_UN)
    store.records.append(record)
    store._ids.add(record.id)
    return record


def new_record(record_id: str, scores: dict[str, float], config_fp: str,
               cohort: str = "", ts: int | None = None) -> CorpusRecord:
    return CorpusRecord(record_id, int(time.time()) if ts is None else int(ts), cohort,
                        {k: float(v) for k, v in scores.items()}, config_fp)


def _histogram(values: np.ndarray, score: float) -> tuple[np.ndarray, np.ndarray]:
    lo = min(float(values.min()), score) if values.size else score
    hi = max(float(values.max()), score) if values.size else score
    if hi > lo:
        edges = np.linspace(lo, hi, HIST_BINS + 1)
        counts, _ = np.histogram(values, bins=edges)
    else:
        half = max(abs(lo) * 1e-9, 1e-9) / 2.0
        edges = np.array([lo - half, lo + half])
        counts = np.array([values.size])
    return edges, counts.astype(np.int64)


def rank(store: CorpusStore, metric: str, score: float) -> RankingResult:
    """Strict-less-than percentile of `score` among stored values of `metric`."""
    if metric not in store.known_metrics():
        raise UnknownMetric(metric)
    score = float(score)
    values = np.sort(store.scores(metric))
    n = values.size
    percentile = int(np.searchsorted(values, score, side="left")) / n if n else None
    edges, counts = _histogram(values, score)
    return RankingResult(metric, score, percentile, n, edges, counts)


# -- plot ---------------------------------------------------------------------

PLOT_W, PLOT_H = 640, 240
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 48, 24, 16, 48
BAR_GREY = (150, 150, 150)
AXIS = (40, 40, 40)
GREEN = (0, 255, 0)


def plot_x(result: RankingResult, value: float) -> int:
    """Column of `value` on the plot's x axis (affine map of the bin range)."""
    lo, hi = float(result.bin_edges[0]), float(result.bin_edges[-1])
    width = PLOT_W - MARGIN_L - MARGIN_R - 1
    return MARGIN_L + int(math.floor((value - lo) / (hi - lo) * width + 0.5))


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def render_ranking(result: RankingResult) -> ImageRGB:
    img = Image.new("RGB", (PLOT_W, PLOT_H), (255, 255, 255))
    draw = ImageDraw.Draw(img)
    font = ImageFont.load_default()
    x0, x1 = MARGIN_L, PLOT_W - MARGIN_R - 1
    y_top, y_base = MARGIN_T, PLOT_H - MARGIN_B

    counts = result.counts
    if result.corpus_size == 0:
        draw.text(((x0 + x1) // 2 - 40, (y_top + y_base) // 2 - 6), "no corpus data", fill=AXIS, font=font)
    else:
        peak = int(counts.max())
        for i, count in enumerate(counts):
            if count == 0:
                continue
            left = plot_x(result, float(result.bin_edges[i]))
            right = plot_x(result, float(result.bin_edges[i + 1]))
            if len(counts) == 1:
                left, right = x0, x1
            top = y_base - int(round((y_base - y_top) * count / peak))
            draw.rectangle([left, top, max(left, right - 1), y_base], fill=BAR_GREY)

    draw.line([(x0, y_base), (x1, y_base)], fill=AXIS)
    draw.line([(x0, y_top), (x0, y_base)], fill=AXIS)
    draw.text((x0, y_base + 4), _fmt(float(result.bin_edges[0])), fill=AXIS, font=font)
    hi_label = _fmt(float(result.bin_edges[-1]))
    draw.text((x1 - 6 * len(hi_label), y_base + 4), hi_label, fill=AXIS, font=font)
    label = METRIC_LABELS.get(result.metric, result.metric)
    caption = f"{result.metric} ({label})   corpus n = {result.corpus_size}"
    draw.text((x0, PLOT_H - 18), caption, fill=AXIS, font=font)
    draw.text((4, y_top), "count", fill=AXIS, font=font)

    gx = plot_x(result, result.score) if len(counts) > 1 else (x0 + x1) // 2
    draw.line([(gx, y_top), (gx, y_base)], fill=GREEN, width=1)
    return ImageRGB(np.asarray(img))
