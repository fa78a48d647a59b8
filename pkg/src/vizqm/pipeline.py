"""End-to-end analysis: load, resize, run every metric, rank, persist."""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .color import CvdKind, colorfulness, monochrome_view, simulate_cvd, table_versions, wave_score
from .corpus import METRICS, corpus_add, corpus_open, new_record, render_ranking
from .edges import detect_edges, edge_congestion
from .errors import DuplicateId, IncompleteBundle, InputError, StageError, VizQMError
from .imagecore import AnalysisConfig, ImageRGB, load_image, resize_to_analysis, save_png
from .saliency import MIN_SHORT_SIDE, compute_saliency, saliency_score, spectral_residual_saliency

SCHEMA_VERSION = 1
BUNDLE_FILE = "bundle.json"

# Artifacts the report cannot do without.
REQUIRED_ARTIFACTS = (
    "snapshot",
    "edges.overlay",
    "congestion.overlay",
    "saliency.overlay",
    "cvd.d",
    "cvd.p",
    "cvd.t",
    "cvd.m",
) + tuple(f"rank.{m}" for m in METRICS)


@dataclass(frozen=True)
class PipelineRun:
    input_path: Path
    corpus_path: Path
    out_dir: Path
    config: AnalysisConfig = field(default_factory=AnalysisConfig)
    dry_run: bool = False
    submission_id: str | None = None
    cohort: str = ""


@dataclass(frozen=True)
class AnalysisBundle:
    id: str
    image: dict
    scores: dict[str, float]
    percentiles: dict[str, float | None]
    corpus_sizes: dict[str, int]
    artifacts: dict[str, str]
    flags: dict
    config_fp: str
    config: dict
    tool_version: str
    snapshot_ts: int
    directory: Path | None = None
    schema: int = SCHEMA_VERSION

    def to_json(self) -> str:
        obj = {
            "schema": self.schema,
            "id": self.id,
            "tool_version": self.tool_version,
            "snapshot_ts": self.snapshot_ts,
            "image": self.image,
            "scores": self.scores,
            "percentiles": self.percentiles,
            "corpus_sizes": self.corpus_sizes,
            "artifacts": self.artifacts,
            "flags": self.flags,
            "config_fp": self.config_fp,
            "config": self.config,
        }
        return json.dumps(obj, indent=2, allow_nan=False) + "\n"

    def artifact_path(self, key: str) -> Path:
        if key not in self.artifacts:
            raise IncompleteBundle(key)
        path = (self.directory or Path(".")) / self.artifacts[key]
        if not path.is_file():
            raise IncompleteBundle(key)
        return path

    def check_complete(self) -> None:
        for key in REQUIRED_ARTIFACTS:
            self.artifact_path(key)
        for metric in METRICS:
            if metric not in self.scores:
                raise IncompleteBundle(f"scores.{metric}")


def load_bundle(directory: str | Path) -> AnalysisBundle:
    directory = Path(directory)
    path = directory / BUNDLE_FILE
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"no {BUNDLE_FILE} in {directory}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc.msg})") from None
    if obj.get("schema") != SCHEMA_VERSION:
        raise InputError(f"{path}: unsupported bundle schema {obj.get('schema')!r}")
    try:
        return AnalysisBundle(
            id=obj["id"], image=obj["image"], scores=obj["scores"], percentiles=obj["percentiles"],
            corpus_sizes=obj["corpus_sizes"], artifacts=obj["artifacts"], flags=obj["flags"],
            config_fp=obj["config_fp"], config=obj["config"], tool_version=obj["tool_version"],
            snapshot_ts=obj["snapshot_ts"], directory=directory,
        )
    except KeyError as exc:
        raise IncompleteBundle(str(exc.args[0])) from None


def _snapshot_ts(path: Path) -> int:
    env = os.environ.get("SOURCE_DATE_EPOCH")
    if env:
        return int(env)
    return int(path.stat().st_mtime)


def _default_id(path: Path, taken) -> str:
    digest = hashlib.sha256(path.read_bytes()).hexdigest()[:12]
    base = f"{path.stem}-{digest}"
    candidate, n = base, 1
    while candidate in taken:
        n += 1
        candidate = f"{base}-{n}"
    return candidate


def _stage(name: str, fn, *args):
    try:
        return fn(*args)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


@dataclass
class MetricOutputs:
    edges: object
    congestion: object
    saliency: object
    salient: object
    lowres: object
    cvd: dict
    mono: object
    wave: float
    colorfulness: float


def run_metrics(img: ImageRGB, cfg: AnalysisConfig, workers: int | None = None) -> MetricOutputs:
    """Run every metric on an analysis-resolution image. Pure; safe to call concurrently."""
    workers = workers or min(4, os.cpu_count() or 1)

    def edge_path():
        e = detect_edges(img, cfg)
        return e, edge_congestion(e, cfg)

    def saliency_path():
        s = compute_saliency(img)
        return s, saliency_score(s, cfg)

    jobs = {
        "edge-metrics": edge_path,
        "saliency": saliency_path,
        "lowres-saliency": lambda: spectral_residual_saliency(img),
        "color-metrics.cvd": lambda: {k.code: simulate_cvd(img, k, cfg) for k in CvdKind},
        "color-metrics.mono": lambda: monochrome_view(img),
        "color-metrics.wave": lambda: wave_score(img),
        "color-metrics.colorfulness": lambda: colorfulness(img),
    }
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {name: pool.submit(_stage, name, fn) for name, fn in jobs.items()}
        results = {name: f.result() for name, f in futures.items()}
    edges, congestion = results["edge-metrics"]
    smap, salient = results["saliency"]
    return MetricOutputs(edges, congestion, smap, salient, results["lowres-saliency"],
                         results["color-metrics.cvd"], results["color-metrics.mono"],
                         results["color-metrics.wave"], results["color-metrics.colorfulness"])


def analyze(run: PipelineRun) -> AnalysisBundle:
    cfg = run.config
    input_path = Path(run.input_path)
    original = _stage("image-core", load_image, input_path)
    img = _stage("image-core", resize_to_analysis, original, cfg)

    versions = _stage("color-metrics", table_versions)
    config_fp = cfg.fingerprint(versions)
    out = run_metrics(img, cfg)

    scores = {
        "S_ec": out.congestion.score,
        "S_sy": out.salient.score,
        "S_wv": out.wave,
        "S_hs": out.colorfulness,
    }

    store = _stage("corpus-ranking", corpus_open, run.corpus_path)
    if run.submission_id is not None:
        sub_id = run.submission_id
        if sub_id in store and not run.dry_run:
            raise StageError("corpus-ranking", DuplicateId(sub_id))
    else:
        sub_id = _default_id(input_path, store)
    rankings = {m: _stage("corpus-ranking", store.rank, m, s) for m, s in scores.items()}

    stem = input_path.stem
    out_dir = Path(run.out_dir)
    panels = {
        "snapshot": (f"{stem}_analysis.png", img),
        "edges.overlay": (f"{stem}_edges.png", out.edges.overlay()),
        "congestion.overlay": (f"{stem}_congestion.png", out.congestion.overlay),
        "saliency.overlay": (f"{stem}_saliency.png", out.saliency.image()),
        "saliency.mask": (f"{stem}_salientmask.png", out.salient.mask_image()),
        "lowres_saliency.overlay": (f"{stem}_lowres_saliency.png", out.lowres),
        "cvd.d": (f"{stem}_cvd_d.png", out.cvd["d"]),
        "cvd.p": (f"{stem}_cvd_p.png", out.cvd["p"]),
        "cvd.t": (f"{stem}_cvd_t.png", out.cvd["t"]),
        "cvd.m": (f"{stem}_mono.png", out.mono),
    }
    for metric, result in rankings.items():
        panels[f"rank.{metric}"] = (f"{stem}_rank_{metric}.png", _stage("corpus-ranking", render_ranking, result))

    px = original.pixels
    flags = {
        "degenerate_image": bool((px == px[0, 0]).all()),
        "saliency_degenerate": bool(out.saliency.degenerate),
        "no_edges": out.edges.edge_count == 0,
        "resized": (img.width, img.height) != (original.width, original.height),
        "saliency_upscaled": min(img.width, img.height) < MIN_SHORT_SIDE,
        "dry_run": bool(run.dry_run),
        "corpus_config_mismatch": sum(1 for r in store if r.config_fp != config_fp),
    }
    snapshot_ts = _snapshot_ts(input_path)
    bundle = AnalysisBundle(
        id=sub_id,
        image={
            "source": input_path.name,
            "original": {"width": original.width, "height": original.height},
            "analysis": {"width": img.width, "height": img.height},
        },
        scores=scores,
        percentiles={m: r.percentile for m, r in rankings.items()},
        corpus_sizes={m: r.corpus_size for m, r in rankings.items()},
        artifacts={k: name for k, (name, _) in panels.items()},
        flags=flags,
        config_fp=config_fp,
        config=asdict(cfg),
        tool_version=__version__,
        snapshot_ts=snapshot_ts,
        directory=out_dir,
    )

    def write_outputs():
        out_dir.mkdir(parents=True, exist_ok=True)
        # zlib releases the GIL, so panel encoding parallelizes.
        with ThreadPoolExecutor(max_workers=min(4, os.cpu_count() or 1)) as pool:
            list(pool.map(lambda item: save_png(item[1], out_dir / item[0]), panels.values()))
        (out_dir / BUNDLE_FILE).write_text(bundle.to_json(), encoding="utf-8")

    _stage("write", write_outputs)
    if not run.dry_run:
        record = new_record(sub_id, scores, config_fp, cohort=run.cohort, ts=snapshot_ts)
        _stage("corpus-ranking", corpus_add, store, record)
    return bundle


__all__ = [
    "AnalysisBundle",
    "PipelineRun",
    "VizQMError",
    "analyze",
    "load_bundle",
    "run_metrics",
]
