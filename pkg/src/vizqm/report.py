"""Rubric/feedback loading and assembly of the self-contained HTML feedback report."""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from html import escape
from pathlib import Path

from .corpus import METRIC_LABELS, METRICS
from .errors import InputError, MarkOutOfRange, MissingObjective, SchemaError
from .pipeline import AnalysisBundle

PENDING = "pending human assessment"

CITATIONS = {
    "canny": "J. Canny. A computational approach to edge detection. "
             "IEEE Trans. Pattern Analysis and Machine Intelligence 8(6):679-698, 1986.",
    "congestion": "A. Miniukovich and A. De Angeli. Quantification of interface visual complexity. "
                  "Proc. AVI 2014; after R. Rosenholtz, Y. Li and L. Nakano. Measuring visual clutter. "
                  "Journal of Vision 7(2), 2007.",
    "itti": "L. Itti, C. Koch and E. Niebur. A model of saliency-based visual attention for rapid scene "
            "analysis. IEEE Trans. PAMI 20(11):1254-1259, 1998; L. Itti and C. Koch. A saliency-based "
            "search mechanism for overt and covert shifts of visual attention. Vision Research 40, 2000.",
    "machado": "G. M. Machado, M. M. Oliveira and L. A. F. Fernandes. A physiologically-based model for "
               "simulation of color vision deficiency. IEEE Trans. Visualization and Computer Graphics "
               "15(6):1291-1298, 2009.",
    "wave": "S. E. Palmer and K. B. Schloss. An ecological valence theory of human color preference. "
            "Proc. National Academy of Sciences 107(19):8877-8882, 2010.",
    "hasler": "D. Hasler and S. Susstrunk. Measuring colourfulness in natural images. "
              "Proc. SPIE Human Vision and Electronic Imaging VIII, 5007:87-95, 2003.",
}
EXTRA_CITATIONS = {
    "spectral": "X. Hou and L. Zhang. Saliency detection: a spectral residual approach. Proc. CVPR 2007.",
    "luma": "Monochrome view: ITU-R BT.601 luma weights 0.299 R + 0.587 G + 0.114 B "
            "(as used by OpenCV COLOR_RGB2GRAY).",
}

SECTION_IDS = (
    "cover",
    "marks",
    "congestion",
    "saliency",
    "cvd",
    "colour-scores",
    "written-feedback",
    "methodology",
)


# -- rubric / feedback ----------------------------------------------------------


@dataclass(frozen=True)
class Objective:
    id: str
    title: str
    description: str
    max_points: float
    metrics: tuple[str, ...] = ()


@dataclass(frozen=True)
class Rubric:
    objectives: tuple[Objective, ...]

    def __len__(self) -> int:
        return len(self.objectives)

    def get(self, objective_id: str) -> Objective:
        for o in self.objectives:
            if o.id == objective_id:
                return o
        raise KeyError(objective_id)

    @property
    def total_points(self) -> float:
        return sum(o.max_points for o in self.objectives)


@dataclass(frozen=True)
class FeedbackItem:
    objective: str
    mark: float
    max_points: float
    comment: str


@dataclass(frozen=True)
class FeedbackBundle:
    items: tuple[FeedbackItem, ...]
    overall: str
    marker: str

    @property
    def total(self) -> float:
        return sum(i.mark for i in self.items)


def _read_json(path: str | Path):
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(str(path), f"invalid JSON at line {exc.lineno} ({exc.msg})") from None


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _string(obj: dict, key: str, where: str, required: bool = True) -> str:
    if key not in obj:
        if required:
            raise SchemaError(f"{where}.{key}", "missing")
        return ""
    if not isinstance(obj[key], str):
        raise SchemaError(f"{where}.{key}", "must be a string")
    return obj[key]


def parse_rubric(data) -> Rubric:
    if not isinstance(data, dict):
        raise SchemaError("$", "expected a JSON object")
    objectives = data.get("objectives")
    if not isinstance(objectives, list) or not objectives:
        raise SchemaError("objectives", "must be a non-empty list")
    parsed, seen = [], set()
    for i, obj in enumerate(objectives):
        where = f"objectives[{i}]"
        if not isinstance(obj, dict):
            raise SchemaError(where, "must be an object")
        oid = _string(obj, "id", where)
        if not oid:
            raise SchemaError(f"{where}.id", "must be non-empty")
        if oid in seen:
            raise SchemaError(f"{where}.id", f"duplicate objective id {oid!r}")
        seen.add(oid)
        max_points = obj.get("max_points")
        if not _is_number(max_points) or max_points <= 0:
            raise SchemaError(f"{where}.max_points", "must be a number > 0")
        metrics = obj.get("metrics", [])
        if not isinstance(metrics, list) or not all(isinstance(m, str) for m in metrics):
            raise SchemaError(f"{where}.metrics", "must be a list of metric names")
        parsed.append(Objective(oid, _string(obj, "title", where), _string(obj, "description", where, False),
                                float(max_points), tuple(metrics)))
    return Rubric(tuple(parsed))


def load_rubric(path: str | Path) -> Rubric:
    return parse_rubric(_read_json(path))


def parse_feedback(data, rubric: Rubric) -> FeedbackBundle:
    if not isinstance(data, dict):
        raise SchemaError("$", "expected a JSON object")
    items = data.get("items")
    if not isinstance(items, list):
        raise SchemaError("items", "must be a list")
    by_id: dict[str, FeedbackItem] = {}
    for i, item in enumerate(items):
        where = f"items[{i}]"
        if not isinstance(item, dict):
            raise SchemaError(where, "must be an object")
        oid = _string(item, "objective", where)
        try:
            objective = rubric.get(oid)
        except KeyError:
            raise SchemaError(f"{where}.objective", f"unknown objective {oid!r}") from None
        if oid in by_id:
            raise SchemaError(f"{where}.objective", f"objective {oid!r} given more than once")
        mark = item.get("mark")
        if not _is_number(mark):
            raise SchemaError(f"{where}.mark", "must be a number")
        if not 0 <= mark <= objective.max_points:
            raise MarkOutOfRange(oid, mark, objective.max_points)
        by_id[oid] = FeedbackItem(oid, float(mark), objective.max_points, _string(item, "comment", where, False))
    for objective in rubric.objectives:
        if objective.id not in by_id:
            raise MissingObjective(objective.id)
    ordered = tuple(by_id[o.id] for o in rubric.objectives)
    return FeedbackBundle(ordered, _string(data, "overall", "$", False), _string(data, "marker", "$", False))


def load_feedback(path: str | Path, rubric: Rubric) -> FeedbackBundle:
    return parse_feedback(_read_json(path), rubric)


# -- rendering ------------------------------------------------------------------


@dataclass(frozen=True)
class ReportDocument:
    html: str
    machine_only: bool

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.html.encode("utf-8"))
        return path


CSS = """
body { font-family: Helvetica, Arial, sans-serif; color: #222; margin: 0; }
section.page { padding: 18mm 16mm; break-after: page; page-break-after: always; }
section.page:last-of-type { break-after: auto; page-break-after: auto; }
h1 { font-size: 22pt; margin: 0 0 8pt; }
h2 { font-size: 16pt; border-bottom: 1px solid #999; padding-bottom: 4pt; }
figure { margin: 6pt 0; display: inline-block; vertical-align: top; }
figure img { max-width: 100%; border: 1px solid #ccc; }
figcaption { font-size: 9pt; color: #555; }
.panels figure { width: 48%; }
table { border-collapse: collapse; margin: 8pt 0; }
td, th { border: 1px solid #bbb; padding: 3pt 6pt; text-align: left; }
.score, .pct { font-weight: bold; font-family: monospace; }
.cite { font-size: 8.5pt; color: #444; }
.placeholder { font-style: italic; color: #777; }
@page { size: A4; margin: 0; }
"""


def fmt_score(value: float) -> str:
    return f"{value:.4f}"


def fmt_percentile(value: float | None) -> str:
    return "n/a" if value is None else f"{value * 100:.1f}%"


def _img(bundle: AnalysisBundle, key: str, caption: str, required: bool = True) -> str:
    if not required and key not in bundle.artifacts:
        return ""
    data = base64.b64encode(bundle.artifact_path(key).read_bytes()).decode("ascii")
    return (f'<figure><img alt="{escape(caption)}" src="data:image/png;base64,{data}">'
            f"<figcaption>{escape(caption)}</figcaption></figure>")


def _cite(key: str) -> str:
    text = CITATIONS.get(key) or EXTRA_CITATIONS[key]
    return f'<p class="cite" data-cite="{key}">Method: {escape(text)}</p>'


def _score_line(bundle: AnalysisBundle, metric: str) -> str:
    pct = bundle.percentiles.get(metric)
    n = bundle.corpus_sizes.get(metric, 0)
    return (f'<p>{escape(METRIC_LABELS[metric])} {metric} = '
            f'<span class="score" data-metric="{metric}">{fmt_score(bundle.scores[metric])}</span>; '
            f'ranks above <span class="pct" data-metric="{metric}">{fmt_percentile(pct)}</span> '
            f"of {n} previously analysed submissions.</p>")


def _section(sid: str, title: str, body: str) -> str:
    return f'<section class="page" id="{sid}">\n<h2>{escape(title)}</h2>\n{body}\n</section>'


def _cover(bundle: AnalysisBundle) -> str:
    when = datetime.fromtimestamp(bundle.snapshot_ts, timezone.utc).strftime("%Y-%m-%d %H:%M UTC")
    orig, ana = bundle.image["original"], bundle.image["analysis"]
    return "\n".join([
        "<h1>Visualization feedback report</h1>",
        "<table>",
        f"<tr><th>Submission</th><td>{escape(bundle.id)}</td></tr>",
        f"<tr><th>Source file</th><td>{escape(str(bundle.image.get('source', '')))}</td></tr>",
        f"<tr><th>Snapshot time</th><td>{when}</td></tr>",
        f"<tr><th>Original size</th><td>{orig['width']} x {orig['height']} px</td></tr>",
        f"<tr><th>Analysis size</th><td>{ana['width']} x {ana['height']} px</td></tr>",
        f"<tr><th>Tool version</th><td>{escape(bundle.tool_version)}</td></tr>",
        "</table>",
        _img(bundle, "snapshot", "Submitted visualization (analysis resolution)"),
    ])


def _marks(rubric: Rubric, feedback: FeedbackBundle | None) -> str:
    if feedback is None:
        return f'<p class="placeholder">Marks: {PENDING}.</p>'
    rows = ["<table class=\"marks\">", "<tr><th>Objective</th><th>Title</th><th>Mark</th><th>Max</th>"
            "<th>Related metrics</th></tr>"]
    for objective, item in zip(rubric.objectives, feedback.items):
        rows.append(f"<tr><td>{escape(objective.id)}</td><td>{escape(objective.title)}</td>"
                    f"<td>{item.mark:g}</td><td>{objective.max_points:g}</td>"
                    f"<td>{escape(', '.join(objective.metrics))}</td></tr>")
    rows.append(f"<tr><th colspan=\"2\">Total</th><th>{feedback.total:g}</th>"
                f"<th>{rubric.total_points:g}</th><th></th></tr>")
    rows.append("</table>")
    if feedback.marker:
        rows.append(f"<p>Marker: {escape(feedback.marker)}</p>")
    return "\n".join(rows)


def _written(rubric: Rubric, feedback: FeedbackBundle | None) -> str:
    if feedback is None:
        return f'<p class="placeholder">Written feedback: {PENDING}.</p>'
    parts = []
    for objective, item in zip(rubric.objectives, feedback.items):
        parts.append(f"<h3>{escape(objective.id)}: {escape(objective.title)}</h3>")
        if objective.description:
            parts.append(f"<p><em>{escape(objective.description)}</em></p>")
        parts.append(f"<p>{escape(item.comment) or '(no comment)'}</p>")
    if feedback.overall:
        parts.append(f"<h3>Overall</h3>\n<p>{escape(feedback.overall)}</p>")
    return "\n".join(parts)


def _methodology(bundle: AnalysisBundle) -> str:
    items = [f"<li>{_cite(k)}</li>" for k in (*CITATIONS, *EXTRA_CITATIONS)]
    cfg = "".join(f"<tr><th>{escape(k)}</th><td>{escape(str(v))}</td></tr>" for k, v in bundle.config.items())
    notes = []
    mismatch = bundle.flags.get("corpus_config_mismatch", 0)
    if mismatch:
        notes.append(f"{mismatch} corpus record(s) were produced with a different configuration or data "
                     "table version; they are still included in the rankings.")
    if bundle.flags.get("saliency_degenerate"):
        notes.append("The image has no contrast for the saliency model; the saliency map is blank.")
    if bundle.flags.get("no_edges"):
        notes.append("No edges were detected; the congestion score is defined as 0.")
    if bundle.flags.get("resized"):
        notes.append("The image was downscaled for analysis; scores refer to the analysis resolution.")
    notes.append("Rankings count the fraction of previously analysed submissions with a strictly "
                 "lower score (ties are not counted as exceeded).")
    return "\n".join([
        "<ol>", *items, "</ol>",
        f"<p>Configuration fingerprint <code>{escape(bundle.config_fp)}</code>.</p>",
        f"<table>{cfg}</table>",
        "<h3>Notes</h3>",
        "<ul>", *(f"<li>{escape(n)}</li>" for n in notes), "</ul>",
    ])


def assemble_report(bundle: AnalysisBundle, feedback: FeedbackBundle | None, rubric: Rubric,
                    *, machine_only: bool = False) -> ReportDocument:
    if feedback is None and not machine_only:
        raise InputError("feedback is required unless machine-only mode is requested")
    if machine_only:
        feedback = None
    bundle.check_complete()

    sections = [
        _section("cover", "Submission", _cover(bundle)),
        _section("marks", "Marks summary", _marks(rubric, feedback)),
        _section("congestion", "Edge congestion", "\n".join([
            '<div class="panels">',
            _img(bundle, "congestion.overlay", "Congested edge pixels (white)"),
            _img(bundle, "edges.overlay", "All detected edges"),
            "</div>",
            _score_line(bundle, "S_ec"),
            _img(bundle, "rank.S_ec", "Edge congestion ranking (green line: this submission)"),
            _cite("congestion"), _cite("canny"),
        ])),
        _section("saliency", "Saliency", "\n".join([
            '<div class="panels">',
            _img(bundle, "saliency.overlay", "Fine-detail saliency (brighter = more salient)"),
            _img(bundle, "saliency.mask", f"Salient pixels (level >= {bundle.config.get('saliency_threshold')})",
                 required=False),
            _img(bundle, "lowres_saliency.overlay", "Low-resolution saliency", required=False),
            "</div>",
            _score_line(bundle, "S_sy"),
            _img(bundle, "rank.S_sy", "Saliency ranking (green line: this submission)"),
            _cite("itti"), _cite("spectral"),
        ])),
        _section("cvd", "Colour vision", "\n".join([
            '<div class="panels">',
            _img(bundle, "cvd.d", "d: deuteranomaly"),
            _img(bundle, "cvd.p", "p: protanomaly"),
            _img(bundle, "cvd.t", "t: tritanomaly"),
            _img(bundle, "cvd.m", "m: monochrome"),
            "</div>",
            _cite("machado"), _cite("luma"),
        ])),
        _section("colour-scores", "Colour preference and colourfulness", "\n".join([
            _score_line(bundle, "S_wv"),
            _img(bundle, "rank.S_wv", "WAVE colour preference ranking (green line: this submission)"),
            _cite("wave"),
            _score_line(bundle, "S_hs"),
            _img(bundle, "rank.S_hs", "Colourfulness ranking (green line: this submission)"),
            _cite("hasler"),
        ])),
        _section("written-feedback", "Written feedback", _written(rubric, feedback)),
        _section("methodology", "Methods and references", _methodology(bundle)),
    ]
    html = "\n".join([
        "<!DOCTYPE html>",
        '<html lang="en">',
        "<head>",
        '<meta charset="utf-8">',
        f"<title>Feedback report: {escape(bundle.id)}</title>",
        f"<style>{CSS}</style>",
        "</head>",
        "<body>",
        *sections,
        "</body>",
        "</html>",
        "",
    ])
    return ReportDocument(html, feedback is None)


__all__ = [
    "CITATIONS",
    "FeedbackBundle",
    "METRICS",
    "ReportDocument",
    "Rubric",
    "assemble_report",
    "load_feedback",
    "load_rubric",
]
