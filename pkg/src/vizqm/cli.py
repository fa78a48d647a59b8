"""Command-line front end: analyze, report, corpus, selftest.

Exit codes: 0 success, 1 bad input or validation failure, 2 internal error
(including a failed selftest characterization).

Configuration precedence (lowest to highest): built-in defaults, the JSON file
given with --config, individual command-line flags.
"""

from __future__ import annotations

import argparse
import statistics
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .color import CvdKind
from .corpus import METRICS, corpus_open
from .errors import InputError, StageError, VizQMError
from .imagecore import AnalysisConfig, save_png, to_grayscale

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _err(msg: str) -> None:
    print(f"vizqm: {msg}", file=sys.stderr)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("analysis configuration (override --config)")
    g.add_argument("--config", type=Path, metavar="FILE",
                   help="JSON file of AnalysisConfig overrides")
    g.add_argument("--congestion-distance", type=int, metavar="PX",
                   help="max pixel distance between distinct edges to count as congested (default 4)")
    g.add_argument("--saliency-threshold", type=int, metavar="LEVEL",
                   help="saliency level I_k at or above which a pixel is salient (default 64)")
    g.add_argument("--max-dimension", type=int, metavar="PX",
                   help="longest side of the analysis raster (default 1280)")
    g.add_argument("--cvd-severity", type=float, metavar="S",
                   help="colour vision deficiency severity in [0, 1] (default 1.0)")


def _config_from_args(args) -> AnalysisConfig:
    values = asdict(AnalysisConfig.from_file(args.config)) if args.config else {}
    for flag in ("congestion_distance", "saliency_threshold", "max_dimension", "cvd_severity"):
        v = getattr(args, flag)
        if v is not None:
            values[flag] = v
    return AnalysisConfig.from_mapping(values)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vizqm", description="Visualization quality metrics and feedback reports.")
    parser.add_argument("--version", action="version", version=f"vizqm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="run every metric on a PNG, rank it and record it in the corpus",
                       description="Run every metric on a PNG, rank the scores against the corpus and "
                                   "(unless --dry-run) append them to it.")
    p.add_argument("image", type=Path, help="submitted visualization (PNG)")
    p.add_argument("--corpus", type=Path, required=True, metavar="FILE", help="JSON-lines corpus file")
    p.add_argument("--out", type=Path, required=True, metavar="DIR",
                   help="output directory for bundle.json and PNG panels")
    p.add_argument("--dry-run", action="store_true", help="rank against the corpus without adding to it")
    p.add_argument("--id", dest="submission_id", metavar="STRING",
                   help="submission id (default: file stem plus content hash)")
    p.add_argument("--cohort", default="", metavar="TAG", help="cohort tag stored with the corpus record")
    _add_config_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="assemble the HTML feedback report",
                       description="Assemble the paginated HTML feedback report from an analysis bundle, "
                                   "a rubric and (optionally) marker feedback.")
    p.add_argument("--bundle", type=Path, required=True, metavar="DIR",
                   help="directory written by 'analyze' (contains bundle.json)")
    p.add_argument("--rubric", type=Path, required=True, metavar="FILE", help="rubric JSON file")
    p.add_argument("--feedback", type=Path, metavar="FILE",
                   help="marker feedback JSON; omit for a machine-only report")
    p.add_argument("--out", type=Path, required=True, metavar="FILE", help="output HTML file")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("corpus", help="inspect a corpus file",
                       description="List corpus records or print per-metric statistics.")
    p.add_argument("action", choices=("list", "stats"), help="list records, or per-metric count/min/median/max")
    p.add_argument("--corpus", type=Path, required=True, metavar="FILE", help="JSON-lines corpus file")
    p.set_defaults(func=cmd_corpus)

    p = sub.add_parser("selftest", help="run the metrics on a generated test image and check their behaviour",
                       description="Generate the disc/text/clutter test image, write every metric panel and "
                                   "check the expected characterization properties.")
    p.add_argument("--out", type=Path, required=True, metavar="DIR", help="output directory for panels")
    _add_config_flags(p)
    p.set_defaults(func=cmd_selftest)
    return parser


def cmd_analyze(args) -> int:
    from .pipeline import PipelineRun, analyze

    if not args.image.is_file():
        _err(f"cannot read image: {args.image}")
        return EXIT_INPUT
    cfg = _config_from_args(args)
    run = PipelineRun(args.image, args.corpus, args.out, cfg, args.dry_run, args.submission_id, args.cohort)
    bundle = analyze(run)
    print(f"{bundle.id}  ({bundle.image['analysis']['width']}x{bundle.image['analysis']['height']})")
    for metric in METRICS:
        pct = bundle.percentiles[metric]
        pct_text = "n/a" if pct is None else f"{pct * 100:.1f}%"
        print(f"  {metric}  {bundle.scores[metric]:.4f}  percentile {pct_text}  "
              f"(corpus {bundle.corpus_sizes[metric]})")
    return EXIT_OK


def cmd_report(args) -> int:
    from .pipeline import load_bundle
    from .report import assemble_report, load_feedback, load_rubric

    bundle = load_bundle(args.bundle)
    rubric = load_rubric(args.rubric)
    feedback = load_feedback(args.feedback, rubric) if args.feedback else None
    doc = assemble_report(bundle, feedback, rubric, machine_only=feedback is None)
    doc.write(args.out)
    mode = "machine-only" if doc.machine_only else "full"
    print(f"wrote {mode} report {args.out}")
    return EXIT_OK


def cmd_corpus(args) -> int:
    store = corpus_open(args.corpus)
    if args.action == "list":
        print("\t".join(["id", "ts", "cohort", *METRICS, "config_fp"]))
        for r in store:
            cells = [f"{r.scores[m]:.4f}" if m in r.scores else "-" for m in METRICS]
            print("\t".join([r.id, str(r.ts), r.cohort, *cells, r.config_fp]))
        return EXIT_OK
    print(f"{'metric':<8}{'count':>8}{'min':>12}{'median':>12}{'max':>12}")
    for metric in store.known_metrics():
        values = store.scores(metric)
        if values.size == 0:
            print(f"{metric:<8}{0:>8}{'-':>12}{'-':>12}{'-':>12}")
            continue
        print(f"{metric:<8}{values.size:>8}{values.min():>12.4f}"
              f"{statistics.median(values.tolist()):>12.4f}{values.max():>12.4f}")
    return EXIT_OK


def _check(results: list, name: str, ok: bool, detail: str) -> None:
    results.append(ok)
    print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


def cmd_selftest(args) -> int:
    from . import testimage
    from .pipeline import run_metrics

    cfg = _config_from_args(args)
    ti = testimage.generate()
    img = ti.image
    out = run_metrics(img, cfg)

    args.out.mkdir(parents=True, exist_ok=True)
    save_png(img, args.out / "selftest_input.png")
    save_png(out.edges.overlay(), args.out / "selftest_edges.png")
    save_png(out.congestion.overlay, args.out / "selftest_congestion.png")
    save_png(out.saliency.image(), args.out / "selftest_saliency.png")
    for code, panel in out.cvd.items():
        save_png(panel, args.out / f"selftest_cvd_{code}.png")
    save_png(out.mono, args.out / "selftest_mono.png")

    results: list[bool] = []
    sal = out.saliency.values.astype(np.float64)
    disc, text, clutter = sal[ti.disc_mask].mean(), sal[ti.text_mask].mean(), sal[ti.clutter_mask].mean()
    _check(results, "saliency ordering", disc > text > clutter,
           f"discs {disc:.1f} > text {text:.1f} > clutter lines {clutter:.1f}")

    congested = out.congestion.congested
    share = congested[ti.clutter_mask].sum() / max(1, congested.sum())
    _check(results, "congestion locality", share > 0.5,
           f"{share:.1%} of congested pixels lie in the clutter region (S_ec = {out.congestion.score:.4f})")

    px = img.pixels.astype(np.int16)
    red, blue = ti.disc_masks["red"], ti.disc_masks["blue"]
    for kind, region, label in ((CvdKind.DEUTERANOMALY, red, "red"), (CvdKind.PROTANOMALY, red, "red"),
                                (CvdKind.TRITANOMALY, blue, "blue")):
        panel = out.cvd[kind.code].pixels.astype(np.int16)
        shift = float(np.abs(panel[region] - px[region]).mean())
        expect = cfg.cvd_severity > 0
        ok = (shift > 8.0) if expect else (shift == 0.0)
        _check(results, f"cvd {kind.value}", ok, f"mean change on {label} disc {shift:.1f} levels")

    mono_ok = np.array_equal(out.mono.pixels, to_grayscale(img).pixels)
    _check(results, "monochrome view", mono_ok, "matches luma conversion")

    means = {name: sal[m].mean() for name, m in ti.disc_masks.items()}
    lowest = min(means, key=means.get)
    print(f"NOTE  yellow-weakness characterization: lowest-salience disc is {lowest} "
          f"({', '.join(f'{k} {v:.1f}' for k, v in means.items())})")

    if all(results):
        print(f"selftest passed; panels in {args.out}")
        return EXIT_OK
    _err("selftest characterization failed")
    return EXIT_INTERNAL


def _exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        return _exit_code_for(exc.cause)
    return EXIT_INPUT if isinstance(exc, InputError) else EXIT_INTERNAL


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except VizQMError as exc:
        _err(str(exc))
        return _exit_code_for(exc)
    except Exception as exc:  # last-resort guard: report, don't dump a traceback
        _err(f"internal error: {exc.__class__.__name__}: {exc}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
