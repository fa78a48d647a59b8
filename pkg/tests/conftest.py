import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from vizqm import testimage
from vizqm.imagecore import ImageRGB, save_png

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def chart():
    return testimage.generate()


@pytest.fixture(scope="session")
def chart_png(tmp_path_factory, chart):
    path = tmp_path_factory.mktemp("img") / "chart.png"
    save_png(chart.image, path)
    return path


@pytest.fixture
def rubric_path(tmp_path):
    dst = tmp_path / "rubric.json"
    shutil.copy(DATA / "rubric.json", dst)
    return dst


@pytest.fixture
def feedback_path(tmp_path):
    dst = tmp_path / "feedback.json"
    shutil.copy(DATA / "feedback.json", dst)
    return dst


@pytest.fixture
def write_json(tmp_path):
    def _write(name, obj):
        path = tmp_path / name
        path.write_text(json.dumps(obj), encoding="utf-8")
        return path

    return _write


def uniform(h, w, rgb):
    return ImageRGB(np.broadcast_to(np.array(rgb, np.uint8), (h, w, 3)).copy())


@pytest.fixture(scope="session")
def analyzed(tmp_path_factory, chart_png):
    """Bundle from one dry run of the pipeline on the generated test image."""
    from vizqm.pipeline import PipelineRun, analyze

    root = tmp_path_factory.mktemp("analyzed")
    return analyze(PipelineRun(chart_png, root / "corpus.jsonl", root / "out", dry_run=True))


_ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


@pytest.fixture
def criterion():
    """Record the outcome of one acceptance criterion for the summary block."""

    class _Gate:
        def __call__(self, number, title):
            self.number, self.title, self.detail = number, title, ""
            return self

        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            status = "PASS" if exc_type is None else "FAIL"
            detail = self.detail if exc is None else f"{exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
            _ACCEPTANCE[self.number] = (status, self.title, detail)
            print(f"[{status}] criterion {self.number}: {self.title} {detail}")
            return False

    return _Gate()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        status, title, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"{status}  {number:>2}. {title}  {detail}".rstrip())
