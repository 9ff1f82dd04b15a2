import pytest
import torch

from lcsplit.datagen import CritterParams, make_critter_dataset
from lcsplit.model import ModelConfig, Mode, Variant

torch.set_num_threads(1)

TINY_PARAMS = CritterParams(canvas_size=48, stroke_len=32, n_join=8, strokes_per_channel=3, seed=0)


@pytest.fixture(scope="session")
def tiny_dataset():
    return make_critter_dataset(TINY_PARAMS, 12)


def tiny_config(variant=Variant.VANILLA, mode=Mode.HVAE, n_lc=0, **kw):
    base = dict(mode=mode, variant=variant, n_levels=2, n_lc=n_lc, patch_size=16, base_channels=4, z_channels=4)
    base.update(kw)
    return ModelConfig(**base)


# acceptance reporting -------------------------------------------------------

_CRITERIA: dict[int, tuple[str, str]] = {}


class CriterionRecorder:
    """Records one PASS/FAIL line per acceptance criterion."""

    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title
        self.details: list[str] = []

    def note(self, text: str) -> None:
        self.details.append(text)

    def line(self, status: str) -> str:
        extra = "; ".join(self.details)
        return f"criterion {self.number:>2} {status}: {self.title}" + (f" [{extra}]" if extra else "")


@pytest.fixture
def criterion(request):
    number, title = request.node.get_closest_marker("criterion").args
    rec = CriterionRecorder(number, title)
    yield rec
    failed = getattr(request.node, "_call_failed", True)
    status = "FAIL" if failed else "PASS"
    _CRITERIA[number] = (status, rec.line(status))
    print("\n" + rec.line(status))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item._call_failed = rep.failed


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[n][1])
