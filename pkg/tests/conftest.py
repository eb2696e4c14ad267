import numpy as np
import pytest
from scipy import ndimage

from sbas.config import data_path
from sbas.network import load_pairs
from sbas.scene_sim import wrap

ACCEPTANCE_RESULTS = []


@pytest.fixture(scope="session")
def table2():
    """(epochs, pairs) of the shipped 22-pair fixture."""
    return load_pairs(data_path("table2_pairs.csv"))


@pytest.fixture
def record_criterion():
    def record(number, name, passed, detail=""):
        ACCEPTANCE_RESULTS.append((number, name, bool(passed), detail))
    return record


def smooth_field(rng, shape=(64, 64), max_step=2.5, smoothing=6.0):
    """Random smooth field whose largest neighbour step is ``max_step`` rad."""
    f = ndimage.gaussian_filter(rng.standard_normal(shape), smoothing, mode="wrap")
    step = max(np.abs(np.diff(f, axis=0)).max(), np.abs(np.diff(f, axis=1)).max())
    return f * (max_step / step)


def residue_free_wrapped(rng, shape=(64, 64)):
    f = smooth_field(rng, shape)
    return f, wrap(f)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: r[0]):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number}. {name} {detail}".rstrip())
