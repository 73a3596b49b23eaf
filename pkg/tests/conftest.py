import numpy as np
import pytest

from fruitgrade import synth
from fruitgrade.segment import FruitView


def disk_mask(radius, pad=4):
    side = 2 * radius + 1 + 2 * pad
    yy, xx = np.mgrid[0:side, 0:side]
    c = side // 2
    return (xx - c) ** 2 + (yy - c) ** 2 <= radius * radius


def ellipse_mask(a, b, pad=4):
    h, w = 2 * b + 1 + 2 * pad, 2 * a + 1 + 2 * pad
    yy, xx = np.mgrid[0:h, 0:w]
    return ((xx - w // 2) / a) ** 2 + ((yy - h // 2) / b) ** 2 <= 1.0


def view_from_rgb(crop, mask, mm_per_pixel=0.25):
    from fruitgrade.imgcore import to_grayscale

    return FruitView(crop=crop, mask=mask, gray=to_grayscale(crop), mm_per_pixel=mm_per_pixel)


def uniform_view(mask, rgb, mm_per_pixel=0.25):
    crop = np.full(mask.shape + (3,), 255, np.uint8)
    crop[mask] = rgb
    return view_from_rgb(crop, mask, mm_per_pixel)


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """3 grades x 6 images rendered once per session."""
    out = tmp_path_factory.mktemp("corpus")
    spec = synth.default_spec(samples_per_grade=6, seed=11)
    synth.generate_synthetic_corpus(spec, out)
    return out, spec


ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
