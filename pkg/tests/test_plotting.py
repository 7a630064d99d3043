"""SVG emitters: structure, determinism, golden-file stability."""

from pathlib import Path

import numpy as np
import pytest

from siqnn.plotting import svg_boxplot, svg_overlay, svg_ranking

GOLDEN = Path(__file__).parent / "golden"


def box_rows():
    return [
        {"molecule": "toy", "target": "transition_energy:T1", "model": m, "size": s,
         "n": 5, "median": 10.0**(-4 - i), "q1": 0.5 * 10.0**(-4 - i),
         "q3": 2.0 * 10.0**(-4 - i), "whisker_lo": 0.2 * 10.0**(-4 - i),
         "whisker_hi": 4.0 * 10.0**(-4 - i), "outliers": [10.0**(-2 - i)]}
        for i, m in enumerate(["gpr", "siqnn-nn"])
        for s in (4, 6)
    ]


def rank_rows():
    return [
        {"model": m, "size": s, "mean_rank": r, "sem": 0.1, "n": 20}
        for (m, s, r) in [("siqnn-nn", 4, 2.0), ("siqnn-nn", 6, 1.5),
                          ("gpr", 4, 1.8), ("gpr", 6, 2.6)]
    ]


def test_boxplot_svg_structure(tmp_path):
    path = tmp_path / "box.svg"
    svg_boxplot(box_rows(), path, title="toy")
    text = path.read_text()
    assert text.startswith("<svg") and text.endswith("</svg>")
    assert "<rect" in text and "<circle" in text
    assert "siqnn-nn" in text


def test_boxplot_empty_errors(tmp_path):
    with pytest.raises(ValueError):
        svg_boxplot([], tmp_path / "x.svg")


def test_ranking_svg_structure(tmp_path):
    path = tmp_path / "rank.svg"
    svg_ranking(rank_rows(), path)
    text = path.read_text()
    assert "polyline" in text
    assert "average rank" in text


def test_overlay_single_series(tmp_path):
    r = np.linspace(0.5, 2.0, 30)
    exact = 0.3 + 0.1 * np.sin(r)
    pred = exact + 0.01
    path = tmp_path / "overlay.svg"
    svg_overlay(r, exact, {"siqnn-nn": pred}, r[[2, 10]], exact[[2, 10]], path,
                title="toy", ylabel="Hartree")
    text = path.read_text()
    assert text.count("<polyline") == 2  # exact + one model
    assert "stroke-dasharray" in text   # exact curve is dashed


def test_svg_deterministic(tmp_path):
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    svg_ranking(rank_rows(), a)
    svg_ranking(rank_rows(), b)
    assert a.read_bytes() == b.read_bytes()


def test_golden_files(tmp_path):
    """Byte-exact comparison against the committed reference renderings."""
    cases = {
        "golden_box.svg": lambda p: svg_boxplot(box_rows(), p, title="golden"),
        "golden_rank.svg": lambda p: svg_ranking(rank_rows(), p),
    }
    for name, render in cases.items():
        golden = GOLDEN / name
        fresh = tmp_path / name
        render(fresh)
        if not golden.exists():  # first run: freeze the rendering
            GOLDEN.mkdir(exist_ok=True)
            golden.write_bytes(fresh.read_bytes())
        assert fresh.read_bytes() == golden.read_bytes(), f"{name} drifted"
