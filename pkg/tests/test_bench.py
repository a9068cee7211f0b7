import numpy as np
import pytest

from ripkit.bench import (ExponentFit, PhasePoint, fit_exponent, geometric_grid, matrix_passes,
                          phase_transition, read_csv, resolve_d, write_csv)
from ripkit.construct import gen_matrix


@pytest.mark.parametrize("c,e", [(3.0, 2.0), (0.5, 1.5), (10.0, 3.0)])
def test_fit_exact_power_law(c, e):
    pts = [(k, c * k**e) for k in range(2, 9)]
    fit = fit_exponent(pts)
    assert fit.slope == pytest.approx(e, abs=1e-9)
    assert fit.intercept == pytest.approx(np.log(c), abs=1e-9)
    assert fit.r2 == pytest.approx(1.0) and fit.points == 7


def test_fit_rejects_degenerate():
    with pytest.raises(ValueError):
        fit_exponent([(2, 10), (3, 20)])
    with pytest.raises(ValueError):
        fit_exponent([(4, 10), (4, 20), (4, 30)])
    with pytest.raises(ValueError):
        fit_exponent([(2, 10), (3, None), (4, 30)])


def test_geometric_grid():
    g = geometric_grid(10, 100, 2.0)
    assert g[0] == 10 and g[-1] >= 100 and np.all(np.diff(g) > 0)
    assert geometric_grid(5, 5, 1.5).tolist() == [5]
    with pytest.raises(ValueError):
        geometric_grid(10, 5, 2.0)


def test_resolve_d():
    assert resolve_d("power", 64, 3, 2.0, 0.25) == 6
    assert resolve_d(lambda k: 2 * k, 64, 3, 2.0, 0.25) == 6
    assert resolve_d("plan", 64, 3, 2.0, 0.25) >= 1
    with pytest.raises(ValueError):
        resolve_d("bogus", 64, 3, 2.0, 0.25)


def test_csv_round_trip(tmp_path):
    pts = [PhasePoint(64, 2, 1.5, 0.25, 120, 0.8, 5, 0, 7),
           PhasePoint(64, 3, 1.5, 0.25, None, 0.8, 5, 0, 9)]
    path = tmp_path / "pts.csv"
    write_csv(pts, path)
    assert read_csv(path) == pts


def test_k1_is_grid_bottom():
    (pt,) = phase_transition(32, 1.5, 0.25, [1], d_rule="power", trials=2, seed=0)
    assert pt.m_star == pt.diagnostics["grid_lo"] == pt.d


def test_phase_small_deterministic():
    kw = dict(d_rule=lambda k: 8 * k, trials=2, seed=3, num_supports=8, max_factor=64.0)
    a = phase_transition(32, 1.5, 0.25, [2, 3], **kw)
    b = phase_transition(32, 1.5, 0.25, [2, 3], **kw)
    assert a == b
    for pt in a:
        assert pt.m_star is not None and pt.m_star > pt.diagnostics["grid_lo"]
        ev = {int(m): v for m, v in pt.diagnostics["evaluated"].items()}
        assert ev[pt.m_star] and all(not v for m, v in ev.items() if m < pt.m_star)


def test_exhausted_bracket():
    (pt,) = phase_transition(32, 1.5, 0.01, [3], d_rule=lambda k: 1, trials=1, max_factor=2.0)
    assert pt.exhausted
    with pytest.raises(ValueError):
        fit_exponent([pt, (2, 3), (4, 5)])


def test_duplicate_columns_fail():
    A = gen_matrix(8, 4, 1, 2.0, 0)  # pigeonhole forces shared rows
    assert not matrix_passes(A, 2, 2.0, 0.25, 8, 0, incoherence=False)


def test_phase_validation():
    with pytest.raises(ValueError):
        phase_transition(16, 2.0, 0.25, [17])
    with pytest.raises(ValueError):
        phase_transition(16, 2.0, 0.25, [2], threshold=0)
