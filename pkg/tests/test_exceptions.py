import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varbacktest.errors import DomainError, LengthMismatch, RangeError
from varbacktest.exceptions import (
    CellCounts,
    LevelGrid,
    VarForecastPanel,
    cell_counts,
    count_cells,
    exceedance_depths,
    expected_cell_probs,
)


def test_level_grid_values():
    g = LevelGrid(0.975, 4)
    assert np.allclose(g.levels, [0.975, 0.98125, 0.9875, 0.99375], rtol=0, atol=1e-15)
    assert g.bounds[0] == 0.0 and g.bounds[-1] == 1.0
    assert LevelGrid(0.99, 1).levels.tolist() == [0.99]


@pytest.mark.parametrize("N", [1, 2, 4, 8, 64])
def test_cell_probs_sum_to_one(N):
    p = expected_cell_probs(LevelGrid(0.975, N))
    assert p.sum() == pytest.approx(1.0, abs=1e-14)
    assert p[0] == 0.975
    assert np.allclose(p[1:], 0.025 / N)
    assert np.allclose(np.diff(LevelGrid(0.975, N).bounds), p)


@pytest.mark.parametrize("alpha,N", [(0.0, 2), (1.0, 2), (0.9, 0), (0.9, 2.5)])
def test_invalid_grid(alpha, N):
    with pytest.raises(DomainError):
        LevelGrid(alpha, N)


def test_strict_inequality_at_ties():
    panel = np.array([[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]])
    depths = exceedance_depths([1.0, 2.0, 2.5], panel).depths
    assert depths.tolist() == [0, 1, 2]


def _brute_force(losses, panel):
    counts = [0] * (panel.shape[1] + 1)
    for loss, row in zip(losses, panel):
        j = 0
        for v in row:
            if loss > v:
                j += 1
        counts[j] += 1
    return tuple(counts)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 60), N=st.integers(1, 6))
def test_counts_match_brute_force_bands(seed, n, N):
    rng = np.random.default_rng(seed)
    panel = np.sort(rng.normal(size=(n, N)), axis=1)
    losses = rng.normal(size=n) * 1.5
    c = count_cells(losses, panel)
    assert c.counts == _brute_force(losses, panel)
    assert c.n == n
    assert c.exceptions == int(np.sum(losses > panel[:, 0]))


def test_non_monotone_panel_names_the_row():
    with pytest.raises(DomainError, match="row 1"):
        VarForecastPanel(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        exceedance_depths([1.0, 2.0], np.ones((3, 2)))


def test_cell_counts_range_checks():
    with pytest.raises(RangeError):
        cell_counts(np.array([0, 1, 3]), N=2)
    with pytest.raises(RangeError):
        CellCounts((5, -1))
    assert cell_counts(np.array([0, 0, 2, 1]), N=2).counts == (2, 1, 1)


def test_cell_counts_array_protocol():
    c = CellCounts((3, 2, 1))
    assert np.asarray(c).tolist() == [3, 2, 1]
    assert c.N == 2 and c.exceptions == 3
