import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cafire.errors import DataError, DimensionError
from cafire.grid import (BURNING, BURNT, UNBURNT, ClassifierConfig, GridSpec, TemperatureRaster, classify_states,
                         coarsen_raster, monotone_collapse, one_hot, validate_statefield)


def test_gridspec_rejects_empty_grid():
    with pytest.raises(DimensionError):
        GridSpec(0, 3)


@given(st.integers(1, 12), st.integers(1, 12))
def test_cell_index_round_trip(nx, ny):
    grid = GridSpec(nx, ny)
    idx = np.arange(grid.n)
    rows, cols = grid.row_col(idx)
    assert np.array_equal(grid.cell_index(rows, cols), idx)
    assert len(set(zip(rows.tolist(), cols.tolist()))) == grid.n


def test_cell_index_is_row_major_from_southwest():
    grid = GridSpec(nx=4, ny=3)
    assert grid.cell_index(0, 0) == 0
    assert grid.cell_index(0, 3) == 3
    assert grid.cell_index(1, 0) == 4
    with pytest.raises(IndexError):
        grid.cell_index(3, 0)
    with pytest.raises(IndexError):
        grid.row_col(12)


def test_raster_validation():
    with pytest.raises(DataError):
        TemperatureRaster(np.zeros((1, 2, 2)), None)
    with pytest.raises(DataError):
        TemperatureRaster(np.full((2, 2, 2), 300.0), np.array([1, 1]))
    r = TemperatureRaster(np.full((2, 2), 300.0), None)
    assert r.values.shape == (1, 2, 2)


def test_coarsen_240x320_to_24x32():
    fine = TemperatureRaster(np.full((2, 240, 320), 310.0), np.arange(2))
    coarse = coarsen_raster(fine, 10, 10)
    assert coarse.values.shape == (2, 24, 32)
    assert np.array_equal(coarse.times, fine.times)


def test_coarsen_means():
    flat = TemperatureRaster(np.full((1, 2, 2), 300.0), None)
    assert coarsen_raster(flat, 2, 2).values[0, 0, 0] == 300.0
    mixed = TemperatureRaster(np.array([[[300.0, 300.0], [500.0, 500.0]]]), None)
    assert coarsen_raster(mixed, 2, 2).values[0, 0, 0] == 400.0


def test_coarsen_names_offending_axis():
    fine = TemperatureRaster(np.full((1, 4, 6), 300.0), None)
    with pytest.raises(DimensionError, match="x axis"):
        coarsen_raster(fine, 4, 2)
    with pytest.raises(DimensionError, match="y axis"):
        coarsen_raster(fine, 3, 3)


@given(arrays(float, (2, 6, 4), elements=st.floats(250, 1200)), st.sampled_from([1, 2, 3, 6]),
       st.sampled_from([1, 2, 4]))
def test_coarsen_preserves_sum(values, fy, fx):
    fine = TemperatureRaster(values, None)
    coarse = coarsen_raster(fine, fx, fy)
    assert np.allclose(coarse.values.sum(axis=(1, 2)) * fx * fy, values.sum(axis=(1, 2)), rtol=0, atol=1e-9)


@pytest.mark.parametrize("series, expected", [
    ([300] * 5, [1] * 5),
    ([300, 600, 600, 300, 300], [1, 2, 2, 3, 3]),
    ([300, 600, 290, 600, 300], [1, 2, 3, 3, 3]),
])
def test_classify_single_cell(series, expected):
    temps = np.array(series, dtype=float)[:, None]
    assert classify_states(temps, ClassifierConfig()).ravel().tolist() == expected


def test_classifier_config_validation():
    with pytest.raises(DataError):
        ClassifierConfig(ignition_threshold=0)
    with pytest.raises(DataError):
        ClassifierConfig(extinction_temp=290)


@given(arrays(float, (8, 5), elements=st.floats(280, 900)))
def test_classification_is_always_valid(temps):
    assert validate_statefield(classify_states(temps)) == []


@given(arrays(float, (6, 4), elements=st.floats(280, 900)), st.integers(1, 5))
def test_background_suffix_only_extends_final_state(temps, k):
    base = classify_states(temps)
    longer = classify_states(np.vstack([temps, np.full((k, temps.shape[1]), 300.0)]))
    assert np.array_equal(longer[: len(temps)], base)
    # after a background frame burning cells have burnt out, others keep their state
    tail = np.where(base[-1] == BURNING, BURNT, base[-1])
    assert np.all(longer[len(temps):] == tail)


def test_classify_accepts_raster():
    vals = np.full((3, 2, 2), 300.0)
    vals[1, 0, 1] = 700.0
    out = classify_states(TemperatureRaster(vals, None))
    assert out.shape == (3, 4)
    assert out[:, 1].tolist() == [1, 2, 3]


def test_validate_statefield_examples():
    ok = np.array([[1, 1, 2], [1, 2, 3], [2, 3, 3]])
    assert validate_statefield(ok) == []
    rev = np.ones((5, 8), dtype=int)
    rev[:3, 5] = 2
    v = validate_statefield(rev)
    assert len(v) == 1 and (v[0].cell, v[0].time) == (5, 3)
    bad = np.ones((2, 3), dtype=int)
    bad[1, 2] = 4
    v = validate_statefield(bad)
    assert any("outside" in x.reason for x in v)


def test_one_hot():
    oh = one_hot(np.array([1, 3, 2]))
    assert oh.tolist() == [[1, 0, 0], [0, 0, 1], [0, 1, 0]]


def test_monotone_collapse_folds_lower_states():
    p = np.array([[0.2, 0.5, 0.3]] * 3)
    out = monotone_collapse(p, np.array([UNBURNT, BURNING, BURNT]))
    assert np.allclose(out, [[0.2, 0.5, 0.3], [0.0, 0.7, 0.3], [0.0, 0.0, 1.0]])
    assert np.allclose(out.sum(axis=1), 1.0)
