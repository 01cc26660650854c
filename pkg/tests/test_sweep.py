import io
import math
import os

import numpy as np
import pytest
from pydantic import ValidationError

from vsystem.config import Settings
from vsystem.errors import DomainError
from vsystem.services import regime, spectral, sweep
from vsystem.utils.tables import write_csv


def _axis(name, lo, hi, points, spacing="log"):
    return sweep.Axis(name=name, min=lo, max=hi, points=points, spacing=spacing)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"name": "nbar", "min": 1.0, "max": 10.0, "points": 1},
        {"name": "nbar", "min": 0.0, "max": 10.0, "points": 5, "spacing": "log"},
        {"name": "nbar", "min": 10.0, "max": 1.0, "points": 5},
        {"name": "nbar", "min": 1.0, "max": math.inf, "points": 5},
        {"name": "gamma", "min": 1.0, "max": 2.0, "points": 5},
    ],
)
def test_axis_validation(kwargs):
    with pytest.raises(ValidationError):
        sweep.Axis(**kwargs)


def test_axis_values():
    assert _axis("p", 0.0, 1.0, 5, "linear").values().tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]
    np.testing.assert_allclose(_axis("nbar", 1.0, 100.0, 3).values(), [1.0, 10.0, 100.0])


@pytest.mark.parametrize(
    "axis2, fixed",
    [
        (("nbar", 1.0, 10.0), {"p": 1.0}),
        (("delta_over_gamma", 1.0, 10.0), {}),
        (("delta_over_gamma", 1.0, 10.0), {"p": 1.0, "theta": 0.3}),
        (("delta_over_gamma", 1.0, 10.0), {"p": 1.0, "nbar": 5.0}),
    ],
)
def test_grid_validation(axis2, fixed):
    with pytest.raises(ValidationError):
        sweep.GridSpec(
            axis1=_axis("nbar", 1.0, 10.0, 3),
            axis2=_axis(*axis2, 3),
            quantity="regime",
            fixed=fixed,
        )


def test_grid_params():
    grid = sweep.GridSpec(
        axis1=_axis("nbar", 1.0, 10.0, 3),
        axis2=_axis("delta_over_gamma", 1.0, 10.0, 3),
        quantity="regime",
        fixed={"p": 0.5},
        gamma=2.0,
    )
    params = grid.params_at(5.0, 3.0)
    assert (params.gamma, params.delta, params.p, params.nbar) == (2.0, 6.0, 0.5, 5.0)


def test_regime_frontier_follows_boundary():
    nbars = [10.0, 100.0, 1000.0]
    grid = sweep.GridSpec(
        axis1=sweep.Axis(name="nbar", min=10.0, max=1000.0, points=3, spacing="log"),
        axis2=_axis("delta_over_gamma", 1.0, 1e4, 41),
        quantity=sweep.Quantity.REGIME,
        fixed={"p": 1.0},
    )
    table = sweep.run(grid, workers=1)
    values = table.values()
    assert values.shape == (3, 41)
    assert table.columns == ("nbar", "delta_over_gamma", "regime", "error")
    ys = grid.axis2.values()
    for row, nbar in zip(values, nbars):
        boundary = regime.boundary_delta(1.0, nbar)
        assert np.all(row[ys < 0.95 * boundary] == -1.0)
        assert np.all(row[ys > 1.05 * boundary] == 1.0)
    assert regime.boundary_delta(1.0, 1000.0) == pytest.approx(0.6 * 1000.0, rel=0.05)


def test_worker_count_does_not_change_rows():
    grid = sweep.GridSpec(
        axis1=_axis("nbar", 0.1, 100.0, 4),
        axis2=_axis("p", 0.0, 1.0, 5, "linear"),
        quantity="discriminant",
        fixed={"delta_over_gamma": 2.0},
    )
    serial = sweep.run(grid, workers=1)
    parallel = sweep.run(grid, workers=2)
    assert serial.rows == parallel.rows


def test_regime_map_is_identical_for_any_worker_count():
    grid = sweep.GridSpec(
        axis1=_axis("nbar", 10.0, 1e4, 200),
        axis2=_axis("delta_over_gamma", 1.0, 1e4, 200),
        quantity="regime",
        fixed={"p": 1.0},
    )
    outputs = []
    for workers in (1, 2, 8):
        stream = io.StringIO()
        table = sweep.run(grid, workers=workers)
        rows = [(row.axis1, row.axis2, row.value, row.error) for row in table.rows]
        write_csv(stream, table.columns, rows, grid.header())
        outputs.append(stream.getvalue())
    assert len(outputs[0].splitlines()) == 4 + 1 + 200 * 200
    assert outputs[1] == outputs[0]
    assert outputs[2] == outputs[0]


def test_worker_resolution(monkeypatch):
    monkeypatch.setattr(sweep, "get_settings", lambda: Settings(_env_file=None, workers=3))
    assert sweep.resolve_workers(None) == 3
    assert sweep.resolve_workers(2) == 2
    assert sweep.resolve_workers(0) == (os.cpu_count() or 1)
    with pytest.raises(DomainError):
        sweep.resolve_workers(-1)


def test_grid_header_describes_swept_axes():
    grid = sweep.GridSpec(
        axis1=_axis("nbar", 10.0, 1000.0, 3),
        axis2=_axis("p", 0.0, 1.0, 5, "linear"),
        quantity="regime",
        fixed={"delta_over_gamma": 2.0},
        gamma=3.0,
    )
    assert grid.header() == {"gamma": 3.0, "delta": 6.0, "p": "0.0:1.0:5:linear", "nbar": "10.0:1000.0:3:log"}


def test_failed_cells_are_recorded():
    grid = sweep.GridSpec(
        axis1=_axis("nbar", 10.0, 1000.0, 3, "linear"),
        axis2=_axis("delta_over_gamma", 5.0, 10.0, 2, "linear"),
        quantity="lifetime",
        fixed={"p": 1.0},
    )
    table = sweep.run(grid, workers=1)
    values = table.values()
    assert np.all(np.isnan(values[0]))
    assert all(row.error.startswith("OutsideValidity") for row in table.rows[:2])
    assert np.all(np.isfinite(values[1:]))
    assert all(row.error == "" for row in table.rows[2:])


def test_epsilon_sweep_endpoints():
    grid = sweep.GridSpec(
        axis1=_axis("delta_over_gamma", 0.01, 100.0, 5),
        axis2=_axis("nbar", 1e3, 2e3, 2, "linear"),
        quantity="epsilon",
        fixed={"p": 1.0},
    )
    values = sweep.run(grid, workers=1).values()
    assert 1e-11 < values[0, 0] < 2e-10
    assert 2e-3 < values[-1, 0] < 1e-2
    assert np.all(values[:, 1] < values[:, 0])


def test_slow_eigenvalue_sweep_scales_quadratically():
    grid = sweep.GridSpec(
        axis1=_axis("delta_over_gamma", 0.01, 1.0, 5),
        axis2=_axis("nbar", 1e3, 1e4, 2),
        quantity="lambda2_mag",
        fixed={"p": 1.0},
    )
    values = sweep.run(grid, workers=1).values()
    slope = np.polyfit(np.log(grid.axis1.values()), np.log(values[:, 0]), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.05)


def test_z_term_magnitudes():
    table = sweep.zjk_magnitudes(np.linspace(0.2, 1.0, 81), 1e3, 0.1)
    assert table.magnitudes.shape == (81, 3, 3)
    assert all(error == "" for error in table.errors)
    assert np.all(table.dominates(1))
    assert table.dominates(2)[0]
    assert not table.dominates(2)[-1]
    low, high = table.crossing(2)
    assert low <= spectral.critical_p(1e3, 0.1) <= high


def test_z_term_magnitudes_outside_window():
    table = sweep.zjk_magnitudes([0.05, 0.5], 1e3, 0.1)
    assert table.errors[0].startswith("OutsideValidity")
    assert np.all(np.isnan(table.magnitudes[0]))
    assert table.errors[1] == ""


@pytest.mark.parametrize("nbar", [0.0, -1.0, math.nan])
def test_z_terms_need_positive_occupation(nbar):
    with pytest.raises(DomainError):
        sweep.zjk_magnitudes([0.5, 1.0], nbar, 0.1)
