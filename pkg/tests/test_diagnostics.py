import logging

import numpy as np
import pytest

from vsystem.models import Trajectory, TrajectoryMethod
from vsystem.services import diagnostics, generator


def _trajectory(values):
    values = np.asarray(values, dtype=float)
    return Trajectory(np.arange(values.shape[0], dtype=float), values, TrajectoryMethod.STEPPED)


def test_clean_trajectory_has_no_issues(wide_aligned):
    times = generator.default_time_grid(wide_aligned, 100.0, 8)
    issues = diagnostics.check_trajectory(generator.propagate_exact(wide_aligned, None, times))
    assert issues == {
        "positivity_violations": 0,
        "population_out_of_range": 0,
        "non_finite": 0,
        "max_violation": 0.0,
    }


def test_counts_each_kind_of_issue(caplog):
    trajectory = _trajectory(
        [
            [0.1, 0.0, 0.0],
            [0.1, 0.3, 0.4],
            [0.6, 0.0, 0.0],
            [np.nan, 0.0, 0.0],
        ]
    )
    with caplog.at_level(logging.WARNING, logger="vsystem"):
        issues = diagnostics.check_trajectory(trajectory)
    assert issues["non_finite"] == 1
    assert issues["population_out_of_range"] == 1
    assert issues["positivity_violations"] == 2
    assert issues["max_violation"] == pytest.approx(0.4)
    assert any("diagnostics" in record.getMessage() for record in caplog.records)


def test_tolerance_absorbs_rounding():
    trajectory = _trajectory([[0.2, 0.2 + 1e-12, 0.0], [-1e-12, 0.0, 0.0]])
    issues = diagnostics.check_trajectory(trajectory)
    assert issues["positivity_violations"] == 0
    assert issues["population_out_of_range"] == 0


@pytest.mark.parametrize("name", ["wide_aligned", "wide_misaligned", "narrow_aligned", "narrow_misaligned"])
def test_exact_trajectories_stay_admissible(name, request):
    params = request.getfixturevalue(name)
    times = generator.default_time_grid(params, 10.0 * generator.timescales(params)[1], 16)
    issues = diagnostics.check_trajectory(generator.propagate_exact(params, None, times))
    assert issues["positivity_violations"] == 0
    assert issues["population_out_of_range"] == 0
    assert issues["non_finite"] == 0
