import math

import numpy as np
import pytest

from vsystem.errors import DomainError
from vsystem.models import RegimeTag, StateVector, Trajectory, TrajectoryMethod, VParams, validate


@pytest.mark.parametrize(
    "params, field",
    [
        (VParams(gamma=0.0, nbar=1.0), "gamma"),
        (VParams(gamma=-1.0), "gamma"),
        (VParams(delta=-0.1), "delta"),
        (VParams(p=1.5), "p"),
        (VParams(p=-0.1), "p"),
        (VParams(nbar=-1.0), "nbar"),
        (VParams(nbar=math.nan), "nbar"),
        (VParams(delta=math.inf), "delta"),
    ],
)
def test_validate_rejects_out_of_domain(params, field):
    with pytest.raises(DomainError) as excinfo:
        validate(params)
    assert excinfo.value.field == field
    assert excinfo.value.exit_code == 2
    assert isinstance(excinfo.value, ValueError)


def test_validate_reports_bound_and_original_value():
    with pytest.raises(DomainError) as excinfo:
        validate(VParams(p=1.5))
    assert excinfo.value.value == 1.5
    assert "less than or equal to 1" in excinfo.value.bound
    with pytest.raises(DomainError, match="finite real number") as excinfo:
        validate(VParams(nbar="many"))
    assert excinfo.value.field == "nbar"


def test_validate_accepts_numpy_scalars():
    params = VParams(gamma=np.float64(2.0), delta=np.int64(3), p=np.float32(0.5), nbar=np.int32(10))
    assert validate(params) is params


def test_dimensionless_and_rates():
    params = VParams(gamma=2.0, delta=5.0, p=0.5, nbar=10.0)
    assert params.r == 20.0
    assert params.x == pytest.approx(0.1)
    assert params.dimensionless() == (2.5, 0.5, 10.0)
    assert params.with_y(4.0).delta == 8.0


def test_x_needs_positive_nbar():
    with pytest.raises(DomainError):
        VParams(nbar=0.0).x


def test_state_vector_derived_populations():
    state = StateVector(0.3, 0.1, -0.05)
    assert state.rho_bb == 0.3
    assert state.rho_cc == pytest.approx(0.4)
    assert state.rho_ab == complex(0.1, -0.05)
    assert state.population_ratio() == pytest.approx(0.75)
    np.testing.assert_array_equal(StateVector.from_array(state.as_array()).as_array(), state.as_array())


def test_positivity_violation():
    assert StateVector(0.25, 0.2, 0.1).positivity_violation() == 0.0
    assert StateVector(0.25, 0.2, 0.1).is_admissible()
    broken = StateVector(0.1, 0.3, 0.4)
    assert broken.positivity_violation() == pytest.approx(0.4)
    assert not broken.is_admissible()
    assert StateVector(0.6, 0.0, 0.0).positivity_violation() == pytest.approx(0.1)


def test_regime_codes():
    assert RegimeTag.OVERDAMPED.code == -1
    assert RegimeTag.CRITICAL.code == 0
    assert RegimeTag.UNDERDAMPED.code == 1


def test_trajectory_rejects_bad_grids():
    values = np.zeros((3, 3))
    with pytest.raises(DomainError):
        Trajectory(np.array([0.0, 2.0, 1.0]), values, TrajectoryMethod.STEPPED)
    with pytest.raises(DomainError):
        Trajectory(np.array([-1.0, 0.0, 1.0]), values, TrajectoryMethod.STEPPED)
    with pytest.raises(DomainError):
        Trajectory(np.array([0.0, 1.0]), values, TrajectoryMethod.STEPPED)


def test_trajectory_columns():
    values = np.array([[0.0, 0.0, 0.0], [0.2, 0.1, -0.1]])
    trajectory = Trajectory(np.array([0.0, 1.0]), values, TrajectoryMethod.EXACT_DUHAMEL)
    assert len(trajectory) == 2
    np.testing.assert_array_equal(trajectory.rho_ab_im, [0.0, -0.1])
    assert trajectory.states[1] == StateVector(0.2, 0.1, -0.1)
