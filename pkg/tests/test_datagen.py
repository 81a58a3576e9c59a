import math

import numpy as np
import pytest
from pydantic import ValidationError

from pfkernel.modules.datagen import OrbitSpec, changepoint_sequence, orbit, orbit_dataset, twist_map_orbit


def test_first_step_example():
    points = twist_map_orbit(0.5, 0.5, 2.0, 2)
    np.testing.assert_array_equal(points, [[0.5, 0.5], [0.0, 0.5]])


def test_orbit_matches_reference_recurrence():
    r, s, t = 4.1, 0.123, 0.456
    points = twist_map_orbit(s, t, r, 1000)
    for i in range(1000):
        assert points[i, 0] == s and points[i, 1] == t
        s = math.fmod(s + r * t * (1 - t), 1.0)
        t = math.fmod(t + r * s * (1 - s), 1.0)


def test_orbit_stays_in_unit_square():
    for r in (2.5, 3.5, 4.0, 4.1, 4.3):
        points = orbit(OrbitSpec(r=r, n_points=500, seed=7)).points
        assert points.shape == (500, 2)
        assert np.all((points >= 0.0) & (points < 1.0))


def test_orbit_is_deterministic_per_seed():
    a = orbit(OrbitSpec(r=4.0, n_points=50, seed=3)).points
    b = orbit(OrbitSpec(r=4.0, n_points=50, seed=3)).points
    np.testing.assert_array_equal(a, b)


def test_distinct_seeds_give_distinct_orbits():
    starts = {tuple(orbit(OrbitSpec(r=4.3, n_points=1, seed=k)).points[0]) for k in range(1000)}
    assert len(starts) == 1000


def test_orbit_spec_validation():
    with pytest.raises(ValidationError):
        OrbitSpec(r=0.0, n_points=10, seed=0)
    with pytest.raises(ValidationError):
        OrbitSpec(r=1.0, n_points=0, seed=0)


def test_orbit_dataset_labels_and_seeds():
    data = orbit_dataset([2.5, 4.3], per_class=3, n_points=20, seed=10)
    assert [label for _, label in data] == [0, 0, 0, 1, 1, 1]
    np.testing.assert_array_equal(data[4][0].points, orbit(OrbitSpec(r=4.3, n_points=20, seed=14)).points)
    with pytest.raises(ValueError):
        orbit_dataset([], per_class=3, n_points=20, seed=0)


def test_changepoint_sequence():
    clouds = changepoint_sequence(3.5, 4.3, 4, 3, n_points=15, seed=0)
    assert len(clouds) == 7
    np.testing.assert_array_equal(clouds[5].points, orbit(OrbitSpec(r=4.3, n_points=15, seed=5)).points)
    with pytest.raises(ValueError):
        changepoint_sequence(3.5, 4.3, 1, 5, n_points=15, seed=0)
