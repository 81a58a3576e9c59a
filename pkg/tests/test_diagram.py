import io
import math

import numpy as np
import pytest
from pydantic import ValidationError

from pfkernel.core.diagram import (
    EssentialPolicy,
    PersistenceDiagram,
    PersistencePoint,
    diagonal_mirror,
    diagonal_projection,
    format_diagram,
    load_diagram,
    parse_diagram,
    project_to_diagonal,
    save_diagram,
)
from pfkernel.utils.errors import DiagramParseError, DiagramValidationError, EssentialPointError


@pytest.mark.parametrize("point, expected", [
    ((1.0, 3.0), (2.0, 2.0)),
    ((0.7, 0.7), (0.7, 0.7)),
    ((0.0, 5.0), (2.5, 2.5)),
])
def test_project_to_diagonal(point, expected):
    p = project_to_diagonal(PersistencePoint(*point))
    assert (p.birth, p.death) == expected


def test_projection_is_idempotent_and_closest(rng):
    for b, pers in rng.uniform(0, 10, size=(50, 2)):
        u = PersistencePoint(b, b + pers)
        once = project_to_diagonal(u)
        assert project_to_diagonal(once) == once
        dist = math.hypot(u.birth - once.birth, u.death - once.death)
        for a in rng.uniform(-5, 15, size=10):
            assert dist <= math.hypot(u.birth - a, u.death - a) + 1e-12


def test_project_essential_point_fails():
    with pytest.raises(EssentialPointError):
        project_to_diagonal(PersistencePoint(0.0, math.inf))


def test_point_invariants():
    with pytest.raises(DiagramValidationError):
        PersistencePoint(1.0, 0.5)
    with pytest.raises(DiagramValidationError):
        PersistencePoint(math.inf, math.inf)
    assert PersistencePoint(0.0, math.inf).is_essential


def test_diagonal_mirror_keeps_multiplicity():
    mirror = diagonal_mirror(PersistenceDiagram([(1, 3), (0, 2)]))
    np.testing.assert_array_equal(mirror.points, [[2, 2], [1, 1]])
    np.testing.assert_array_equal(diagonal_mirror(PersistenceDiagram([(1, 3), (1, 3)])).points, [[2, 2], [2, 2]])
    assert len(diagonal_mirror(PersistenceDiagram())) == 0
    assert diagonal_projection(np.empty((0, 2))).shape == (0, 2)


def test_parse_basic():
    dg = parse_diagram("0.0 1.5\n0.2 0.9\n")
    assert len(dg) == 2
    assert dg.homology_dimension == 0


def test_parse_header_comments_and_infinity_spellings():
    text = "# computed elsewhere\ndim 1\n\n0.5 1.0\n0.2 Inf\n0.1 infinity\n"
    dropped = parse_diagram(text)
    assert dropped.homology_dimension == 1
    np.testing.assert_array_equal(dropped.points, [[0.5, 1.0]])

    capped = parse_diagram(text, EssentialPolicy.parse("cap:2"))
    np.testing.assert_array_equal(capped.points, [[0.5, 1.0], [0.2, 2.0], [0.1, 2.0]])


def test_parse_essential_only_drops_to_empty():
    assert len(parse_diagram("0.0 inf\n", EssentialPolicy.drop())) == 0


def test_parse_errors_carry_line_numbers():
    with pytest.raises(DiagramParseError) as err:
        parse_diagram("0.1 0.2\nfoo bar\n")
    assert err.value.line_number == 2
    with pytest.raises(DiagramParseError):
        parse_diagram("0.1 0.2 0.3\n")
    with pytest.raises(DiagramParseError):
        parse_diagram("0.1 0.2\ndim 1\n")
    with pytest.raises(DiagramValidationError):
        parse_diagram("1.0 0.5\n")


def test_essential_policy_parsing():
    assert EssentialPolicy.parse("drop").mode == "drop"
    assert EssentialPolicy.parse("cap:2.5").cap_value == 2.5
    with pytest.raises(ValueError):
        EssentialPolicy.parse("keep")
    with pytest.raises(ValidationError):
        EssentialPolicy.cap(math.inf)


def test_cap_below_essential_birth_is_rejected():
    dg = PersistenceDiagram([(0.0, 1.0), (3.0, math.inf)])
    with pytest.raises(DiagramValidationError):
        dg.resolve_essential(EssentialPolicy.cap(2.0))


def test_finite_points_requires_resolution():
    dg = PersistenceDiagram([(0.0, math.inf)])
    assert dg.has_essential
    with pytest.raises(EssentialPointError):
        dg.finite_points()


def test_diagram_is_immutable():
    dg = PersistenceDiagram([(0.0, 1.0)])
    with pytest.raises(ValueError):
        dg.points[0, 0] = 5.0


def test_sorted_is_lexicographic():
    dg = PersistenceDiagram([(1, 2), (0, 3), (0, 1)]).sorted()
    np.testing.assert_array_equal(dg.points, [[0, 1], [0, 3], [1, 2]])


def test_iteration_yields_points():
    points = list(PersistenceDiagram([(0, 1), (2, 3)], homology_dimension=1))
    assert points == [PersistencePoint(0.0, 1.0), PersistencePoint(2.0, 3.0)]


def test_save_load_round_trip_is_exact(tmp_path, rng):
    values = rng.uniform(0, 1, size=(25, 2))
    values.sort(axis=1)
    dg = PersistenceDiagram(np.vstack([values, [[1 / 3, 2 / 3], [0.1, math.inf]]]), homology_dimension=1)
    path = tmp_path / "dg.txt"
    save_diagram(dg, path)
    loaded = load_diagram(path, EssentialPolicy.cap(5.0))
    assert loaded.homology_dimension == 1
    np.testing.assert_array_equal(loaded.points[:-1], dg.points[:-1])
    assert loaded.points[-1, 1] == 5.0

    finite = dg.resolve_essential(EssentialPolicy.drop())
    buffer = io.StringIO()
    save_diagram(finite, buffer)
    assert load_diagram(buffer.getvalue().encode("utf-8")) == finite


def test_format_writes_inf_for_essential():
    text = format_diagram(PersistenceDiagram([(0.0, math.inf)]))
    assert text.splitlines() == ["dim 0", "0.0 inf"]
