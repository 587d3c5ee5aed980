import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import heis_spec
from srcartan import symexpr as sx
from srcartan.contact import (build_contact_metric, check_associated, distinct_values,
                              identity_violations, phi_squared_defect, r5_example,
                              r5_table_crosscheck, required_f_squared, search_associated_form,
                              verify_existence)
from srcartan.errors import ContactDegeneracy
from srcartan.models import load

PTS3 = [(0.0, 0.0, 0.0), (0.3, -0.4, 0.7), (-1.0, 0.5, 0.25)]
PTS5 = list(load("r5_unit").points)


def test_heisenberg_metric_is_associated(heisenberg):
    data = build_contact_metric(heisenberg, points=PTS3)
    verdict = check_associated(data, PTS3)
    assert verdict.associated
    assert max(verdict.max_violations.values()) < 1e-12
    v = data.at(PTS3[1])
    assert np.allclose(v["xi"], [0, 0, 1])


def test_phi_properties(nonflat):
    res = search_associated_form(nonflat, PTS3)
    assert res.exists
    for p, f in zip(res.points, res.f_values):
        eta = nonflat.eta.scale(sx.Const(f))
        v = build_contact_metric(nonflat, eta, [p]).at(p)
        g, phi, xi = v["gtilde"], v["phi"], v["xi"]
        # g~(X, phi Y) is skew, xi is g~-unit and orthogonal to D
        assert np.allclose(g @ phi, -(g @ phi).T)
        assert xi @ g @ xi == pytest.approx(1.0)
        assert np.allclose(phi @ xi, 0, atol=1e-12)


def test_gtilde_restricts_to_metric(nonflat):
    p = PTS3[1]
    g = build_contact_metric(nonflat, points=[p]).at(p)["gtilde"]
    frame = np.array([[1, 0, 0], [0, 1, -p[0]]], dtype=float)
    assert np.allclose(frame @ g @ frame.T, np.diag([1.0, 1.0 + p[0] ** 2]))


def test_r5_unit_exists():
    res = search_associated_form(r5_example(1, 1, 1, 1), PTS5)
    assert res.exists and res.f_values == pytest.approx([1.0] * len(PTS5))
    assert verify_existence(r5_example(1, 1, 1, 1), res).associated


def test_r5_1114_obstructed():
    res = search_associated_form(r5_example(1, 1, 1, 4), PTS5)
    assert not res.exists
    assert res.certificate == pytest.approx((1.0, 4.0))
    res = search_associated_form(r5_example(2, 3, 5, 7), PTS5)
    assert res.certificate == pytest.approx((6.0, 35.0))


def test_obstruction_is_sound():
    spec = r5_example(1, 1, 1, 4)
    p = PTS5[1]
    best = min(phi_squared_defect(spec, float(f), p) for f in np.exp(np.linspace(-3, 3, 61)))
    assert best > 0.5


def test_table_crosscheck():
    assert max(r5_table_crosscheck(1, 1, 1, 1).values()) < 1e-12
    check = r5_table_crosscheck(2, 3, 5, 7)
    assert check["frame_order"] < 1e-12
    assert check["printed"] > 0.1


@settings(max_examples=15, deadline=None)
@given(st.fractions(min_value=1, max_value=9, max_denominator=4),
       st.fractions(min_value=1, max_value=9, max_denominator=4))
def test_n1_always_exists(a, b):
    spec = heis_spec((str(a), "0", "0", str(b)))
    res = search_associated_form(spec, PTS3)
    assert res.exists
    lam = float(1 / np.sqrt(float(a * b)))
    assert res.f_values == pytest.approx([1 / lam] * 3)
    assert max(verify_existence(spec, res).max_violations.values()) < 1e-9


def test_required_values_match_lambdas():
    req = required_f_squared(r5_example(1, 1, 1, 4), PTS5[0])
    assert sorted(req) == pytest.approx([1.0, 4.0])
    assert distinct_values([1.0, 1.0 + 1e-12, 2.0]) == [1.0, 2.0]


def test_vanishing_conformal_factor(heisenberg):
    with pytest.raises(ContactDegeneracy):
        build_contact_metric(heisenberg, heisenberg.eta.scale(sx.ZERO), [PTS3[0]])
