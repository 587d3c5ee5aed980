import numpy as np
import pytest

from conftest import HEIS, coframe_spec, heis_spec
from srcartan import symexpr as sx
from srcartan.contact import r5_example
from srcartan.errors import ContactDegeneracy, SpecError, StencilError
from srcartan.gstruct import Hom2Tensor, random_group_element, sigma_inverse_action
from srcartan.linalg import block_form
from srcartan.reduction import (CoframeField, Stencil, SubRiemannianSpec, adapted_coframe,
                                first_reduction, first_reduction_from_c, lattice, pullback_spec,
                                reduce_point, reeb_field, reeb_vector, second_reduction,
                                slice_violation, structure_coefficients, structure_from_jet,
                                symbolic_reduction_n1, usable_points, validate_spec_at)

PT3 = (0.3, -0.4, 0.7)
PT5 = (0.2, -0.5, 0.4, 0.9, -0.3)


def values(cf, pt):
    return np.round(cf.value(pt), 12)


def test_adapted_coframe_heisenberg(heisenberg):
    cf = adapted_coframe(heisenberg)
    assert np.allclose(cf.value(PT3), [[1, 0, 0], [0, 1, 0], [0, PT3[0], 1]])


def test_adapted_coframe_r5():
    assert np.allclose(adapted_coframe(r5_example(1, 1, 1, 1)).value(PT5),
                       [[1, 0, 0, 0, 0], [0, 1, 0, 0, 0], [0, 0, 1, 0, 0], [0, 0, 0, 1, 0],
                        [0, PT5[0], 0, PT5[2], 1]])
    th = adapted_coframe(r5_example(2, 3, 5, 7)).value(PT5)
    assert np.allclose(np.diag(th)[:4], np.sqrt([2, 3, 5, 7]))
    assert np.allclose(th[:4] - np.diag(np.diag(th)[:4].tolist() + [0])[:4], 0)


def test_adapted_coframe_is_orthonormal_on_d(nonflat):
    cf = adapted_coframe(nonflat)
    th = cf.value(PT3)
    frame = np.array([[1, 0, 0], [0, 1, -PT3[0]]]).T
    g = (th[:2] @ frame).T @ (th[:2] @ frame)
    assert np.allclose(g, [[1, 0], [0, 1 + PT3[0] ** 2]])
    assert np.allclose(th[2] @ frame, 0)


def test_structure_coefficients_examples(heisenberg):
    c = structure_coefficients(adapted_coframe(heisenberg), PT3).c.coeffs
    want = np.zeros((3, 3, 3))
    want[2, 0, 1], want[2, 1, 0] = 1, -1
    assert np.abs(c - want).max() < 1e-12
    c5 = structure_coefficients(adapted_coframe(r5_example(1, 1, 1, 1)), PT5).c.coeffs
    want = np.zeros((5, 5, 5))
    for i, j in ((0, 1), (2, 3)):
        want[4, i, j], want[4, j, i] = 1, -1
    assert np.abs(c5 - want).max() < 1e-12


def test_structure_reconstruction(nonflat):
    # d theta^k evaluated on the dual frame reproduces c
    cf = adapted_coframe(nonflat)
    th, dth = cf.jet(PT3)
    c = structure_from_jet(th, dth)
    x = np.linalg.inv(th)
    for k, w in enumerate(cf.forms):
        d = np.array(sx.exterior_d(w).matrix(PT3))
        assert np.allclose(x.T @ d @ x, c[k])


def test_first_reduction_heisenberg(heisenberg):
    th, lam, mu = first_reduction(adapted_coframe(heisenberg), PT3)
    assert lam == pytest.approx([1.0]) and mu == [1.0]
    assert np.allclose(th, adapted_coframe(heisenberg).value(PT3))


def test_first_reduction_scaled_eta():
    spec = coframe_spec(["dx", "dy"], eta="3*dz + 3*x*dy")
    cf = adapted_coframe(spec)
    th, lam, _ = first_reduction(cf, PT3)
    # lambda_1 is the skew eigenvalue of d theta^3 = 3 dx ^ dy; theta^3 is rescaled by 1 / lambda_1
    assert lam == pytest.approx([3.0])
    assert np.allclose(th[2], [0, PT3[0], 1])                 # back to alpha
    rec = reduce_point(cf, PT3)
    assert rec.c[2, 0, 1] == pytest.approx(1.0)


def test_first_reduction_r5_unit():
    rec = reduce_point(adapted_coframe(r5_example(1, 1, 1, 1)), PT5)
    assert rec.lambdas == pytest.approx((1.0, 1.0)) and rec.mu == pytest.approx((1.0, 1.0))
    assert rec.stabilizer_dim == 4


def test_r5_1114_spectrum():
    rec = reduce_point(adapted_coframe(r5_example(1, 1, 1, 4)), PT5)
    assert rec.lambdas == pytest.approx((1.0, 0.5))
    assert rec.mu == pytest.approx((1.0, 0.5))
    assert rec.stabilizer_dim == 2


def test_second_reduction_examples(heisenberg):
    _, b = second_reduction(adapted_coframe(heisenberg), PT3)
    assert np.allclose(b, 0)
    shifted = adapted_coframe(coframe_spec(["dx + dz + x*dy", "dy"]))
    th, b = second_reduction(shifted, PT3)
    assert np.allclose(b, [-1, 0])
    assert np.allclose(th, adapted_coframe(heisenberg).value(PT3))
    _, b = second_reduction(adapted_coframe(r5_example(1, 1, 1, 1)), PT5)
    assert np.allclose(b, 0)


def test_second_reduction_requires_normal_form():
    spec = coframe_spec(["dx", "dy"], eta="2*dz + 2*x*dy")
    with pytest.raises(ValueError):
        second_reduction(adapted_coframe(spec), PT3)


def test_nonflat_reduction_closed_form(nonflat):
    rec = reduce_point(adapted_coframe(nonflat), PT3)
    x = PT3[0]
    assert rec.lambdas[0] == pytest.approx(1 / np.sqrt(1 + x * x), abs=1e-12)
    assert rec.b_shift == pytest.approx((0.0, x / (1 + x * x)), abs=1e-8)


def test_symbolic_n1_matches_pointwise(nonflat):
    cf = adapted_coframe(nonflat)
    sym = symbolic_reduction_n1(cf, PT3)
    for pt in [PT3, (-0.6, 0.1, 0.2), (0.9, 0.9, -0.9)]:
        assert np.abs(sym.value(pt) - reduce_point(cf, pt).coframe).max() < 1e-7


def test_slice_membership_and_idempotence():
    for spec, pt in [(heis_spec(("1", "0", "0", "1 + x^2")), PT3),
                     (coframe_spec(["dx + y*dz", "(1 + y^2)*dy"]), PT3),
                     (r5_example(1, 2, 3, 5), PT5)]:
        rec = reduce_point(adapted_coframe(spec), pt)
        assert max(slice_violation(rec.c, rec.mu).values()) < 1e-8
        again = first_reduction_from_c(rec.c)
        assert np.abs(again.g - np.eye(len(pt))).max() < 1e-8


def test_equivariance_of_structure_function():
    rng = np.random.default_rng(0)
    for spec, pt in [(heis_spec(("1", "0", "0", "1 + x^2")), PT3), (r5_example(1, 2, 3, 4), PT5)]:
        cf = adapted_coframe(spec)
        th, dth = cf.jet(pt)
        c = Hom2Tensor(spec.n, structure_from_jet(th, dth))
        for _ in range(10):
            g = random_group_element(spec.n, "g", rng, exact=False)
            gm = g.matrix()
            moved = structure_from_jet(gm @ th, np.einsum("ka,apm->kpm", gm, dth))
            assert np.abs(moved - sigma_inverse_action(g, c).coeffs).max() < 1e-8


def test_reeb_field_examples():
    ch = sx.Chart(("x", "y", "z"))
    xi = reeb_field(sx.parse_one_form("dz + x*dy", ch))
    assert [sx.evaluate(e, PT3) for e in xi] == pytest.approx([0, 0, 1])
    xi5 = reeb_field(r5_example(1, 1, 1, 1))
    assert [sx.evaluate(e, PT5) for e in xi5] == pytest.approx([0, 0, 0, 0, 1])
    with pytest.raises(ContactDegeneracy):
        reeb_field(sx.parse_one_form("dz", ch))


def test_reeb_field_nonconstant_form():
    ch = sx.Chart(("x", "y", "z"))
    eta = sx.parse_one_form("exp(x)*dz + exp(x)*x*dy", ch)
    xi = reeb_field(eta, PT3)
    vec = np.array([sx.evaluate(e, PT3) for e in xi])
    assert np.allclose(vec, reeb_vector(eta, PT3))
    assert np.array(eta.values(PT3)) @ vec == pytest.approx(1.0)


def test_dual_of_last_form_is_reeb(nonflat):
    cf = adapted_coframe(nonflat)
    top = symbolic_reduction_n1(cf, PT3).forms[-1]          # sqrt(1 + x^2) * alpha
    xi = reeb_field(top, PT3)
    for pt in lattice(3, count=2):
        frame = np.linalg.inv(reduce_point(cf, pt).coframe)
        assert np.abs(frame[:, -1] - [sx.evaluate(e, pt) for e in xi]).max() < 1e-8


def test_contact_validation():
    spec = coframe_spec(["dx", "dy"], eta="dz")
    with pytest.raises(ContactDegeneracy):
        validate_spec_at(spec, PT3)
    with pytest.raises(ContactDegeneracy):
        reduce_point(adapted_coframe(spec), PT3)
    bad_frame = SubRiemannianSpec(HEIS, sx.parse_one_form("dz + x*dy", HEIS),
                                  frame=((sx.ONE, sx.ZERO, sx.ZERO), (sx.ZERO, sx.ONE, sx.ZERO)),
                                  gram=((sx.ONE, sx.ZERO), (sx.ZERO, sx.ONE)))
    with pytest.raises(SpecError):
        validate_spec_at(bad_frame, PT3)
    with pytest.raises(SpecError):
        validate_spec_at(heis_spec(("1", "0", "0", "-1")), PT3)


def test_spec_shape_checks():
    with pytest.raises(SpecError):
        SubRiemannianSpec(sx.Chart(("x", "y")), sx.parse_one_form("dy", sx.Chart(("x", "y"))),
                          coframe=(sx.parse_one_form("dx", sx.Chart(("x", "y"))),))
    with pytest.raises(SpecError):
        SubRiemannianSpec(HEIS, sx.parse_one_form("dz", HEIS))


def test_sample_grid_and_domain():
    assert len(lattice(3)) == 27 and lattice(3)[0] == (-1.0, -1.0, -1.0)
    spec = heis_spec(("1", "0", "0", "1/x^2"))
    pts = usable_points(spec, lattice(3))
    assert len(pts) == 18 and all(p[0] != 0 for p in pts)
    edge = heis_spec(("1", "0", "0", "sqrt(x)"))
    with pytest.raises(StencilError):
        Stencil(adapted_coframe(edge), (0.00005, 0, 0), h=1e-4).c_second((0, 0, 0))


def test_diffeomorphism_invariance_of_mu():
    # a non-constant mu_2, transported by the swap (x1, y1) <-> (x2, y2), which preserves alpha
    p = lambda s: sx.parse(s, r5_example(1, 1, 1, 1).chart)
    base = r5_example(1, 1, 1, 1)
    gram = tuple(tuple(p("1 + x1^2") if (i, j) == (3, 3) else (p("1") if i == j else p("0"))
                       for j in range(4)) for i in range(4))
    spec = SubRiemannianSpec(base.chart, base.eta, frame=base.frame, gram=gram)
    mapping = [p(s) for s in ("x2", "y2", "x1", "y1", "z")]
    pulled = pullback_spec(spec, mapping)
    cf_a, cf_b = adapted_coframe(spec), adapted_coframe(pulled)
    for pt in [PT5, (0.7, 0.1, -0.6, 0.3, 0.2)]:
        image = (pt[2], pt[3], pt[0], pt[1], pt[4])
        mu_a = reduce_point(cf_a, image).mu
        mu_b = reduce_point(cf_b, pt).mu
        assert mu_a == pytest.approx(mu_b, abs=1e-9)
        assert mu_a[1] < 1
