import numpy as np
import pytest

from acmcheck import calculus as calc
from acmcheck.exprjet import parse_expression
from acmcheck.fields import (
    Chart, MetricDef, OneFormDef, TwoFormDef, VectorFieldDef, evaluate, sample_points,
)
from acmcheck.zoo import frame_structure
from conftest import coord, field, heis_frame, random_vector_srcs


@pytest.fixture(scope="module")
def generic():
    return frame_structure(2, 3)


@pytest.fixture(scope="module")
def gpts(generic):
    return sample_points(generic.chart, 30, 11)


# brackets ---------------------------------------------------------------

def test_coordinate_fields_commute(heis2):
    pts = sample_points(heis2.chart, 5)
    br = calc.lie_bracket(coord(heis2, 0, pts), coord(heis2, 1, pts))
    assert not br.val.any()


def test_heisenberg_frame_brackets(heis2):
    pts = sample_points(heis2.chart, 20)
    frame, a = heis_frame(heis2, pts)
    n = 2
    for i in range(n):
        for k in range(n):
            br = calc.lie_bracket(frame[1 + i], frame[1 + n + k]).val
            expected = np.zeros(5)
            expected[0] = -2 * a[k, i]
            assert np.allclose(br, expected, atol=1e-14)
    # every frame commutator is a multiple of xi
    for p in range(len(frame)):
        for q in range(len(frame)):
            br = calc.lie_bracket(frame[p], frame[q]).val
            assert np.max(np.abs(br[:, 1:])) < 1e-10


def test_bracket_leibniz(heis2):
    pts = sample_points(heis2.chart, 10)
    X, Y = coord(heis2, 3, pts), coord(heis2, 1, pts)  # d_{y1}, d_{x1}
    fX = field(VectorFieldDef, heis2, ["0", "0", "0", "x1", "0"], pts)
    lhs = calc.lie_bracket(fX, Y).val
    fx1 = pts[:, 1]
    rhs = fx1[:, None] * calc.lie_bracket(X, Y).val - 1.0 * X.val  # Y.f = d_{x1} x1 = 1
    assert np.allclose(lhs, rhs, atol=1e-14)


def test_bracket_leibniz_generic(generic, gpts):
    rng = np.random.default_rng(0)
    coords = list(generic.chart.coord_names)
    Xs, Ys = random_vector_srcs(rng, coords), random_vector_srcs(rng, coords)
    fsrc = "1 + x1*y2 - t^2"
    fX = field(VectorFieldDef, generic, [f"({fsrc})*({s})" for s in Xs], gpts)
    X = field(VectorFieldDef, generic, Xs, gpts)
    Y = field(VectorFieldDef, generic, Ys, gpts)
    fval = 1 + gpts[:, 1] * gpts[:, 4] - gpts[:, 0] ** 2
    df = np.stack([-2 * gpts[:, 0], gpts[:, 4], 0 * fval, 0 * fval, gpts[:, 1]], axis=1)
    Yf = np.einsum("pi,pi->p", Y.val, df)
    lhs = calc.lie_bracket(fX, Y).val
    rhs = fval[:, None] * calc.lie_bracket(X, Y).val - Yf[:, None] * X.val
    assert np.max(np.abs(lhs - rhs)) < 1e-12


# exterior derivative ----------------------------------------------------

def test_closed_form(heis2):
    pts = sample_points(heis2.chart, 10)
    dt = field(OneFormDef, heis2, ["1", "0", "0", "0", "0"], pts)
    X, Y = heis_frame(heis2, pts)[0][1:3]
    assert not calc.d_oneform(dt, X, Y).val.any()
    assert not calc.d_oneform_components(dt).val.any()


def test_deta_on_heisenberg_frame(heis2_ev, heis2):
    pts = heis2_ev.points
    frame, a = heis_frame(heis2, pts)
    for i in range(2):
        for k in range(2):
            v = calc.d_oneform(heis2_ev.eta, frame[1 + i], frame[3 + k]).val
            assert np.allclose(v, a[k, i], atol=1e-14)


def test_deta_skew_and_paths_agree(generic, gpts):
    ev = generic.at(gpts)
    rng = np.random.default_rng(1)
    coords = list(generic.chart.coord_names)
    X = field(VectorFieldDef, generic, random_vector_srcs(rng, coords), gpts)
    Y = field(VectorFieldDef, generic, random_vector_srcs(rng, coords), gpts)
    a = calc.d_oneform(ev.eta, X, Y).val
    b = calc.d_oneform(ev.eta, Y, X).val
    assert np.max(np.abs(a + b)) < 1e-13
    comp = np.einsum("pi,pij,pj->p", X.val, ev.deta.val, Y.val)
    assert np.max(np.abs(a - comp)) < 1e-12


def test_half_wedge_satisfies_leibniz(generic, gpts):
    """d(f eta) = df ^ eta + f d eta holds with the Alt wedge."""
    ev = generic.at(gpts)
    fsrc = "x1*y1 + t"
    feta = field(OneFormDef, generic, [f"({fsrc})*({e})" for e in generic.eta.to_source()], gpts)
    fval = gpts[:, 1] * gpts[:, 3] + gpts[:, 0]
    df = np.zeros_like(gpts)
    df[:, 0], df[:, 1], df[:, 3] = 1, gpts[:, 3], gpts[:, 1]
    lhs = calc.d_oneform_components(feta).val
    rhs = calc.wedge_1_1(df, ev.ETA) + fval[:, None, None] * ev.deta.val
    assert np.max(np.abs(lhs - rhs)) < 1e-12
    # the unnormalized wedge breaks it
    assert np.max(np.abs(lhs - (2 * calc.wedge_1_1(df, ev.ETA) + fval[:, None, None] * ev.deta.val))) > 1e-3


def test_constant_twoform_closed(heis2):
    pts = sample_points(heis2.chart, 5)
    m = [["0", "1", "0", "0", "2"], ["-1", "0", "0", "0", "0"], ["0"] * 5, ["0"] * 5, ["-2", "0", "0", "0", "0"]]
    w = field(TwoFormDef, heis2, m, pts)
    assert not calc.d_twoform_components(w).val.any()


def test_d_twoform_rejects_non_skew(heis2):
    pts = sample_points(heis2.chart, 3)
    m = [["1" if i == j else "0" for j in range(5)] for i in range(5)]
    w = field(TwoFormDef, heis2, m, pts)
    X = coord(heis2, 0, pts)
    with pytest.raises(ValueError):
        calc.d_twoform(w, X, X, X)


def test_dPhi_vanishes_on_heisenberg_frame(heis2_ev, heis2):
    frame, _ = heis_frame(heis2, heis2_ev.points)
    Phi = heis2_ev.fundamental_form
    worst = 0.0
    for i in range(5):
        for j in range(5):
            for k in range(5):
                worst = max(worst, np.max(np.abs(calc.d_twoform(Phi, frame[i], frame[j], frame[k]).val)))
    assert worst < 1e-12


def test_coboundary_matches_connection_formula(generic, gpts):
    rng = np.random.default_rng(3)
    coords = list(generic.chart.coord_names)
    dim = len(coords)
    upper = [[None] * dim for _ in range(dim)]
    for i in range(dim):
        upper[i][i] = "0"
        for j in range(i + 1, dim):
            mono = "*".join(rng.choice(coords, 2))
            s = f"{rng.uniform(-1, 1):.3f} + {rng.uniform(-1, 1):.3f}*{mono} + {rng.uniform(-1, 1):.3f}*{coords[j]}"
            upper[i][j], upper[j][i] = s, f"-({s})"
    ev = generic.at(gpts)
    w = field(TwoFormDef, generic, upper, gpts)
    dw = calc.d_twoform_components(w).val
    nw = calc.covariant_derivative(w, "dd", ev.gamma).val  # [a, b, k] = (nabla_k w)(a, b)
    cyc = nw + np.einsum("...jki->...ijk", nw) + np.einsum("...kij->...ijk", nw)
    assert np.max(np.abs(3 * dw - cyc)) < 1e-8
    # invariant six-term formula on random fields agrees with the component array
    X, Y, Z = (field(VectorFieldDef, generic, random_vector_srcs(rng, coords), gpts) for _ in range(3))
    inv = calc.d_twoform(w, X, Y, Z).val
    comp = np.einsum("pijk,pi,pj,pk->p", dw, X.val, Y.val, Z.val)
    assert np.max(np.abs(inv - comp)) < 1e-10


def test_d_squared_closed_form(heis2):
    pts = sample_points(heis2.chart, 10)
    dt = field(OneFormDef, heis2, ["1", "0", "0", "0", "0"], pts)
    X, Y, Z = (coord(heis2, i, pts) for i in (1, 2, 3))
    assert np.max(calc.d_squared_check(dt, X, Y, Z)) == 0


def test_d_squared_heisenberg_random_fields(heis2_ev, heis2):
    rng = np.random.default_rng(9)
    coords = list(heis2.chart.coord_names)
    worst = 0.0
    for _ in range(5):
        X, Y, Z = (field(VectorFieldDef, heis2, random_vector_srcs(rng, coords), heis2_ev.points) for _ in range(3))
        worst = max(worst, np.max(calc.d_squared_check(heis2_ev.eta, X, Y, Z)))
    assert worst < 1e-8


def test_d_squared_cubic_form(generic, gpts):
    rng = np.random.default_rng(4)
    coords = list(generic.chart.coord_names)
    eta = field(OneFormDef, generic, random_vector_srcs(rng, coords, degree=3), gpts)
    X, Y, Z = (field(VectorFieldDef, generic, random_vector_srcs(rng, coords), gpts) for _ in range(3))
    assert np.max(calc.d_squared_check(eta, X, Y, Z)) < 1e-7
    assert np.max(np.abs(calc.d_twoform_components(calc.d_oneform_components(eta)).val)) < 1e-12


# Lie derivative ---------------------------------------------------------

def test_killing_and_invariance_on_heisenberg(heis2_ev):
    assert np.max(np.abs(heis2_ev.lie_g)) < 1e-9
    assert np.max(np.abs(heis2_ev.lie_phi)) < 1e-9


def test_lie_derivative_constant_tensor_along_coordinate_field(heis2):
    pts = sample_points(heis2.chart, 5)
    m = [[str(i - j) for j in range(5)] for i in range(5)]
    T = field(MetricDef, heis2, m, pts)
    assert not calc.lie_derivative(coord(heis2, 2, pts), T, "dd").val.any()


def test_cartan_formula_oracle(generic, gpts):
    """(L_xi eta)(Y) = 2 d eta(xi, Y) + Y(eta(xi)) with the half-coboundary."""
    ev = generic.at(gpts)
    lhs = ev.lie_eta
    xi_deta = 2 * np.einsum("pi,pij->pj", ev.XI, ev.deta.val)
    pair_grad = calc.pair(ev.eta, ev.xi).grad().val
    assert np.max(np.abs(lhs - xi_deta - pair_grad)) < 1e-12
    assert np.max(np.abs(lhs)) > 1e-2  # generic structure: not invariant


def test_lie_derivative_of_vector_is_bracket(generic, gpts):
    ev = generic.at(gpts)
    rng = np.random.default_rng(6)
    Y = field(VectorFieldDef, generic, random_vector_srcs(rng, list(generic.chart.coord_names)), gpts)
    assert np.allclose(calc.lie_derivative(ev.xi, Y, "u").val, calc.lie_bracket(ev.xi, Y).val, atol=1e-13)


# connection and curvature ----------------------------------------------

def _sphere():
    chart = Chart(("th", "ph"), ((0.3, 2.8), (-1.0, 1.0)))
    g = MetricDef([[parse_expression(s, ["th", "ph"]) for s in row] for row in [["1", "0"], ["0", "sin(th)^2"]]])
    return chart, g


def test_euclidean_christoffels_vanish():
    chart = Chart(("x", "y", "z"))
    g = MetricDef([[parse_expression(str(int(i == j)), chart.coord_names) for j in range(3)] for i in range(3)])
    gam = calc.levi_civita(evaluate(g, chart, sample_points(chart, 4)))
    assert not gam.val.any() and not gam.d1.any()
    assert not calc.curvature_tensor(gam).any()


def test_sphere_christoffels_and_curvature():
    chart, g = _sphere()
    pts = sample_points(chart, 20, 1)
    gam = calc.levi_civita(evaluate(g, chart, pts))
    th = pts[:, 0]
    assert np.allclose(gam.val[:, 0, 1, 1], -np.sin(th) * np.cos(th), atol=1e-14)
    assert np.allclose(gam.val[:, 1, 0, 1], np.cos(th) / np.sin(th), atol=1e-12)
    R = calc.curvature_tensor(gam)
    G = evaluate(g, chart, pts).val
    # unit sphere: g(R(d_th, d_ph) d_ph, d_th) = sin^2 th
    sec = np.einsum("pl,pl->p", G[:, 0], R[:, :, 1, 0, 1])
    assert np.allclose(sec, np.sin(th) ** 2, atol=1e-12)


def test_metric_compatibility(heis2_ev, generic, gpts):
    assert np.max(np.abs(heis2_ev.nabla_g)) < 1e-9
    assert np.max(np.abs(generic.at(gpts).nabla_g)) < 1e-9


def test_christoffel_symmetric(generic, gpts):
    gam = generic.at(gpts).gamma.val
    assert np.max(np.abs(gam - np.swapaxes(gam, -1, -2))) == 0


def test_flat_covariant_derivative(cosym_ev):
    assert not cosym_ev.nabla_phi.any()
    assert not cosym_ev.nabla_xi.val.any()


def test_xi_geodesic_and_nabla_xi_phi(heis2_ev):
    assert np.max(np.abs(np.einsum("pik,pk->pi", heis2_ev.nabla_xi.val, heis2_ev.XI))) < 1e-12
    nxp = np.einsum("pijk,pk->pij", heis2_ev.nabla_phi, heis2_ev.XI)
    assert np.max(np.abs(nxp)) > 0.1


def test_curvature_identities_generic(generic, gpts):
    ev = generic.at(gpts)
    R, G = ev.R, ev.G
    rng = np.random.default_rng(2)
    X, Y, Z, W = (rng.normal(size=(len(gpts), 5)) for _ in range(4))
    b = calc.curvature(R, X, Y, Z) + calc.curvature(R, Y, Z, X) + calc.curvature(R, Z, X, Y)
    assert np.max(np.abs(b)) < 1e-8
    gRW = lambda A, B, C, D: np.einsum("pl,plm,pm->p", calc.curvature(R, A, B, C), G, D)  # noqa: E731
    ref = gRW(X, Y, Z, W)
    assert np.max(np.abs(ref + gRW(Y, X, Z, W))) < 1e-8
    assert np.max(np.abs(ref + gRW(X, Y, W, Z))) < 1e-8
    assert np.max(np.abs(ref - gRW(Z, W, X, Y))) < 1e-8
    assert np.max(np.abs(ref)) > 1e-3


def test_curvature_matches_commutator_of_connections(generic, gpts):
    """R_{d_i d_j} Z equals the commutator of second covariant derivatives."""
    ev = generic.at(gpts)
    rng = np.random.default_rng(8)
    Z = field(VectorFieldDef, generic, random_vector_srcs(rng, list(generic.chart.coord_names)), gpts)
    nZ = calc.covariant_derivative(Z, "u", ev.gamma)  # [l, j]
    nnZ = calc.covariant_derivative(nZ, "ud", ev.gamma).val  # [l, j, i] = (nabla_i nabla_j Z)^l
    lhs = np.einsum("plkij,pk->plij", ev.R, Z.val)
    rhs = np.einsum("plji->plij", nnZ) - nnZ
    assert np.max(np.abs(lhs - rhs)) < 1e-9
