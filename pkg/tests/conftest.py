import numpy as np
import pytest

from acmcheck.exprjet import parse_expression
from acmcheck.fields import VectorFieldDef, coordinate_field, evaluate, sample_points
from acmcheck.zoo import HeisenbergParams, broken_control, cosymplectic_control, heisenberg_aqs, sasakian_control

A2 = [[0.0, 1.0], [-1.0, 0.0]]
A3_RANK2 = [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]


def evaluate_at_samples(structure, samples=100, seed=42):
    return structure.at(sample_points(structure.chart, samples, seed))


@pytest.fixture(scope="session")
def heis2():
    return heisenberg_aqs(HeisenbergParams(2, np.array(A2)))


@pytest.fixture(scope="session")
def heis3():
    return heisenberg_aqs(HeisenbergParams(3, np.array(A3_RANK2)))


@pytest.fixture(scope="session")
def heis2_ev(heis2):
    return evaluate_at_samples(heis2)


@pytest.fixture(scope="session")
def heis3_ev(heis3):
    return evaluate_at_samples(heis3)


@pytest.fixture(scope="session")
def sas_ev():
    return evaluate_at_samples(sasakian_control(1))


@pytest.fixture(scope="session")
def cosym_ev():
    return evaluate_at_samples(cosymplectic_control(1))


@pytest.fixture(scope="session")
def broken_ev():
    return evaluate_at_samples(broken_control())


def central_gradient(f, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (f(x + e) - f(x - e)) / (2 * h)
    return out


def central_hessian(f, x, h=1e-4):
    x = np.asarray(x, dtype=float)
    n = x.size
    H = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            ei = np.zeros(n)
            ej = np.zeros(n)
            ei[i] = h
            ej[j] = h
            H[i, j] = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4 * h * h)
    return H


def field(ctor, structure, srcs, points):
    names = list(structure.chart.coord_names)
    params = list(structure.params)

    def p(s):
        return parse_expression(str(s), names, params)

    comps = [[p(s) for s in row] for row in srcs] if isinstance(srcs[0], (list, tuple)) else [p(s) for s in srcs]
    return evaluate(ctor(comps), structure.chart, points, structure.params)


def coord(structure, i, points):
    return evaluate(coordinate_field(structure.chart, i), structure.chart, points)


def random_vector_srcs(rng, coords, degree=2):
    out = []
    for _ in coords:
        terms = [f"{rng.uniform(-1, 1):.3f}"]
        for _ in range(3):
            mono = "*".join(rng.choice(coords, rng.integers(1, degree + 1)))
            terms.append(f"{rng.uniform(-1, 1):.3f}*{mono}")
        out.append(" + ".join(terms))
    return out


def heis_frame(structure, points):
    """Orthonormal frame X_k = d_{y^k}, X_{k+n} = -2 a_kj y^j d_t + d_{x^k}."""
    n = structure.n
    dim = 2 * n + 1
    a = np.zeros((n, n))
    for name, v in structure.params.items():
        i, j = int(name[1]) - 1, int(name[2]) - 1
        a[i, j], a[j, i] = v, -v
    frame = [coord(structure, 0, points)]
    for k in range(n):
        frame.append(coord(structure, 1 + n + k, points))
    for k in range(n):
        srcs = ["0"] * dim
        srcs[0] = " + ".join(f"({-2 * a[k, j]})*y{j + 1}" for j in range(n))
        srcs[1 + k] = "1"
        frame.append(field(VectorFieldDef, structure, srcs, points))
    return frame, a


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
