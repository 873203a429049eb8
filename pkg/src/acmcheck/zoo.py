"""Built-in example structures.

``heisenberg``
    The left-invariant anti-quasi-Sasakian structure on R^{2n+1} (n >= 2)
    built from a skew matrix ``a``: eta = dt + a_ij (y^j dx^i - y^i dx^j),
    xi = d_t, orthonormal frame xi, X_k = d_{y^k},
    X_{k+n} = -2 a_kj y^j d_t + d_{x^k}, and phi X_k = -X_{k+n},
    phi X_{k+n} = X_k.  With rational ``a`` the frame spans a nilpotent Lie
    algebra admitting a lattice, so the structure also descends to compact
    nilmanifolds; that quotient construction is not modelled here.
``sasakian``
    Standard Sasakian structure on R^{2n+1}: eta = 2(dt - y^i dx^i),
    xi = d_t / 2, so that d eta = Phi with the half-coboundary convention.
``cosymplectic``
    Flat product R x C^n with constant phi.
``broken``
    Dimension 3 with phi shifted by 0.05 Id, violating phi^2 = -Id + eta (x) xi
    by exactly 0.1.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .acm import AcmStructure
from .exprjet import ONE, ZERO, Expr, as_expr, is_zero, parse_expression
from .fields import AffinorDef, Chart, MetricDef, OneFormDef, VectorFieldDef


@dataclass(frozen=True)
class HeisenbergParams:
    n: int
    a: np.ndarray

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("the Heisenberg-type example needs n >= 2")
        a = np.asarray(self.a, dtype=float)
        if a.shape != (self.n, self.n):
            raise ValueError(f"a must be {self.n}x{self.n}")
        object.__setattr__(self, "a", 0.5 * (a - a.T))


def _coords(n: int) -> list[str]:
    return ["t"] + [f"x{i}" for i in range(1, n + 1)] + [f"y{i}" for i in range(1, n + 1)]


def _param_name(n: int, i: int, j: int) -> str:
    # 1-based, i < j
    return f"a{i}{j}" if n <= 9 else f"a{i}_{j}"


def _skew_params(p: HeisenbergParams) -> dict[str, float]:
    return {
        _param_name(p.n, i + 1, j + 1): float(p.a[i, j])
        for i in range(p.n)
        for j in range(i + 1, p.n)
    }


def _eta_x_source(n: int, i: int) -> str:
    """Source of the dx^i coefficient 2 a_ij y^j (1-based i), or "0"."""
    terms = []
    for j in range(1, n + 1):
        if j == i:
            continue
        name = _param_name(n, min(i, j), max(i, j))
        sign = "+" if i < j else "-"
        terms.append(f"{sign} 2*{name}*y{j}")
    s = " ".join(terms).lstrip("+ ").strip()
    return s if s else "0"


def _build(name: str, coords: list[str], params: dict[str, float], phi, xi, eta, g) -> AcmStructure:
    names = list(params)

    def p(src):
        return parse_expression(str(src), coords, names)

    return AcmStructure(
        chart=Chart(tuple(coords)),
        params=dict(params),
        phi=AffinorDef([[p(e) for e in row] for row in phi]),
        xi=VectorFieldDef([p(e) for e in xi]),
        eta=OneFormDef([p(e) for e in eta]),
        g=MetricDef([[p(e) for e in row] for row in g]),
        name=name,
    )


def _product(a: str, b: str) -> str:
    if a == "0" or b == "0":
        return "0"
    return f"({a})*({b})"


def heisenberg_aqs(p: HeisenbergParams) -> AcmStructure:
    """The Heisenberg-type anti-quasi-Sasakian structure for skew ``a``."""
    n = p.n
    dim = 2 * n + 1
    coords = _coords(n)
    T, X, Y = 0, lambda i: i, lambda i: n + i  # 1-based i
    ex = {i: _eta_x_source(n, i) for i in range(1, n + 1)}

    eta = ["0"] * dim
    eta[T] = "1"
    for i in range(1, n + 1):
        eta[X(i)] = ex[i]

    xi = ["0"] * dim
    xi[T] = "1"

    phi = [["0"] * dim for _ in range(dim)]
    for i in range(1, n + 1):
        phi[Y(i)][X(i)] = "1"  # phi(d_x) = X_i = d_y
        phi[X(i)][Y(i)] = "-1"  # phi(d_y) = -X_{i+n}
        phi[T][Y(i)] = ex[i]

    g = [["0"] * dim for _ in range(dim)]
    g[T][T] = "1"
    for i in range(1, n + 1):
        g[T][X(i)] = g[X(i)][T] = ex[i]
        g[Y(i)][Y(i)] = "1"
        for j in range(1, n + 1):
            prod = _product(ex[i], ex[j])
            if i == j:
                g[X(i)][X(j)] = "1" if prod == "0" else f"1 + {prod}"
            else:
                g[X(i)][X(j)] = prod
    return _build(f"heisenberg_n{n}", coords, _skew_params(p), phi, xi, eta, g)


def sasakian_control(n: int = 1) -> AcmStructure:
    """Standard Sasakian structure: contact metric and normal."""
    if n < 1:
        raise ValueError("n must be >= 1")
    dim = 2 * n + 1
    coords = _coords(n)
    T, X, Y = 0, lambda i: i, lambda i: n + i

    eta = ["0"] * dim
    eta[T] = "2"
    for i in range(1, n + 1):
        eta[X(i)] = f"-2*y{i}"
    xi = ["0"] * dim
    xi[T] = "0.5"
    phi = [["0"] * dim for _ in range(dim)]
    for i in range(1, n + 1):
        phi[X(i)][Y(i)] = "1"  # phi(d_y) = d_x + y d_t
        phi[T][Y(i)] = f"y{i}"
        phi[Y(i)][X(i)] = "-1"  # phi(d_x) = -d_y
    g = [["0"] * dim for _ in range(dim)]
    g[T][T] = "4"
    for i in range(1, n + 1):
        g[T][X(i)] = g[X(i)][T] = f"-4*y{i}"
        g[Y(i)][Y(i)] = "1"
        for j in range(1, n + 1):
            g[X(i)][X(j)] = f"1 + 4*y{i}^2" if i == j else f"4*y{i}*y{j}"
    return _build(f"sasakian_n{n}", coords, {}, phi, xi, eta, g)


def _flat_parts(n: int):
    dim = 2 * n + 1
    phi = [["0"] * dim for _ in range(dim)]
    for i in range(1, n + 1):
        phi[n + i][i] = "1"
        phi[i][n + i] = "-1"
    xi = ["1"] + ["0"] * (dim - 1)
    eta = ["1"] + ["0"] * (dim - 1)
    g = [["1" if r == c else "0" for c in range(dim)] for r in range(dim)]
    return phi, xi, eta, g


def cosymplectic_control(n: int = 1) -> AcmStructure:
    """Flat cosymplectic structure with constant phi."""
    if n < 1:
        raise ValueError("n must be >= 1")
    phi, xi, eta, g = _flat_parts(n)
    return _build(f"cosymplectic_n{n}", _coords(n), {}, phi, xi, eta, g)


BROKEN_SHIFT = "0.05"


def broken_control() -> AcmStructure:
    """Negative control: phi + 0.05 Id in dimension 3."""
    phi, xi, eta, g = _flat_parts(1)
    for k in range(3):
        phi[k][k] = BROKEN_SHIFT
    return _build("broken", _coords(1), {}, phi, xi, eta, g)


# --------------------------------------------------------------------------
# Generic structures from a polynomial coframe
# --------------------------------------------------------------------------

def _add(a: Expr, b: Expr) -> Expr:
    if is_zero(a):
        return b
    if is_zero(b):
        return a
    return a + b


def _mul(a: Expr, b: Expr) -> Expr:
    if is_zero(a) or is_zero(b):
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    return a * b


def _matmul(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    out = np.empty((A.shape[0], B.shape[1]), dtype=object)
    for i in range(A.shape[0]):
        for j in range(B.shape[1]):
            acc = ZERO
            for k in range(A.shape[1]):
                acc = _add(acc, _mul(A[i, k], B[k, j]))
            out[i, j] = acc
    return out


def frame_structure(n: int, seed: int, scale: float = 0.3, name: str | None = None) -> AcmStructure:
    """A generic almost contact metric structure with polynomial coefficients.

    The coframe is ``C = I + N`` with ``N`` strictly upper triangular and
    random quadratic entries, so ``C^{-1}`` is polynomial too.  Then
    ``eta`` is the first coframe row, ``xi`` the first frame vector,
    ``g = C^T C`` and ``phi = C^{-1} J C`` with J the standard complex
    structure on the last 2n frame slots.  None of L_xi eta, L_xi phi,
    d eta or d Phi vanish in general.
    """
    rng = np.random.default_rng(seed)
    dim = 2 * n + 1
    coords = _coords(n)
    names = list(coords)
    var = [parse_expression(c, names) for c in coords]

    def rand_poly() -> Expr:
        c0, c1 = rng.uniform(-1, 1, 2) * scale
        i, j, k = rng.integers(0, dim, 3)
        e = as_expr(round(float(c0), 3)) + as_expr(round(float(c1), 3)) * var[i]
        return e + as_expr(round(float(rng.uniform(-1, 1) * scale), 3)) * var[j] * var[k]

    N = np.empty((dim, dim), dtype=object)
    for i in range(dim):
        for j in range(dim):
            N[i, j] = rand_poly() if j > i else ZERO
    C = N.copy()
    for i in range(dim):
        C[i, i] = ONE
    negN = np.vectorize(lambda e: ZERO if is_zero(e) else -e, otypes=[object])(N)
    F = np.empty((dim, dim), dtype=object)
    for i in range(dim):
        for j in range(dim):
            F[i, j] = ONE if i == j else ZERO
    power = F.copy()
    for _ in range(dim - 1):
        power = _matmul(power, negN)
        F = np.vectorize(_add, otypes=[object])(F, power)

    J = np.empty((dim, dim), dtype=object)
    J[:] = ZERO
    for i in range(1, n + 1):
        J[n + i, i] = -ONE  # J e_i = -e_{i+n}
        J[i, n + i] = ONE  # J e_{i+n} = e_i
    phi = _matmul(_matmul(F, J), C)
    g = _matmul(C.T.copy(), C)
    return AcmStructure(
        chart=Chart(tuple(coords), tuple((-0.5, 0.5) for _ in coords)),
        params={},
        phi=AffinorDef(phi),
        xi=VectorFieldDef(list(F[:, 0])),
        eta=OneFormDef(list(C[0, :])),
        g=MetricDef(g),
        name=name or f"frame_n{n}_s{seed}",
    )


# --------------------------------------------------------------------------
# Registry
# --------------------------------------------------------------------------

def _heisenberg_from_args(n: int | None = None, a=None) -> AcmStructure:
    n = 2 if n is None else n
    if a is None:
        a = np.zeros((n, n))
        for i in range(0, n - 1, 2):
            a[i, i + 1], a[i + 1, i] = 1.0, -1.0
    a = np.asarray(a, dtype=float)
    if a.shape[0] != n:
        n = a.shape[0]
    return heisenberg_aqs(HeisenbergParams(n, a))


EXAMPLES: dict[str, Callable[..., AcmStructure]] = {
    "heisenberg": _heisenberg_from_args,
    "sasakian": lambda n=None, a=None: sasakian_control(1 if n is None else n),
    "cosymplectic": lambda n=None, a=None: cosymplectic_control(1 if n is None else n),
    "broken": lambda n=None, a=None: broken_control(),
}


def get_example(name: str, n: int | None = None, a=None) -> AcmStructure:
    if name not in EXAMPLES:
        raise KeyError(f"unknown example {name!r}; choose from {', '.join(EXAMPLES)}")
    return EXAMPLES[name](n=n, a=a)
