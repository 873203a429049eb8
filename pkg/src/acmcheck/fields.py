"""Tensor fields on a single coordinate chart.

A field is an array of :class:`~acmcheck.exprjet.Expr` components.  Evaluating
it at a batch of points gives a :class:`TensorJet`: the component array
together with its first and second coordinate derivatives.  Axes are laid
out as ``batch..., tensor indices..., derivative indices...``.

Index conventions follow the manifold file: for an affinor ``phi[i][j]`` is
the i-th component of ``phi(d_j)``; for a metric ``g[i][j] = g(d_i, d_j)``.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import jsonschema
import numpy as np

from .exprjet import Expr, ExprError, Jet2, eval_jet2, parse_expression, to_source, ZERO, as_expr


RANK_RTOL = 1e-7
PD_FLOOR = 1e-10


@dataclass(frozen=True)
class Chart:
    coord_names: tuple[str, ...]
    sample_box: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "coord_names", tuple(self.coord_names))
        if len(set(self.coord_names)) != len(self.coord_names):
            raise ValueError("duplicate coordinate names")
        if self.sample_box is None:
            object.__setattr__(self, "sample_box", tuple((-1.0, 1.0) for _ in self.coord_names))
        elif len(self.sample_box) != len(self.coord_names):
            raise ValueError("sample_box length must equal the number of coordinates")

    @property
    def dim(self) -> int:
        return len(self.coord_names)

    @property
    def n(self) -> int:
        if self.dim % 2 == 0 or self.dim < 3:
            raise ValueError(f"chart of dimension {self.dim} cannot carry an almost contact structure")
        return (self.dim - 1) // 2


# --------------------------------------------------------------------------
# Field definitions
# --------------------------------------------------------------------------

_SHAPES = {"scalar": 0, "vector": 1, "oneform": 1, "affinor": 2, "twoform": 2, "metric": 2}
# index placement used by covariant and Lie derivatives
KINDS = {"scalar": "", "vector": "u", "oneform": "d", "affinor": "ud", "twoform": "dd", "metric": "dd"}


@dataclass(frozen=True)
class TensorFieldDef:
    valence: str
    components: np.ndarray  # object array of Expr

    def __post_init__(self):
        comps = np.empty(np.shape(self.components), dtype=object)
        flat = np.asarray(self.components, dtype=object)
        for idx in np.ndindex(flat.shape):
            comps[idx] = as_expr(flat[idx])
        if comps.ndim != _SHAPES[self.valence]:
            raise ValueError(f"{self.valence} field needs {_SHAPES[self.valence]} index axes")
        object.__setattr__(self, "components", comps)

    @property
    def kinds(self) -> str:
        return KINDS[self.valence]

    def to_source(self):
        return np.vectorize(to_source, otypes=[object])(self.components).tolist()


def VectorFieldDef(components) -> TensorFieldDef:
    return TensorFieldDef("vector", np.asarray(components, dtype=object))


def OneFormDef(components) -> TensorFieldDef:
    return TensorFieldDef("oneform", np.asarray(components, dtype=object))


def AffinorDef(components) -> TensorFieldDef:
    return TensorFieldDef("affinor", _matrix(components))


def TwoFormDef(components) -> TensorFieldDef:
    return TensorFieldDef("twoform", _matrix(components))


def MetricDef(components) -> TensorFieldDef:
    return TensorFieldDef("metric", _matrix(components))


def _matrix(rows) -> np.ndarray:
    rows = list(rows)
    out = np.empty((len(rows), len(rows[0]) if rows else 0), dtype=object)
    for i, row in enumerate(rows):
        for j, e in enumerate(row):
            out[i, j] = e
    return out


def coordinate_field(chart: Chart, i: int) -> TensorFieldDef:
    comps = [ZERO] * chart.dim
    comps[i] = as_expr(1)
    return VectorFieldDef(comps)


# --------------------------------------------------------------------------
# Tensor jets
# --------------------------------------------------------------------------

class TensorJet:
    """Component array with up to two coordinate-derivative slots.

    ``order`` is the number of derivative arrays present; operations combine
    operands to the lowest common order.
    """

    __slots__ = ("val", "d1", "d2", "rank")

    def __init__(self, val, d1=None, d2=None, rank: int | None = None):
        self.val = np.asarray(val, dtype=float)
        self.d1 = d1
        self.d2 = d2 if d1 is not None else None
        self.rank = self.val.ndim if rank is None else rank

    @property
    def order(self) -> int:
        if self.d1 is None:
            return 0
        return 1 if self.d2 is None else 2

    @property
    def dim(self) -> int:
        return self.d1.shape[-1]

    @classmethod
    def constant(cls, arr, dim: int, order: int = 2) -> "TensorJet":
        arr = np.asarray(arr, dtype=float)
        d1 = np.zeros(arr.shape + (dim,)) if order >= 1 else None
        d2 = np.zeros(arr.shape + (dim, dim)) if order >= 2 else None
        return cls(arr, d1, d2, rank=arr.ndim)

    def truncate(self, order: int) -> "TensorJet":
        return TensorJet(self.val, self.d1 if order >= 1 else None, self.d2 if order >= 2 else None, self.rank)

    def grad(self) -> "TensorJet":
        """Coordinate gradient; the new derivative index is appended last."""
        if self.d1 is None:
            raise ValueError("jet has no derivative information left")
        return TensorJet(self.d1, self.d2, None, self.rank + 1)

    def component(self, *idx) -> Jet2:
        """The scalar jet of one component (order 2 required)."""
        sl = (Ellipsis,) + tuple(idx)
        tail = (slice(None),)
        return Jet2(self.val[sl], self.d1[sl + tail], self.d2[sl + tail + tail])

    def _binary(self, other, op) -> "TensorJet":
        if not isinstance(other, TensorJet):
            raise TypeError("TensorJet arithmetic needs TensorJet operands")
        if other.rank != self.rank:
            raise ValueError(f"rank mismatch {self.rank} vs {other.rank}")
        order = min(self.order, other.order)
        val = op(self.val, other.val)
        d1 = op(self.d1, other.d1) if order >= 1 else None
        d2 = op(self.d2, other.d2) if order >= 2 else None
        return TensorJet(val, d1, d2, self.rank)

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __neg__(self):
        return TensorJet(-self.val, None if self.d1 is None else -self.d1, None if self.d2 is None else -self.d2, self.rank)

    def scale(self, c: float) -> "TensorJet":
        return TensorJet(c * self.val, None if self.d1 is None else c * self.d1, None if self.d2 is None else c * self.d2, self.rank)

    def __mul__(self, c):
        if isinstance(c, TensorJet):
            raise TypeError("use contract() for products of jets")
        return self.scale(c)

    __rmul__ = __mul__

    def transpose(self, *perm: int) -> "TensorJet":
        """Permute the tensor axes (derivative axes stay last)."""
        def tr(a, extra):
            nb = a.ndim - self.rank - extra
            axes = list(range(nb)) + [nb + p for p in perm] + list(range(nb + self.rank, a.ndim))
            return np.transpose(a, axes)

        return TensorJet(tr(self.val, 0), None if self.d1 is None else tr(self.d1, 1),
                         None if self.d2 is None else tr(self.d2, 2), self.rank)

    def inverse(self) -> "TensorJet":
        """Matrix inverse of a rank-2 jet, with derivatives."""
        inv = np.linalg.inv(self.val)
        d1 = d2 = None
        if self.order >= 1:
            d1 = -np.einsum("...ab,...bcY,...cd->...adY", inv, self.d1, inv)
        if self.order >= 2:
            t = np.einsum("...abY,...bc,...cdZ->...adYZ", self.d1, inv, self.d1)
            inner = t + np.swapaxes(t, -1, -2) - self.d2
            d2 = np.einsum("...ab,...bdYZ,...de->...aeYZ", inv, inner, inv)
        return TensorJet(inv, d1, d2, 2)

    def __repr__(self) -> str:
        return f"TensorJet(rank={self.rank}, order={self.order}, shape={self.val.shape})"


def _es(a: str, b: str, out: str) -> str:
    return f"...{a},...{b}->...{out}"


def contract(spec: str, a: TensorJet, b: TensorJet) -> TensorJet:
    """Einsum of two jets over their tensor indices with the Leibniz rule.

    ``spec`` names tensor indices only (e.g. ``"ij,j->i"``); batch axes are
    broadcast.  Letters ``Y`` and ``Z`` are reserved for derivative slots.
    """
    ins, out = spec.split("->")
    sa, sb = ins.split(",")
    order = min(a.order, b.order)
    val = np.einsum(_es(sa, sb, out), a.val, b.val)
    d1 = d2 = None
    if order >= 1:
        d1 = np.einsum(_es(sa + "Y", sb, out + "Y"), a.d1, b.val) + np.einsum(_es(sa, sb + "Y", out + "Y"), a.val, b.d1)
    if order >= 2:
        cross = np.einsum(_es(sa + "Y", sb + "Z", out + "YZ"), a.d1, b.d1)
        d2 = (
            np.einsum(_es(sa + "YZ", sb, out + "YZ"), a.d2, b.val)
            + cross
            + np.swapaxes(cross, -1, -2)
            + np.einsum(_es(sa, sb + "YZ", out + "YZ"), a.val, b.d2)
        )
    return TensorJet(val, d1, d2, len(out))


def evaluate(fdef: TensorFieldDef, chart: Chart, points, params: Mapping[str, float] | None = None) -> TensorJet:
    """Evaluate every component of ``fdef`` as a second-order jet at ``points``."""
    pts = np.asarray(points, dtype=float)
    if pts.shape[-1] != chart.dim:
        raise ValueError(f"points have {pts.shape[-1]} coordinates, chart has {chart.dim}")
    lo = np.array([b[0] for b in chart.sample_box])
    hi = np.array([b[1] for b in chart.sample_box])
    if np.any(pts < lo) or np.any(pts > hi):
        warnings.warn("evaluation point outside the chart sample box", stacklevel=2)
    batch = pts.shape[:-1]
    shape = fdef.components.shape
    dim = chart.dim
    val = np.zeros(batch + shape)
    d1 = np.zeros(batch + shape + (dim,))
    d2 = np.zeros(batch + shape + (dim, dim))
    for idx in np.ndindex(shape):
        e = fdef.components[idx]
        if isinstance(e, Expr) and e == ZERO:
            continue
        j = eval_jet2(e, pts, params)
        sl = (Ellipsis,) + idx
        val[sl] = j.value
        d1[sl + (slice(None),)] = j.grad
        d2[sl + (slice(None), slice(None))] = j.hess
    return TensorJet(val, d1, d2, len(shape))


def sample_points(chart: Chart, samples: int = 100, seed: int = 42) -> np.ndarray:
    """Seeded uniform points in the sample box; exact zeros are shifted by 1e-3."""
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in chart.sample_box])
    hi = np.array([b[1] for b in chart.sample_box])
    pts = rng.uniform(lo, hi, size=(samples, chart.dim))
    pts[pts == 0.0] += 1e-3
    return pts


# --------------------------------------------------------------------------
# Pointwise linear algebra
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NullSpace:
    dim: int
    basis: np.ndarray  # (cols, dim), orthonormal columns
    rank: int
    singular_values: np.ndarray


def null_space(m, tol: float = RANK_RTOL) -> NullSpace:
    """Kernel of ``m`` via SVD; singular values below ``tol * sigma_max`` count as zero."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    cols = m.shape[1]
    if m.size == 0:
        return NullSpace(cols, np.eye(cols), 0, np.zeros(0))
    _, s, vh = np.linalg.svd(m, full_matrices=True)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > tol * smax)) if smax > 0 else 0
    basis = vh[rank:].T.copy()
    return NullSpace(cols - rank, basis, rank, s)


def matrix_rank(m, tol: float = RANK_RTOL) -> int:
    return null_space(m, tol).rank


def symmetric_eigenvalues(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return np.linalg.eigvalsh(0.5 * (m + np.swapaxes(m, -1, -2)))


def check_positive_definite(g) -> None:
    lam = symmetric_eigenvalues(g)
    if np.min(lam) <= PD_FLOOR:
        raise np.linalg.LinAlgError(f"metric is not positive definite (smallest eigenvalue {np.min(lam):.3g})")


def g_orthonormalize(vectors: np.ndarray, g: np.ndarray) -> np.ndarray:
    """g-orthonormal basis (columns) of the span of independent columns."""
    vectors = np.asarray(vectors, dtype=float).reshape(g.shape[0], -1)
    if vectors.shape[1] == 0:
        return vectors
    gram = vectors.T @ g @ vectors
    chol = np.linalg.cholesky(0.5 * (gram + gram.T))
    return np.linalg.solve(chol, vectors.T).T


def orthogonal_complement(basis, g_at_point, within=None, tol: float = RANK_RTOL) -> np.ndarray:
    """g-orthonormal basis (columns) of the g-complement of span(basis) inside span(within)."""
    g = np.asarray(g_at_point, dtype=float)
    dim = g.shape[0]
    check_positive_definite(g)
    if within is None:
        w = np.eye(dim)
    else:
        within = np.asarray(within, dtype=float).reshape(dim, -1)
        u, s, _ = np.linalg.svd(within, full_matrices=False)
        r = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
        w = u[:, :r]
    w = g_orthonormalize(w, g)
    b = np.asarray(basis, dtype=float).reshape(dim, -1)
    if b.shape[1] == 0:
        return w
    coeffs = w.T @ g @ b  # coordinates of the basis in the orthonormal w frame
    ns = null_space(coeffs.T, tol)
    return w @ ns.basis


# --------------------------------------------------------------------------
# Manifold definition files
# --------------------------------------------------------------------------

_EXPR = {"type": ["string", "number"]}
MANIFOLD_SCHEMA = {
    "type": "object",
    "required": ["dim", "coords", "phi", "xi", "eta", "g"],
    "properties": {
        "name": {"type": "string"},
        "dim": {"type": "integer", "minimum": 3},
        "coords": {"type": "array", "items": {"type": "string"}},
        "params": {"type": "object", "additionalProperties": {"type": "number"}},
        "sample_box": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        },
        "phi": {"type": "array", "items": {"type": "array", "items": _EXPR}},
        "xi": {"type": "array", "items": _EXPR},
        "eta": {"type": "array", "items": _EXPR},
        "g": {"type": "array", "items": {"type": "array", "items": _EXPR}},
    },
}


class ManifoldFileError(ValueError):
    """Schema or expression error in a manifold file, with a JSON path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class ManifoldDef:
    chart: Chart
    params: dict[str, float]
    phi: TensorFieldDef
    xi: TensorFieldDef
    eta: TensorFieldDef
    g: TensorFieldDef
    name: str = "manifold"

    def __post_init__(self):
        pass

    def to_json(self) -> dict:
        out = {
            "name": self.name,
            "dim": self.chart.dim,
            "coords": list(self.chart.coord_names),
            "params": dict(self.params),
            "phi": self.phi.to_source(),
            "xi": self.xi.to_source(),
            "eta": self.eta.to_source(),
            "g": self.g.to_source(),
        }
        if any(b != (-1.0, 1.0) for b in self.chart.sample_box):
            out["sample_box"] = [list(b) for b in self.chart.sample_box]
        return out


def _json_path(parts) -> str:
    s = "$"
    for p in parts:
        s += f"[{p}]" if isinstance(p, int) else f".{p}"
    return s


def manifold_from_json(data: Mapping, cls=ManifoldDef):
    try:
        jsonschema.validate(data, MANIFOLD_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ManifoldFileError(_json_path(exc.absolute_path), exc.message) from None
    dim = data["dim"]
    coords = list(data["coords"])
    if len(coords) != dim:
        raise ManifoldFileError("$.coords", f"expected {dim} names, got {len(coords)}")
    params = {k: float(v) for k, v in data.get("params", {}).items()}
    box = data.get("sample_box")
    if box is not None:
        if len(box) != dim:
            raise ManifoldFileError("$.sample_box", f"expected {dim} intervals")
        box = tuple((float(a), float(b)) for a, b in box)
    try:
        chart = Chart(tuple(coords), box)
    except ValueError as exc:
        raise ManifoldFileError("$.coords", str(exc)) from None

    def parse(value, path):
        try:
            return parse_expression(str(value), coords, list(params))
        except ExprError as exc:
            raise ManifoldFileError(path, str(exc)) from None

    def vec(key):
        items = data[key]
        if len(items) != dim:
            raise ManifoldFileError(f"$.{key}", f"expected {dim} entries, got {len(items)}")
        return [parse(v, f"$.{key}[{i}]") for i, v in enumerate(items)]

    def mat(key):
        rows = data[key]
        if len(rows) != dim:
            raise ManifoldFileError(f"$.{key}", f"expected {dim} rows, got {len(rows)}")
        out = []
        for i, row in enumerate(rows):
            if len(row) != dim:
                raise ManifoldFileError(f"$.{key}[{i}]", f"expected {dim} entries, got {len(row)}")
            out.append([parse(v, f"$.{key}[{i}][{j}]") for j, v in enumerate(row)])
        return out

    try:
        return cls(
            chart=chart,
            params=params,
            phi=AffinorDef(mat("phi")),
            xi=VectorFieldDef(vec("xi")),
            eta=OneFormDef(vec("eta")),
            g=MetricDef(mat("g")),
            name=str(data.get("name", "manifold")),
        )
    except ValueError as exc:
        if isinstance(exc, ManifoldFileError):
            raise
        raise ManifoldFileError("$.dim", str(exc)) from None


def load_manifold(path: str | Path, cls=ManifoldDef):
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ManifoldFileError("$", f"invalid JSON: {exc}") from None
    return manifold_from_json(data, cls)
