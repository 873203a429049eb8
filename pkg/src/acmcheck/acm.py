"""Almost contact metric structures: axioms, torsion, classification.

All analysis routines take a :class:`PointEvaluation`, i.e. the structure
materialized (with derivatives) at a batch of sample points, and return
:class:`Residual` objects holding per-point values.  Classification uses
the coordinate frame as the spanning set of test vectors, so every residual
is a maximum over coordinate components.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np

from . import calculus as calc
from .fields import (
    ManifoldDef,
    TensorJet,
    contract,
    evaluate,
    load_manifold,
    manifold_from_json,
    matrix_rank,
    orthogonal_complement,
)

DEFAULT_TOL = 1e-8
# d eta below this everywhere counts as the trivial (cosymplectic-type) case
TRIVIAL_DETA = 1e-9

FLAG_ORDER = (
    "contact_metric",
    "almost_kenmotsu",
    "almost_cosymplectic",
    "normal",
    "quasi_sasakian",
    "anti_quasi_sasakian",
    "generalized_qs_family",
)


class AxiomError(ValueError):
    """Raised when an operation needs a genuine almost contact metric structure."""


# --------------------------------------------------------------------------
# Residuals
# --------------------------------------------------------------------------

@dataclass
class Residual:
    """Per-point absolute and normalized residuals of one identity.

    The normalized value divides by ``1 + max |term|`` over the identity's
    terms at that point.
    """

    abs_per_point: np.ndarray
    rel_per_point: np.ndarray

    @property
    def abs(self) -> float:
        return float(np.max(self.abs_per_point)) if self.abs_per_point.size else 0.0

    @property
    def rel(self) -> float:
        return float(np.max(self.rel_per_point)) if self.rel_per_point.size else 0.0

    @classmethod
    def between(cls, lhs, rhs, *terms) -> "Residual":
        lhs = np.asarray(lhs, dtype=float)
        rhs = np.broadcast_to(np.asarray(rhs, dtype=float), lhs.shape)
        n = lhs.shape[0]
        diff = np.abs(lhs - rhs).reshape(n, -1)
        mags = [np.abs(lhs).reshape(n, -1), np.abs(rhs).reshape(n, -1)]
        mags += [np.abs(np.asarray(t, dtype=float)).reshape(n, -1) for t in terms]
        scale = 1.0 + np.max(np.concatenate(mags, axis=1), axis=1) if diff.shape[1] else np.ones(n)
        a = np.max(diff, axis=1) if diff.shape[1] else np.zeros(n)
        return cls(a, a / scale)

    @classmethod
    def zero_of(cls, arr) -> "Residual":
        arr = np.asarray(arr, dtype=float)
        return cls.between(arr, np.zeros_like(arr))

    @classmethod
    def concat(cls, parts: Iterable["Residual"]) -> "Residual":
        parts = list(parts)
        return cls(np.concatenate([p.abs_per_point for p in parts]), np.concatenate([p.rel_per_point for p in parts]))

    def ok(self, tol: float) -> bool:
        return self.rel < tol

    def to_dict(self) -> dict:
        return {"abs": self.abs, "rel": self.rel}


# --------------------------------------------------------------------------
# Structure and its evaluation
# --------------------------------------------------------------------------

class AcmStructure(ManifoldDef):
    """The quadruple (phi, xi, eta, g) on a chart of dimension 2n+1."""

    def __post_init__(self):
        self.chart.n  # raises for even or too small charts

    @property
    def dim(self) -> int:
        return self.chart.dim

    @property
    def n(self) -> int:
        return self.chart.n

    @classmethod
    def from_json(cls, data) -> "AcmStructure":
        return manifold_from_json(data, cls)

    @classmethod
    def load(cls, path) -> "AcmStructure":
        return load_manifold(path, cls)

    def at(self, points) -> "PointEvaluation":
        return PointEvaluation(self, points)


class PointEvaluation:
    """Structure tensors and their derivatives at a batch of points.

    Derived quantities are computed on first access and cached; an instance
    is scratch space owned by one worker.
    """

    def __init__(self, s: AcmStructure, points):
        self.structure = s
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        chart, params = s.chart, s.params
        self.phi = evaluate(s.phi, chart, self.points, params)
        self.xi = evaluate(s.xi, chart, self.points, params)
        self.eta = evaluate(s.eta, chart, self.points, params)
        self.g = evaluate(s.g, chart, self.points, params)

    @property
    def dim(self) -> int:
        return self.structure.dim

    @property
    def npoints(self) -> int:
        return self.points.shape[0]

    # plain arrays -------------------------------------------------------
    @property
    def P(self) -> np.ndarray:
        return self.phi.val

    @property
    def G(self) -> np.ndarray:
        return self.g.val

    @property
    def XI(self) -> np.ndarray:
        return self.xi.val

    @property
    def ETA(self) -> np.ndarray:
        return self.eta.val

    @cached_property
    def eye(self) -> np.ndarray:
        return np.broadcast_to(np.eye(self.dim), (self.npoints, self.dim, self.dim))

    # exterior calculus ----------------------------------------------------
    @cached_property
    def deta(self) -> TensorJet:
        return calc.d_oneform_components(self.eta)

    @cached_property
    def fundamental_form(self) -> TensorJet:
        """Phi_ij = g(d_i, phi d_j)."""
        return contract("ik,kj->ij", self.g, self.phi)

    @cached_property
    def dPhi(self) -> np.ndarray:
        return calc.d_twoform_components(self.fundamental_form).val

    @cached_property
    def deta_phi(self) -> np.ndarray:
        """d eta(phi X, phi Y) in coordinates."""
        return np.einsum("...ab,...ac,...bd->...cd", self.deta.val, self.P, self.P)

    @cached_property
    def nijenhuis(self) -> np.ndarray:
        """N[i, a, b] = N_phi(d_a, d_b)^i."""
        P = self.P
        dP = self.phi.d1  # [i, j, k] = d_k phi^i_j
        t = np.einsum("...ka,...ibk->...iab", P, dP)
        u = np.einsum("...ik,...kab->...iab", P, dP)
        return t - np.swapaxes(t, -1, -2) + u - np.swapaxes(u, -1, -2)

    @cached_property
    def n1(self) -> np.ndarray:
        return self.nijenhuis + 2.0 * np.einsum("...ab,...l->...lab", self.deta.val, self.XI)

    # Lie derivatives along xi ------------------------------------------
    @cached_property
    def lie_phi(self) -> np.ndarray:
        return calc.lie_derivative(self.xi, self.phi, "ud").val

    @cached_property
    def lie_eta(self) -> np.ndarray:
        return calc.lie_derivative(self.xi, self.eta, "d").val

    @cached_property
    def lie_g(self) -> np.ndarray:
        return calc.lie_derivative(self.xi, self.g, "dd").val

    # Riemannian geometry -------------------------------------------------
    @cached_property
    def gamma(self) -> TensorJet:
        return calc.levi_civita(self.g)

    @cached_property
    def nabla_g(self) -> np.ndarray:
        return calc.covariant_derivative(self.g.truncate(1), "dd", self.gamma).val

    @cached_property
    def nabla_phi(self) -> np.ndarray:
        """[i, j, k] = ((nabla_{d_k} phi) d_j)^i."""
        return calc.covariant_derivative(self.phi, "ud", self.gamma).val

    @cached_property
    def nabla_xi(self) -> TensorJet:
        """[i, k] = (nabla_{d_k} xi)^i."""
        return calc.covariant_derivative(self.xi, "u", self.gamma)

    @cached_property
    def S(self) -> np.ndarray:
        """S_xi = -nabla xi as a matrix acting on column vectors."""
        return -self.nabla_xi.val

    @cached_property
    def A(self) -> np.ndarray:
        """A = -phi nabla xi = phi S_xi."""
        return self.P @ self.S

    @cached_property
    def nabla_S(self) -> np.ndarray:
        """[i, k, m] = ((nabla_{d_m} S_xi) d_k)^i."""
        return -calc.covariant_derivative(self.nabla_xi, "ud", self.gamma).val

    @cached_property
    def R(self) -> np.ndarray:
        return calc.curvature_tensor(self.gamma)

    @cached_property
    def jacobi(self) -> np.ndarray:
        """J_xi as a matrix: J[l, i] = (R_{d_i xi} xi)^l."""
        return np.einsum("...lkij,...k,...j->...li", self.R, self.XI, self.XI)


# --------------------------------------------------------------------------
# Operations
# --------------------------------------------------------------------------

def verify_axioms(ev: PointEvaluation) -> dict[str, Residual]:
    """Residuals of the almost contact metric axioms and derived identities."""
    P, G, xi, eta = ev.P, ev.G, ev.XI, ev.ETA
    outer = np.einsum("...i,...j->...ij", xi, eta)
    eta_eta = np.einsum("...i,...j->...ij", eta, eta)
    lam = np.linalg.eigvalsh(0.5 * (G + np.swapaxes(G, -1, -2)))
    return {
        "phi_squared": Residual.between(P @ P, -ev.eye + outer),
        "eta_xi": Residual.between(np.einsum("...i,...i->...", eta, xi)[:, None], 1.0),
        "metric_compatibility": Residual.between(np.swapaxes(P, -1, -2) @ G @ P, G - eta_eta),
        "phi_xi": Residual.zero_of(np.einsum("...ij,...j->...i", P, xi)),
        "eta_phi": Residual.zero_of(np.einsum("...i,...ij->...j", eta, P)),
        "eta_is_g_xi": Residual.between(eta, np.einsum("...ij,...j->...i", G, xi)),
        "g_symmetric": Residual.zero_of(G - np.swapaxes(G, -1, -2)),
        # recorded as a residual: how far the smallest eigenvalue is below the floor
        "g_positive_definite": Residual.zero_of(np.maximum(0.0, 1e-10 - lam[:, :1])),
    }


def axioms_hold(residuals: dict[str, Residual], tol: float = DEFAULT_TOL) -> bool:
    return all(r.ok(tol) for r in residuals.values())


def fundamental_form(ev: PointEvaluation, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Phi(X, Y) = g(X, phi Y) at each point."""
    return np.einsum("...i,...ij,...j->...", X, ev.fundamental_form.val, Y)


def nijenhuis(phi: TensorJet, X: TensorJet, Y: TensorJet) -> TensorJet:
    """N_phi(X, Y) from brackets of the pushed fields phi X, phi Y."""
    pX, pY = calc.apply(phi, X), calc.apply(phi, Y)
    br = calc.lie_bracket
    return (
        calc.apply(phi, calc.apply(phi, br(X, Y)))
        + br(pX, pY)
        - calc.apply(phi, br(pX, Y))
        - calc.apply(phi, br(X, pY))
    )


def n1_tensor(ev: PointEvaluation, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """N^(1)(X, Y) = N_phi(X, Y) + 2 d eta(X, Y) xi at each point."""
    return np.einsum("...lab,...a,...b->...l", ev.n1, X, Y)


def check_anti_invariance(ev: PointEvaluation) -> Residual:
    """|d eta(phi X, phi Y) + d eta(X, Y)| over the coordinate frame."""
    return Residual.between(ev.deta_phi, -ev.deta.val)


@dataclass
class StructureClass:
    flags: dict[str, bool]
    residuals: dict[str, Residual]
    informational: dict[str, float] = field(default_factory=dict)

    @property
    def names(self) -> list[str]:
        return [f for f in FLAG_ORDER if self.flags[f]]


def class_residuals(ev: PointEvaluation) -> dict[str, Residual]:
    deta = ev.deta.val
    Phi = ev.fundamental_form.val
    xi = ev.XI
    eta_wedge_phi = calc.wedge_1_2(ev.ETA, Phi)
    deta_xi = np.einsum("...ab,...l->...lab", deta, xi)
    deta_phi_xi = np.einsum("...ab,...l->...lab", ev.deta_phi, xi)
    return {
        "d_eta_zero": Residual.zero_of(deta),
        "d_Phi_zero": Residual.zero_of(ev.dPhi),
        "contact_d_eta_eq_Phi": Residual.between(deta, Phi),
        "kenmotsu_d_Phi_eq_2_eta_wedge_Phi": Residual.between(ev.dPhi, 2.0 * eta_wedge_phi),
        "normal_N1_zero": Residual.zero_of(ev.n1),
        "aqs_N1_eq_4_d_eta_xi": Residual.between(ev.n1, 4.0 * deta_xi),
        "generalized_N1": Residual.between(ev.n1, 2.0 * (deta_xi - deta_phi_xi)),
    }


def contact_rank(ev: PointEvaluation) -> np.ndarray:
    """Rank of d eta restricted to ker eta at each point."""
    ranks = []
    for p in range(ev.npoints):
        h = orthogonal_complement(ev.XI[p][:, None], ev.G[p])
        ranks.append(matrix_rank(h.T @ ev.deta.val[p] @ h))
    return np.array(ranks)


def flags_from_residuals(res: dict[str, Residual], tol: float = DEFAULT_TOL) -> dict[str, bool]:
    """Class flags; a flag is set iff every defining residual is below ``tol``.

    The quasi-Sasakian, anti-quasi-Sasakian and generalized flags also need
    d eta to be nonzero somewhere; with d eta = 0 their identities collapse
    to those of a cosymplectic structure.
    """
    ok = {k: r.ok(tol) for k, r in res.items()}
    nontrivial = res["d_eta_zero"].abs > TRIVIAL_DETA
    return {
        "contact_metric": ok["contact_d_eta_eq_Phi"],
        "almost_kenmotsu": ok["d_eta_zero"] and ok["kenmotsu_d_Phi_eq_2_eta_wedge_Phi"],
        "almost_cosymplectic": ok["d_eta_zero"] and ok["d_Phi_zero"],
        "normal": ok["normal_N1_zero"],
        "quasi_sasakian": nontrivial and ok["normal_N1_zero"] and ok["d_Phi_zero"],
        "anti_quasi_sasakian": nontrivial and ok["aqs_N1_eq_4_d_eta_xi"] and ok["d_Phi_zero"],
        "generalized_qs_family": nontrivial and ok["generalized_N1"] and ok["d_Phi_zero"],
    }


def contact_info(res: dict[str, Residual], ranks: np.ndarray, n: int) -> dict:
    return {
        "d_eta_max_abs": res["d_eta_zero"].abs,
        "contact_rank_min": int(ranks.min()),
        "contact_rank_max": int(ranks.max()),
        "eta_is_contact": bool(ranks.min() == 2 * n),
    }


def classify(ev: PointEvaluation, tol: float = DEFAULT_TOL) -> StructureClass:
    """Membership in the named classes, from residuals over all sample points."""
    axioms = verify_axioms(ev)
    if not axioms_hold(axioms, tol):
        bad = {k: r.rel for k, r in axioms.items() if not r.ok(tol)}
        raise AxiomError(f"not an almost contact metric structure: {bad}")
    res = class_residuals(ev)
    info = contact_info(res, contact_rank(ev), ev.structure.n)
    return StructureClass(flags_from_residuals(res, tol), res, info)


def aqs_conditions_hold(ev: PointEvaluation, tol: float = DEFAULT_TOL) -> bool:
    """Defining identities of anti-quasi-Sasakian (trivial case d eta = 0 included)."""
    res = class_residuals(ev)
    return res["aqs_N1_eq_4_d_eta_xi"].ok(tol) and res["d_Phi_zero"].ok(tol)
