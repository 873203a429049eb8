"""Pointwise differential operators on tensor jets.

Normalizations (used everywhere downstream):

* ``d_oneform``: ``2 d eta(X,Y) = X eta(Y) - Y eta(X) - eta([X,Y])``, so in
  coordinates ``d eta_ij = (d_i eta_j - d_j eta_i) / 2``.
* ``d_twoform``: one third of the coboundary, so that
  ``3 d omega(X,Y,Z)`` equals the cyclic sum of ``(nabla_X omega)(Y,Z)``.
* wedge: ``alpha ^ beta = Alt(alpha (x) beta)``, i.e.
  ``(alpha ^ beta)(X,Y) = (alpha(X) beta(Y) - alpha(Y) beta(X)) / 2``.  This is
  the wedge for which ``d(f eta) = df ^ eta + f d eta`` holds with the
  normalizations above.
* curvature: ``R_{XY}Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z``
  with components ``R[l,k,i,j]`` so that ``(R_{XY}Z)^l = R[l,k,i,j] Z^k X^i Y^j``.

Covariant derivatives append the differentiation index last:
``nabla T[..., k] = (nabla_{d_k} T)[...]``.
"""
from __future__ import annotations

import numpy as np

from .fields import TensorJet, contract

_SLOT_LETTERS = "abcdefgh"


# --------------------------------------------------------------------------
# Vector fields and forms
# --------------------------------------------------------------------------

def directional(X: TensorJet, f: TensorJet) -> TensorJet:
    """X applied to a scalar jet ``f``; loses one derivative order."""
    return contract("k,k->", X, f.grad())


def apply(T: TensorJet, X: TensorJet) -> TensorJet:
    """Affinor (rank 2, up-down) acting on a vector field."""
    return contract("ij,j->i", T, X)


def pair(w: TensorJet, X: TensorJet) -> TensorJet:
    """1-form evaluated on a vector field."""
    return contract("i,i->", w, X)


def bilinear(B: TensorJet, X: TensorJet, Y: TensorJet) -> TensorJet:
    return contract("i,i->", contract("ij,j->i", B, Y), X)


def lie_bracket(X: TensorJet, Y: TensorJet) -> TensorJet:
    """Components of ``[X, Y] = X.dY - Y.dX``."""
    return contract("k,ik->i", X, Y.grad()) - contract("k,ik->i", Y, X.grad())


def d_oneform(eta: TensorJet, X: TensorJet, Y: TensorJet) -> TensorJet:
    """``d eta(X, Y)`` from the invariant coboundary formula (factor 1/2)."""
    t = directional(X, pair(eta, Y)) - directional(Y, pair(eta, X)) - pair(eta, lie_bracket(X, Y))
    return t.scale(0.5)


def d_oneform_components(eta: TensorJet) -> TensorJet:
    """Coordinate matrix ``d eta_ij``."""
    de = eta.grad()  # [j, i] = d_i eta_j
    return (de.transpose(1, 0) - de).scale(0.5)


def twoform_value(omega: TensorJet, X: TensorJet, Y: TensorJet) -> TensorJet:
    return bilinear(omega, X, Y)


def skew_residual(m: np.ndarray) -> np.ndarray:
    """Per-point max |m + m^T| over the last two axes."""
    return np.max(np.abs(m + np.swapaxes(m, -1, -2)), axis=(-2, -1))


def d_twoform(omega: TensorJet, X: TensorJet, Y: TensorJet, Z: TensorJet, skew_tol: float = 1e-9) -> TensorJet:
    """``d omega(X, Y, Z)``: one third of the six-term coboundary."""
    if np.max(skew_residual(omega.val)) > skew_tol:
        raise ValueError("2-form is not skew-symmetric at the evaluation points")
    w = lambda A, B: twoform_value(omega, A, B)  # noqa: E731
    t = (
        directional(X, w(Y, Z))
        - directional(Y, w(X, Z))
        + directional(Z, w(X, Y))
        - w(lie_bracket(X, Y), Z)
        + w(lie_bracket(X, Z), Y)
        - w(lie_bracket(Y, Z), X)
    )
    return t.scale(1.0 / 3.0)


def d_twoform_components(omega: TensorJet) -> TensorJet:
    """Coordinate 3-array ``d omega_ijk = (d_i w_jk + d_j w_ki + d_k w_ij) / 3``."""
    dw = omega.grad()  # [j, k, i] = d_i w_jk
    return (dw.transpose(1, 2, 0) + dw.transpose(2, 0, 1) + dw).scale(1.0 / 3.0)


def d_squared_check(eta: TensorJet, X: TensorJet, Y: TensorJet, Z: TensorJet) -> np.ndarray:
    """|3 d(d eta)(X,Y,Z)| from the coboundary of the invariant ``d eta``.

    Requires second-order jets for ``eta``, ``X``, ``Y`` and ``Z``.
    """
    de = lambda A, B: d_oneform(eta, A, B)  # noqa: E731
    t = (
        directional(X, de(Y, Z))
        - directional(Y, de(X, Z))
        + directional(Z, de(X, Y))
        - de(lie_bracket(X, Y), Z).truncate(0)
        + de(lie_bracket(X, Z), Y).truncate(0)
        - de(lie_bracket(Y, Z), X).truncate(0)
    )
    return np.abs(t.val)


def wedge_1_1(alpha: np.ndarray, beta: np.ndarray, factor: float = 0.5) -> np.ndarray:
    """Component matrix of ``alpha ^ beta`` (``factor`` 1/2 is the Alt convention)."""
    outer = alpha[..., :, None] * beta[..., None, :]
    return factor * (outer - np.swapaxes(outer, -1, -2))


def wedge_1_2(alpha: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Component 3-array of ``alpha ^ omega = Alt(alpha (x) omega)`` for a 2-form omega."""
    t = (
        alpha[..., :, None, None] * omega[..., None, :, :]
        + alpha[..., None, :, None] * np.swapaxes(omega, -1, -2)[..., :, None, :]
        + alpha[..., None, None, :] * omega[..., :, :, None]
    )
    return t / 3.0


# --------------------------------------------------------------------------
# Lie derivative
# --------------------------------------------------------------------------

def lie_derivative(xi: TensorJet, T: TensorJet, kinds: str) -> TensorJet:
    """``L_xi T`` for a tensor with index placement ``kinds`` ("u" up, "d" down)."""
    letters = _SLOT_LETTERS[: len(kinds)]
    res = contract(f"k,{letters}k->{letters}", xi, T.grad())
    dxi = xi.grad()  # [i, k] = d_k xi^i
    for s, kind in enumerate(kinds):
        L = letters[s]
        swapped = letters[:s] + "m" + letters[s + 1:]
        if kind == "u":
            res = res - contract(f"{L}m,{swapped}->{letters}", dxi, T)
        else:
            res = res + contract(f"m{L},{swapped}->{letters}", dxi, T)
    return res


# --------------------------------------------------------------------------
# Levi-Civita connection and curvature
# --------------------------------------------------------------------------

def levi_civita(g: TensorJet) -> TensorJet:
    """Christoffel symbols ``Gamma[k, i, j]`` with one derivative order less than ``g``."""
    ginv = g.inverse()
    dg = g.grad()  # [a, b, c] = d_c g_ab
    # T[l, i, j] = d_i g_jl + d_j g_il - d_l g_ij
    t = dg.transpose(1, 2, 0) + dg.transpose(1, 0, 2) - dg.transpose(2, 0, 1)
    return contract("kl,lij->kij", ginv, t).scale(0.5)


def covariant_derivative(T: TensorJet, kinds: str, gamma: TensorJet) -> TensorJet:
    """``nabla T`` with the differentiation index appended last."""
    letters = _SLOT_LETTERS[: len(kinds)]
    res = T.grad()
    for s, kind in enumerate(kinds):
        L = letters[s]
        swapped = letters[:s] + "m" + letters[s + 1:]
        if kind == "u":
            res = res + contract(f"{L}km,{swapped}->{letters}k", gamma, T)
        else:
            res = res - contract(f"mk{L},{swapped}->{letters}k", gamma, T)
    return res


def curvature_tensor(gamma: TensorJet) -> np.ndarray:
    """``R[l, k, i, j]``; needs ``gamma`` with at least one derivative order."""
    G = gamma.val
    dG = gamma.d1  # [l, j, k, i] = d_i Gamma^l_jk
    return (
        np.einsum("...ljki->...lkij", dG)
        - np.einsum("...likj->...lkij", dG)
        + np.einsum("...lim,...mjk->...lkij", G, G)
        - np.einsum("...ljm,...mik->...lkij", G, G)
    )


def curvature(R: np.ndarray, X: np.ndarray, Y: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """``R_{XY} Z`` at each point."""
    return np.einsum("...lkij,...k,...i,...j->...l", R, Z, X, Y)
