"""Anti-quasi-Sasakian analysis.

Identity checks (a torsion identity under phi, invariance of phi along xi,
the covariant derivative of phi), the operators ``S_xi = -nabla xi`` and
``A = -phi nabla xi``, curvature of the characteristic direction (Jacobi
operator, xi-sectional curvature), and the orthogonal splitting
``TM = {xi} + H1 + H2`` where ``H1`` collects the directions X with
``nabla_X phi = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import calculus as calc
from .acm import DEFAULT_TOL, PointEvaluation, Residual, aqs_conditions_hold
from .fields import RANK_RTOL, g_orthonormalize, null_space, orthogonal_complement, symmetric_eigenvalues

FD_STEP = 1e-5
CONSTANCY_SPREAD = 1e-6
CONSTANCY_MIN_SAMPLES = 50
NABLA_PHI_CANDIDATES = ("first_term_2eta_X_Y", "first_term_2eta_X_AY", "no_first_term")


class PreconditionError(ValueError):
    pass


class DistributionError(ValueError):
    """H1 is not a smooth constant-rank distribution near a sample point."""


def _xi_tensor(m: np.ndarray, xi: np.ndarray) -> np.ndarray:
    return np.einsum("...ab,...l->...lab", m, xi)


def _require_aqs(ev: PointEvaluation, tol: float):
    if not aqs_conditions_hold(ev, tol):
        raise PreconditionError("structure does not satisfy N_phi = 2 d eta (x) xi and d Phi = 0")


# --------------------------------------------------------------------------
# Torsion identities
# --------------------------------------------------------------------------

def torsion_identity_sides(ev: PointEvaluation, wedge_factor: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of N(phi X, phi Y) = -N(X,Y) - 2 d eta(X,Y) xi - ... over the coordinate frame."""
    P, N, xi, eta = ev.P, ev.nijenhuis, ev.XI, ev.ETA
    lhs = np.einsum("...lab,...ac,...bd->...lcd", N, P, P)
    w = calc.wedge_1_1(eta, ev.lie_eta, wedge_factor)
    pl = P @ ev.lie_phi
    rhs = (
        -N
        - 2.0 * _xi_tensor(ev.deta.val, xi)
        - 2.0 * _xi_tensor(ev.deta_phi, xi)
        + 2.0 * _xi_tensor(w, xi)
        - np.einsum("...a,...lb->...lab", eta, pl)
        + np.einsum("...b,...la->...lab", eta, pl)
    )
    return lhs, rhs


def check_torsion_identity(ev: PointEvaluation, wedge_factor: float = 0.5) -> Residual:
    """Residual of the torsion identity; holds on every almost contact metric structure
    with the Alt wedge (``wedge_factor`` 1/2)."""
    lhs, rhs = torsion_identity_sides(ev, wedge_factor)
    return Residual.between(lhs, rhs, ev.nijenhuis)


def check_xi_invariance(ev: PointEvaluation, tol: float = DEFAULT_TOL) -> dict[str, Residual]:
    """L_xi phi = 0 and anti-invariance of d eta, plus the intermediate L_xi eta = 0."""
    _require_aqs(ev, tol)
    return {
        "lie_xi_phi": Residual.zero_of(ev.lie_phi),
        "anti_invariance": Residual.between(ev.deta_phi, -ev.deta.val),
        "lie_xi_eta": Residual.zero_of(ev.lie_eta),
    }


# --------------------------------------------------------------------------
# Shape operators and nabla phi
# --------------------------------------------------------------------------

@dataclass
class ShapeOperators:
    S_xi: np.ndarray  # (N, dim, dim)
    A: np.ndarray
    nabla_S: np.ndarray  # [i, k, m] = ((nabla_m S) d_k)^i
    residuals: dict[str, Residual]


def compute_shape_operators(ev: PointEvaluation) -> ShapeOperators:
    S, A, P, G = ev.S, ev.A, ev.P, ev.G
    gS = G @ S
    # two routes to the Killing equation: Lie derivative of g vs symmetrized nabla xi
    nxi = -S
    # [i, j] = g(nabla_i xi, d_j) + g(d_i, nabla_j xi)
    sym_nabla = np.einsum("...mj,...mi->...ij", G, nxi) + np.einsum("...im,...mj->...ij", G, nxi)
    residuals = {
        "d_eta_eq_g_X_S_Y": Residual.between(ev.deta.val, gS),
        "A_phi_plus_phi_A": Residual.zero_of(A @ P + P @ A),
        "eta_S": Residual.zero_of(np.einsum("...i,...ik->...k", ev.ETA, S)),
        "S_skew": Residual.zero_of(gS + np.swapaxes(gS, -1, -2)),
        "killing_lie_xi_g": Residual.zero_of(ev.lie_g),
        "naturality_lie_g_vs_nabla_xi": Residual.between(ev.lie_g, sym_nabla),
        "nabla_xi_xi": Residual.zero_of(np.einsum("...ik,...k->...i", nxi, ev.XI)),
    }
    return ShapeOperators(S, A, ev.nabla_S, residuals)


def nabla_phi_candidates(ev: PointEvaluation) -> dict[str, np.ndarray]:
    """Three readings of (nabla_X phi) Y = c eta(X)(.) + eta(Y) AX + g(X, AY) xi, as [i,j,k] arrays."""
    A, G, xi, eta = ev.A, ev.G, ev.XI, ev.ETA
    common = np.einsum("...j,...ik->...ijk", eta, A) + np.einsum("...km,...mj,...i->...ijk", G, A, xi)
    return {
        "first_term_2eta_X_Y": 2.0 * np.einsum("...k,ij->...ijk", eta, np.eye(ev.dim)) + common,
        "first_term_2eta_X_AY": 2.0 * np.einsum("...k,...ij->...ijk", eta, A) + common,
        "no_first_term": common,
    }


def check_nabla_phi_formula(ev: PointEvaluation, tol: float = DEFAULT_TOL, require_aqs: bool = True) -> dict[str, Residual]:
    """Residual of each candidate right-hand side against the directly computed nabla phi."""
    if require_aqs:
        _require_aqs(ev, tol)
    direct = ev.nabla_phi
    return {name: Residual.between(direct, rhs) for name, rhs in nabla_phi_candidates(ev).items()}


def nabla_xi_phi(ev: PointEvaluation) -> np.ndarray:
    """(nabla_xi phi) as [i, j] arrays."""
    return np.einsum("...ijk,...k->...ij", ev.nabla_phi, ev.XI)


# --------------------------------------------------------------------------
# Curvature
# --------------------------------------------------------------------------

@dataclass
class JacobiData:
    J_xi: np.ndarray  # (N, dim, dim)
    eigenvalues: np.ndarray  # (N, dim), of J_xi as a g-self-adjoint operator
    rank: np.ndarray  # (N,)
    residuals: dict[str, Residual]


def g_eigenvalues(form: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Eigenvalues of the symmetric bilinear ``form`` relative to the metric ``G``."""
    L = np.linalg.cholesky(G)
    Linv = np.linalg.inv(L)
    return symmetric_eigenvalues(Linv @ form @ np.swapaxes(Linv, -1, -2))


def jacobi_checks(ev: PointEvaluation) -> JacobiData:
    R, S, G, xi = ev.R, ev.S, ev.G, ev.XI
    nS = ev.nabla_S  # [l, k, m] = ((nabla_m S) d_k)^l
    J = ev.jacobi
    S2 = S @ S
    r_xi = np.einsum("...lkij,...k->...lij", R, xi)  # (R_{d_i d_j} xi)^l
    nabla_S_side = -np.einsum("...lji->...lij", nS) + nS
    r_form = np.einsum("...zl,...lij->...ijz", G, r_xi)  # g(R_{XY} xi, Z) with X=d_i, Y=d_j, Z=d_z
    # -g(X, (nabla_Z S) Y) and its two cyclic relabelings
    readings = {
        "X_nablaZ_S_Y": -np.einsum("...il,...ljz->...ijz", G, nS),
        "Y_nablaX_S_Z": -np.einsum("...jl,...lzi->...ijz", G, nS),
        "Z_nablaY_S_X": -np.einsum("...zl,...lij->...ijz", G, nS),
    }
    form = np.einsum("...zl,...li->...iz", G, J)  # [i, z] = g(J d_i, d_z)
    residuals = {
        "R_XY_xi_vs_nabla_S": Residual.between(r_xi, nabla_S_side),
        **{f"R_XY_xi_Z_vs_{k}": Residual.between(r_form, v) for k, v in readings.items()},
        # right side taken at Z, so both sides are bilinear in (X, Z)
        "gJX_Z_vs_minus_gX_S2Z": Residual.between(form, -np.einsum("...il,...lz->...iz", G, S2)),
        "two_path_J_vs_minus_S2": Residual.between(J, -S2),
        "J_form_symmetric": Residual.zero_of(form - np.swapaxes(form, -1, -2)),
    }
    sym = 0.5 * (form + np.swapaxes(form, -1, -2))
    eig = g_eigenvalues(sym, G)
    ranks = np.array([null_space(J[p]).rank for p in range(ev.npoints)])
    residuals["J_eigenvalue_floor"] = Residual.zero_of(np.maximum(0.0, -eig))
    return JacobiData(J, eig, ranks, residuals)


def xi_sectional(ev: PointEvaluation, X: np.ndarray, degenerate_tol: float = 1e-8) -> np.ndarray:
    """g(R_{X xi} xi, X) after projecting X to xi-perp and normalizing."""
    X = np.broadcast_to(np.asarray(X, dtype=float), ev.XI.shape)
    xi, eta, G = ev.XI, ev.ETA, ev.G
    Xp = X - np.einsum("...i,...i->...", eta, X)[..., None] * xi
    norm2 = np.einsum("...i,...ij,...j->...", Xp, G, Xp)
    ref = np.einsum("...i,...ij,...j->...", X, G, X)
    if np.any(norm2 <= degenerate_tol**2 * np.maximum(ref, 1e-300)):
        raise ValueError("direction is parallel to xi after projection")
    Xu = Xp / np.sqrt(norm2)[..., None]
    JX = np.einsum("...li,...i->...l", ev.jacobi, Xu)
    return np.einsum("...l,...lm,...m->...", JX, G, Xu)


def xi_sectional_samples(ev: PointEvaluation) -> np.ndarray:
    """xi-sectional curvature along every coordinate direction not parallel to xi (flat array)."""
    out = []
    for p in range(ev.npoints):
        sub = _Single(ev, p)
        for c in range(ev.dim):
            e = np.zeros(ev.dim)
            e[c] = 1.0
            try:
                out.append(float(xi_sectional(sub, e[None, :])[0]))
            except ValueError:
                continue
    return np.array(out)


class _Single:
    """Read-only view of one point of a PointEvaluation (duck-typed)."""

    def __init__(self, ev: PointEvaluation, p: int):
        sl = slice(p, p + 1)
        self.XI, self.ETA, self.G, self.jacobi = ev.XI[sl], ev.ETA[sl], ev.G[sl], ev.jacobi[sl]


@dataclass
class SectionalSummary:
    count: int
    min: float
    max: float
    constant: bool
    c: float | None
    c_positive: bool | None
    constancy_residual: float | None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def summarize_xi_sectional(values: np.ndarray, S2: np.ndarray, proj: np.ndarray) -> SectionalSummary:
    """Constancy test: spread below 1e-6 over at least 50 samples.

    ``S2`` and ``proj`` (= Id - eta (x) xi) are per-point arrays used for the
    residual of S^2 + c (Id - eta (x) xi) when a constant c is detected.
    """
    count = int(values.size)
    if count == 0:
        return SectionalSummary(0, 0.0, 0.0, False, None, None, None)
    lo, hi = float(values.min()), float(values.max())
    constant = count >= CONSTANCY_MIN_SAMPLES and hi - lo < CONSTANCY_SPREAD
    if constant and abs(float(values.mean())) > CONSTANCY_SPREAD:
        c = float(values.mean())
        res = Residual.between(S2, -c * proj)
        return SectionalSummary(count, lo, hi, True, c, c > 0, res.abs)
    # zero curvature everywhere: constant but no positive c to report
    return SectionalSummary(count, lo, hi, constant, None, None, None)


# --------------------------------------------------------------------------
# Splitting TM = {xi} + H1 + H2
# --------------------------------------------------------------------------

@dataclass
class SplitBasis:
    xi_dir: np.ndarray  # unit xi
    H1: np.ndarray  # (dim, r) g-orthonormal columns
    H2: np.ndarray  # (dim, dim-1-r)
    g: np.ndarray

    @property
    def rank_H1(self) -> int:
        return self.H1.shape[1]

    @property
    def projector_H1(self) -> np.ndarray:
        """g-orthogonal projector onto H1."""
        return self.H1 @ self.H1.T @ self.g


def h1_basis(nabla_phi: np.ndarray, G: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Euclidean-orthonormal basis of {X : nabla_X phi = 0} intersected with xi-perp."""
    dim = G.shape[0]
    M = nabla_phi.reshape(dim * dim, dim)
    row = G @ xi
    smax = max(np.linalg.norm(M, 2), 1.0)
    ns = null_space(np.vstack([M, smax * row / np.linalg.norm(row)]), RANK_RTOL)
    return ns.basis


def split_distributions(ev: PointEvaluation) -> list[SplitBasis]:
    out = []
    for p in range(ev.npoints):
        G, xi = ev.G[p], ev.XI[p]
        k = h1_basis(ev.nabla_phi[p], G, xi)
        H1 = g_orthonormalize(k, G)
        xi_unit = xi / np.sqrt(xi @ G @ xi)
        H2 = orthogonal_complement(np.column_stack([xi_unit, H1]), G)
        out.append(SplitBasis(xi_unit, H1, H2, G))
    return out


def h1_rank_summary(ranks: np.ndarray) -> dict:
    ranks = np.asarray(ranks, dtype=int)
    return {
        "min": int(ranks.min()),
        "max": int(ranks.max()),
        "constant": bool(ranks.min() == ranks.max()),
    }


def _projector(nabla_phi, G, xi) -> tuple[np.ndarray, int]:
    k = h1_basis(nabla_phi, G, xi)
    B = g_orthonormalize(k, G)
    return B @ B.T @ G, B.shape[1]


def _coefficients(basis: np.ndarray, G: np.ndarray, v: np.ndarray) -> np.ndarray:
    return basis.T @ G @ v


def check_involutivity(ev: PointEvaluation, splits: list[SplitBasis] | None = None, h: float = FD_STEP) -> dict[str, Residual]:
    """Involutivity of H1 and {xi} + H1 via a projected coordinate frame.

    E_c = P1 d_c for coordinates c chosen by pivoted QR of the H1 projector
    P1 at the base point.  Derivatives of P1 come from central differences
    with step ``h``; everything else is exact.
    """
    splits = splits if splits is not None else split_distributions(ev)
    ranks = {sb.rank_H1 for sb in splits}
    if len(ranks) != 1 or 0 in ranks:
        raise PreconditionError(f"H1 rank must be constant and positive, got {sorted(ranks)}")
    dim = ev.dim
    npts = ev.npoints
    offsets = np.concatenate([h * np.eye(dim), -h * np.eye(dim)])  # (2 dim, dim)
    nbr_pts = (ev.points[:, None, :] + offsets[None, :, :]).reshape(-1, dim)
    nbr = ev.structure.at(nbr_pts)
    nbr_np = nbr.nabla_phi.reshape(npts, 2 * dim, dim, dim, dim)
    nbr_G = nbr.G.reshape(npts, 2 * dim, dim, dim)
    nbr_xi = nbr.XI.reshape(npts, 2 * dim, dim)

    out = {k: [] for k in ("bracket_H1_in_H2", "bracket_H1_along_xi", "xi_bracket_in_H2",
                           "xi_bracket_along_xi", "d_eta_on_H1", "A_bracket")}
    for p, sb in enumerate(splits):
        G, xi, r = ev.G[p], ev.XI[p], sb.rank_H1
        P1 = sb.projector_H1
        _, _, piv = scipy.linalg.qr(P1, pivoting=True)
        cols = np.sort(piv[:r])
        dP = np.empty((dim, dim, dim))  # [:, :, k] = d_k P1
        for k in range(dim):
            Pp, rp = _projector(nbr_np[p, k], nbr_G[p, k], nbr_xi[p, k])
            Pm, rm = _projector(nbr_np[p, dim + k], nbr_G[p, dim + k], nbr_xi[p, dim + k])
            if rp != r or rm != r:
                raise DistributionError(f"H1 rank changes near sample point {p}")
            dP[:, :, k] = (Pp - Pm) / (2 * h)
        E = P1[:, cols]  # (dim, r)
        DE = dP[:, cols, :]  # [i, a, k] = d_k E_a^i
        dxi = ev.xi.d1[p]  # [i, k] = d_k xi^i
        eta_row = G @ xi
        deta = ev.deta.val[p]
        A = ev.A[p]
        b_h2 = b_xi = x_h2 = x_xi = d_e = a_b = 0.0
        for a in range(r):
            xb = DE[:, a, :] @ xi - dxi @ E[:, a]
            x_h2 = max(x_h2, np.max(np.abs(_coefficients(sb.H2, G, xb)), initial=0.0))
            x_xi = max(x_xi, abs(eta_row @ xb))
            for b in range(a + 1, r):
                br = DE[:, b, :] @ E[:, a] - DE[:, a, :] @ E[:, b]
                b_h2 = max(b_h2, np.max(np.abs(_coefficients(sb.H2, G, br)), initial=0.0))
                b_xi = max(b_xi, abs(eta_row @ br))
                d_e = max(d_e, abs(E[:, a] @ deta @ E[:, b]))
                a_b = max(a_b, np.max(np.abs(A @ br)))
        for key, val in zip(out, (b_h2, b_xi, x_h2, x_xi, d_e, a_b)):
            out[key].append(val)
    return {k: Residual(np.array(v), np.array(v)) for k, v in out.items()}


def check_leaf_structures(ev: PointEvaluation, splits: list[SplitBasis] | None = None) -> dict[str, Residual]:
    """Pointwise Kaehler (on H1) and cosymplectic (on {xi} + H1) leaf conditions."""
    splits = splits if splits is not None else split_distributions(ev)
    ranks = {sb.rank_H1 for sb in splits}
    if len(ranks) != 1 or 0 in ranks:
        raise PreconditionError(f"H1 rank must be constant and positive, got {sorted(ranks)}")
    out = {k: [] for k in ("phi_invariance_H1", "nijenhuis_H1_projected", "nijenhuis_H1_full",
                           "d_Phi_H1", "d_eta_xi_H1", "d_Phi_xi_H1", "N1_xi_H1")}
    for p, sb in enumerate(splits):
        B = sb.H1
        P1 = sb.projector_H1
        V = np.column_stack([ev.XI[p], B])
        N = ev.nijenhuis[p]
        NB = np.einsum("lab,ac,bd->lcd", N, B, B)
        vals = (
            np.abs((np.eye(ev.dim) - P1) @ ev.P[p] @ B).max(),
            np.abs(np.einsum("ml,lcd->mcd", P1, NB)).max(),
            np.abs(NB).max(),
            np.abs(np.einsum("abc,ai,bj,ck->ijk", ev.dPhi[p], B, B, B)).max(),
            np.abs(V.T @ ev.deta.val[p] @ V).max(),
            np.abs(np.einsum("abc,ai,bj,ck->ijk", ev.dPhi[p], V, V, V)).max(),
            np.abs(np.einsum("lab,ac,bd->lcd", ev.n1[p], V, V)).max(),
        )
        for key, val in zip(out, vals):
            out[key].append(float(val))
    return {k: Residual(np.array(v), np.array(v)) for k, v in out.items()}
