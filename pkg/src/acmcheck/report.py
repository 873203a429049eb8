"""Full verification pipeline producing a JSON-serializable report.

Sample points are processed in fixed-size chunks, so the per-point numbers
do not depend on how many worker threads run.  Chunk results are
concatenated in chunk order and reduced globally (max residuals, rank
min/max, spread of xi-sectional values).
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import aqs
from . import calculus as calc
from .acm import (
    FLAG_ORDER,
    AcmStructure,
    PointEvaluation,
    Residual,
    axioms_hold,
    class_residuals,
    contact_info,
    contact_rank,
    flags_from_residuals,
    verify_axioms,
)
from .fields import matrix_rank, sample_points

REPORT_VERSION = 1
CHUNK_SIZE = 20


@dataclass(frozen=True)
class RunConfig:
    samples: int = 100
    seed: int = 42
    tol: float = 1e-8
    involutivity_tol: float = 1e-5
    threads: int | None = None

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")
        if not 0 < self.involutivity_tol < 1:
            raise ValueError("involutivity_tol must lie in (0, 1)")
        if self.threads is not None and self.threads < 1:
            raise ValueError("threads must be >= 1")

    def to_dict(self) -> dict:
        # threads is deliberately absent: it must not influence the report
        d = asdict(self)
        d.pop("threads")
        return d


CONVENTIONS = {
    "d_oneform": "d eta(X,Y) = (X eta(Y) - Y eta(X) - eta([X,Y])) / 2",
    "d_twoform": "3 d omega(X,Y,Z) = cyclic sum of X omega(Y,Z) - omega([X,Y],Z)",
    "wedge": "(alpha ^ beta)(X,Y) = (alpha(X) beta(Y) - alpha(Y) beta(X)) / 2",
    "curvature": "R_XY Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z",
    "fundamental_form": "Phi(X,Y) = g(X, phi Y)",
    "jacobi_identity_reading": "g(J_xi X, Z) = -g(X, S_xi^2 Z) (right side evaluated at Z)",
    "residuals": "abs = max |lhs - rhs|; rel = abs / (1 + max |term|), per point, max over points",
}


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------

def _merge(parts: list[dict[str, Residual]]) -> dict[str, Residual]:
    return {k: Residual.concat([p[k] for p in parts]) for k in parts[0]}


def _table(res: dict[str, Residual]) -> dict:
    return {k: v.to_dict() for k, v in res.items()}


def _map(fn, items, threads):
    if threads == 1 or len(items) == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _engine_residuals(ev: PointEvaluation) -> dict[str, Residual]:
    """Internal consistency of the differential calculus on this structure."""
    G, R = ev.G, ev.R
    d2 = calc.d_twoform_components(ev.deta)  # needs d eta to first order
    Phi = ev.fundamental_form
    nPhi = calc.covariant_derivative(Phi, "dd", ev.gamma).val  # [a, b, k] = (nabla_k Phi)(a, b)
    cyc = nPhi + np.einsum("...jki->...ijk", nPhi) + np.einsum("...kij->...ijk", nPhi)
    bianchi = R + np.einsum("...lijk->...lkij", R) + np.einsum("...ljki->...lkij", R)
    Rlow = np.einsum("...wl,...lkij->...wkij", G, R)
    gam = ev.gamma.val
    return {
        "d_squared_eta": Residual.zero_of(d2.val),
        "coboundary_vs_nabla_Phi": Residual.between(3.0 * ev.dPhi, cyc, nPhi),
        "metric_compatibility_nabla_g": Residual.zero_of(ev.nabla_g),
        "christoffel_symmetric": Residual.zero_of(gam - np.swapaxes(gam, -1, -2)),
        "first_bianchi": Residual.zero_of(bianchi),
        "curvature_skew_XY": Residual.zero_of(Rlow + np.swapaxes(Rlow, -1, -2)),
        "curvature_skew_ZW": Residual.zero_of(Rlow + np.swapaxes(Rlow, -3, -4)),
    }


# --------------------------------------------------------------------------
# per-chunk passes
# --------------------------------------------------------------------------

@dataclass
class _Chunk:
    ev: PointEvaluation
    axioms: dict[str, Residual]
    data: dict | None = None
    splits: list | None = None


def _first_pass(structure: AcmStructure, tol: float, points: np.ndarray) -> _Chunk:
    ev = structure.at(points)
    ax = verify_axioms(ev)
    chunk = _Chunk(ev, ax)
    if not axioms_hold(ax, tol):
        return chunk
    shape = aqs.compute_shape_operators(ev)
    jac = aqs.jacobi_checks(ev)
    S2 = ev.S @ ev.S
    proj = ev.eye - np.einsum("...i,...j->...ij", ev.XI, ev.ETA)
    splits = aqs.split_distributions(ev)
    chunk.splits = splits
    chunk.data = {
        "class": class_residuals(ev),
        "contact_rank": contact_rank(ev),
        "torsion_identity": {
            "alt_wedge": aqs.check_torsion_identity(ev, 0.5),
            "unnormalized_wedge": aqs.check_torsion_identity(ev, 1.0),
        },
        "xi_invariance": {
            "lie_xi_phi": Residual.zero_of(ev.lie_phi),
            "anti_invariance": Residual.between(ev.deta_phi, -ev.deta.val),
            "lie_xi_eta": Residual.zero_of(ev.lie_eta),
        },
        "shape": shape.residuals,
        "nabla_phi": aqs.check_nabla_phi_formula(ev, require_aqs=False),
        "nabla_xi_phi": np.abs(aqs.nabla_xi_phi(ev)).reshape(ev.npoints, -1).max(axis=1),
        "jacobi": jac.residuals,
        "J_eig_min": jac.eigenvalues.min(axis=1),
        "J_rank": jac.rank,
        "S_rank": np.array([matrix_rank(ev.S[p]) for p in range(ev.npoints)]),
        "xi_sectional": aqs.xi_sectional_samples(ev),
        "S2": S2,
        "proj": proj,
        "h1_rank": np.array([sb.rank_H1 for sb in splits]),
        "h2_rank": np.array([sb.H2.shape[1] for sb in splits]),
        "engine": _engine_residuals(ev),
        "Phi": ev.fundamental_form.val,
    }
    return chunk


def _second_pass(chunk: _Chunk) -> dict:
    out = {}
    try:
        out["involutivity"] = aqs.check_involutivity(chunk.ev, chunk.splits)
    except (aqs.DistributionError, aqs.PreconditionError) as exc:
        out["involutivity_error"] = str(exc)
    out["leaves"] = aqs.check_leaf_structures(chunk.ev, chunk.splits)
    return out


# --------------------------------------------------------------------------
# assembly
# --------------------------------------------------------------------------

def _phi_coefficient(structure: AcmStructure, Phi: np.ndarray) -> dict | None:
    coords = list(structure.chart.coord_names)
    if "x1" not in coords or "y1" not in coords:
        return None
    i, j = coords.index("x1"), coords.index("y1")
    vals = Phi[:, i, j]
    return {
        "Phi_dx1_dy1_min": float(vals.min()),
        "Phi_dx1_dy1_max": float(vals.max()),
        # Phi = c dx1 ^ dy1 + ...: c = 2 Phi(d_x1, d_y1) with the half wedge
        "coefficient_alt_wedge": float(2.0 * vals.mean()),
        "coefficient_unnormalized_wedge": float(vals.mean()),
    }


def _rank_summary(r: np.ndarray) -> dict:
    return {"min": int(r.min()), "max": int(r.max()), "constant": bool(r.min() == r.max())}


def run(structure: AcmStructure, cfg: RunConfig = RunConfig()) -> dict:
    """Verify ``structure`` at seeded sample points and return the report dict."""
    threads = cfg.threads or os.cpu_count() or 1
    pts = sample_points(structure.chart, cfg.samples, cfg.seed)
    chunks_pts = [pts[i:i + CHUNK_SIZE] for i in range(0, len(pts), CHUNK_SIZE)]
    chunks = _map(lambda c: _first_pass(structure, cfg.tol, c), chunks_pts, threads)

    axioms = _merge([c.axioms for c in chunks])
    valid = axioms_hold(axioms, cfg.tol)
    report = {
        "report_version": REPORT_VERSION,
        "structure": {
            "name": structure.name,
            "dim": structure.dim,
            "coords": list(structure.chart.coord_names),
            "params": {k: float(v) for k, v in sorted(structure.params.items())},
        },
        "config": cfg.to_dict(),
        "conventions": CONVENTIONS,
        "valid": bool(valid),
        "axioms": _table(axioms),
    }
    if not valid:
        report["refused"] = "almost contact metric axioms fail: " + ", ".join(
            k for k, r in axioms.items() if not r.ok(cfg.tol))
        for key in ("class", "flags", "class_residuals", "class_info", "identities",
                    "curvature", "splitting", "engine"):
            report[key] = None
        return report

    data = [c.data for c in chunks]
    cat = lambda key: np.concatenate([d[key] for d in data])  # noqa: E731
    merged = lambda key: _merge([d[key] for d in data])  # noqa: E731

    cres = merged("class")
    flags = flags_from_residuals(cres, cfg.tol)
    aqs_ok = cres["aqs_N1_eq_4_d_eta_xi"].ok(cfg.tol) and cres["d_Phi_zero"].ok(cfg.tol)
    report["class"] = [f for f in FLAG_ORDER if flags[f]]
    report["flags"] = flags
    report["class_residuals"] = _table(cres)
    report["class_info"] = contact_info(cres, cat("contact_rank"), structure.n)

    # identities ---------------------------------------------------------
    torsion = {k: Residual.concat([d["torsion_identity"][k] for d in data]) for k in ("alt_wedge", "unnormalized_wedge")}
    nphi = merged("nabla_phi")
    exact = [k for k in aqs.NABLA_PHI_CANDIDATES if nphi[k].abs < cfg.tol]
    report["identities"] = {
        "torsion_identity": _table(torsion),
        "lie_xi_invariance": {"applicable": bool(aqs_ok), **_table(merged("xi_invariance"))},
        "shape_operators": _table(merged("shape")),
        "nabla_phi_formula": {
            "applicable": bool(aqs_ok),
            "candidates": _table(nphi),
            "empirically_exact": exact,
        },
        "nabla_xi_phi_max_abs": float(cat("nabla_xi_phi").max()),
        "fundamental_form": _phi_coefficient(structure, np.concatenate([d["Phi"] for d in data])),
    }

    # curvature ----------------------------------------------------------
    j_rank, s_rank = cat("J_rank"), cat("S_rank")
    sect = aqs.summarize_xi_sectional(cat("xi_sectional"), cat("S2"), cat("proj"))
    report["curvature"] = {
        "identities": _table(merged("jacobi")),
        "J_eigenvalue_min": float(cat("J_eig_min").min()),
        "J_rank": _rank_summary(j_rank),
        "S_rank": _rank_summary(s_rank),
        "J_rank_equals_S_rank": bool(np.all(j_rank == s_rank)),
        "J_maximal_rank": bool(np.all(j_rank == structure.dim - 1)),
        "xi_sectional": sect.to_dict(),
    }

    # splitting ----------------------------------------------------------
    h1, h2 = cat("h1_rank"), cat("h2_rank")
    split = {
        "h1_rank": _rank_summary(h1),
        "h2_rank": _rank_summary(h2),
        "rank_h1_plus_rank_S": _rank_summary(h1 + s_rank),
        "involutivity": {"applicable": False},
        "leaves": {"applicable": False},
    }
    if h1.min() == h1.max() and h1.min() > 0:
        second = _map(_second_pass, chunks, threads)
        errors = [s["involutivity_error"] for s in second if "involutivity_error" in s]
        if errors:
            split["involutivity"] = {"applicable": False, "error": errors[0]}
        else:
            inv = _merge([s["involutivity"] for s in second])
            split["involutivity"] = {
                "applicable": True,
                "passed": all(r.abs < cfg.involutivity_tol for r in inv.values()),
                "residuals": _table(inv),
            }
        leaves = _merge([s["leaves"] for s in second])
        split["leaves"] = {
            "applicable": True,
            "passed": all(r.abs < cfg.involutivity_tol for k, r in leaves.items() if k != "nijenhuis_H1_full"),
            "residuals": _table(leaves),
        }
    else:
        reason = "H1 rank varies across samples" if h1.min() != h1.max() else "H1 is zero"
        split["involutivity"]["reason"] = reason
        split["leaves"]["reason"] = reason
    report["splitting"] = split
    report["engine"] = _table(merged("engine"))
    return report


def classification_summary(report: dict) -> dict:
    """The reduced output of the ``classify`` command."""
    out = {
        "report_version": report["report_version"],
        "structure": report["structure"],
        "valid": report["valid"],
        "class": report["class"],
        "flags": report["flags"],
    }
    if report["valid"]:
        h1 = report["splitting"]["h1_rank"]
        out["h1_rank"] = h1["min"] if h1["constant"] else None
        out["class_residuals"] = report["class_residuals"]
    else:
        out["refused"] = report["refused"]
    return out


def format_text(report: dict) -> str:
    """Human summary; not a stable interface."""
    s = report["structure"]
    lines = [f"structure: {s['name']} (dim {s['dim']})"]
    if "axioms" in report:
        worst = max(report["axioms"].items(), key=lambda kv: kv[1]["rel"])
        lines.append(f"valid: {report['valid']}  (worst axiom {worst[0]}: {worst[1]['rel']:.3e})")
    else:
        lines.append(f"valid: {report['valid']}")
    if not report["valid"]:
        lines.append(report.get("refused", "refused"))
        return "\n".join(lines) + "\n"
    lines.append("class: " + (", ".join(report["class"]) or "(none)"))
    if "h1_rank" in report:
        lines.append(f"h1_rank: {report['h1_rank']}")
    if "identities" in report:
        ids = report["identities"]
        lines.append(f"torsion identity residual: {ids['torsion_identity']['alt_wedge']['abs']:.3e}")
        np_ = ids["nabla_phi_formula"]
        lines.append("nabla phi exact candidate: " + (", ".join(np_["empirically_exact"]) or "(none)"))
        cur = report["curvature"]
        lines.append(f"J_xi rank {cur['J_rank']['min']}..{cur['J_rank']['max']}, "
                     f"min eigenvalue {cur['J_eigenvalue_min']:.3e}")
        sect = cur["xi_sectional"]
        lines.append(f"xi-sectional curvature: constant={sect['constant']} c={sect['c']}")
        sp = report["splitting"]
        lines.append(f"H1 rank {sp['h1_rank']['min']}..{sp['h1_rank']['max']}, "
                     f"involutive: {sp['involutivity'].get('passed', 'n/a')}, "
                     f"leaves: {sp['leaves'].get('passed', 'n/a')}")
        worst = max(report["engine"].items(), key=lambda kv: kv[1]["abs"])
        lines.append(f"engine self-check worst: {worst[0]} {worst[1]['abs']:.3e}")
    return "\n".join(lines) + "\n"
