"""Feasibility and optimization over PSD-cone / affine-subspace intersections.

Everything here reduces to one workhorse: Dykstra alternating projections
between the PSD cone and an affine set (plain alternating projections would
converge to *some* intersection point; Dykstra's correction terms are what
make the limit the nearest point, which downstream projection consumers
rely on).  Infeasibility is detected heuristically by gap stabilization and
is therefore reported as a distinct verdict from indeterminate -- this
engine produces no separating certificates.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels, matcore


@dataclass(frozen=True)
class ConicConfig:
    """All engine tolerances in one place."""

    feas_tol: float = 1e-7
    max_iter: int = 20000
    gap_factor: float = 10.0
    stab_iters: int = 500
    stab_slack_factor: float = 1e-4
    bisect_depth: int = 60
    lambda_tol: float = 1e-6
    objective_tol: float = 1e-5


DEFAULT_CONFIG = ConicConfig()

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
INDETERMINATE = "indeterminate"

_CODE_TO_VERDICT = {
    _kernels.DYKSTRA_FEASIBLE: FEASIBLE,
    _kernels.DYKSTRA_INFEASIBLE: INFEASIBLE,
    _kernels.DYKSTRA_INDETERMINATE: INDETERMINATE,
}


@dataclass
class ConeProblem:
    """Find Hermitian x with <C_t, x> = b_t for all t and x + psd_shift >= 0."""

    dim: int
    affine: list = field(default_factory=list)
    psd_shift: Optional[np.ndarray] = None
    objective: Optional[np.ndarray] = None

    def to_json(self):
        out = {
            "dim": self.dim,
            "affine": [
                [matcore.matrix_to_json(c), float(b)] for c, b in self.affine
            ],
        }
        if self.psd_shift is not None:
            out["psd_shift"] = matcore.matrix_to_json(self.psd_shift)
        if self.objective is not None:
            out["objective"] = matcore.matrix_to_json(self.objective)
        return out


@dataclass
class Certificate:
    verdict: str
    witness: Optional[np.ndarray] = None
    affine_residual: float = np.inf
    psd_residual: float = np.inf
    iterations: int = 0
    objective_value: Optional[float] = None
    detail: dict = field(default_factory=dict)

    @property
    def feasible(self):
        return self.verdict == FEASIBLE


def _witness_residuals(x, constraints):
    aff = 0.0
    for c, b in constraints:
        aff = max(aff, abs(matcore.frob_inner(c, x) - b))
    psd = max(0.0, -matcore.lambda_min(x))
    return aff, psd


def dykstra_feasible(problem, tol=None, max_iter=None, config=DEFAULT_CONFIG, start=None):
    """Decide feasibility of a ConeProblem; witness carried on success.

    The PSD variable is y = x + psd_shift; the returned witness is x.
    """
    tol = config.feas_tol if tol is None else tol
    max_iter = config.max_iter if max_iter is None else max_iter
    d = problem.dim
    shift = problem.psd_shift
    if shift is None:
        shift = np.zeros((d, d), dtype=np.complex128)
    cons = [(c, b + matcore.frob_inner(c, shift)) for c, b in problem.affine]
    try:
        qs, xpart = matcore.orthonormal_constraints(cons, d)
    except matcore.InfeasibleAffineError:
        return Certificate(verdict=INFEASIBLE, detail={"reason": "inconsistent affine"})
    a0 = shift.copy() if start is None else (start + shift)
    y, code, gap, psd_res, iters = _kernels.dykstra_kernel(
        a0.astype(np.complex128),
        qs,
        xpart,
        tol,
        max_iter,
        config.gap_factor,
        config.stab_iters,
        config.stab_slack_factor * tol,
    )
    verdict = _CODE_TO_VERDICT[code]
    if verdict == FEASIBLE:
        x = 0.5 * (y + y.conj().T) - shift
        aff, psd = _witness_residuals(x + shift, cons)
        return Certificate(
            verdict=FEASIBLE,
            witness=x,
            affine_residual=aff,
            psd_residual=psd,
            iterations=iters,
        )
    return Certificate(
        verdict=verdict,
        affine_residual=gap,
        psd_residual=psd_res,
        iterations=iters,
        detail={"gap": gap},
    )


def _complement_basis(directions, dim):
    """Orthonormal Hermitian basis of the Frobenius-complement of span(directions)."""
    span = []
    for dmat in directions:
        q = matcore.herm(dmat)
        for k in span:
            q = q - matcore.frob_inner(k, q) * k
        nrm = np.linalg.norm(q)
        if nrm > 1e-10:
            span.append(q / nrm)
    comp = []
    full = []
    for i in range(dim):
        e = np.zeros((dim, dim), dtype=np.complex128)
        e[i, i] = 1.0
        full.append(e)
    s = 1.0 / np.sqrt(2.0)
    for i in range(dim):
        for j in range(i + 1, dim):
            e = np.zeros((dim, dim), dtype=np.complex128)
            e[i, j] = s
            e[j, i] = s
            full.append(e)
            e = np.zeros((dim, dim), dtype=np.complex128)
            e[i, j] = 1j * s
            e[j, i] = -1j * s
            full.append(e)
    for q in full:
        r = q
        for k in span + comp:
            r = r - matcore.frob_inner(k, r) * k
        nrm = np.linalg.norm(r)
        if nrm > 1e-8:
            comp.append(r / nrm)
    return span, comp


@dataclass
class LambdaMinResult:
    t_star: float
    coeffs: np.ndarray
    witness: Optional[np.ndarray]
    unbounded: bool = False
    indeterminate_steps: int = 0


def max_lambda_min(x0, directions, config=DEFAULT_CONFIG):
    """Maximize lambda_min(x0 + sum_t c_t D_t) over real coefficients c.

    Bisection on s; each level is PSD/affine feasibility of
    x0 + sum c_t D_t >= s I.  Flags unbounded when s = ||x0|| + 10 is
    feasible.
    """
    x0 = matcore.herm(x0)
    d = x0.shape[0]
    span, comp = _complement_basis(directions, d)
    if not span:
        w, _ = matcore.eig_herm(x0)
        return LambdaMinResult(
            t_star=float(w[-1]), coeffs=np.zeros(0), witness=x0
        )
    eye = np.eye(d, dtype=np.complex128)
    indet = 0

    def try_level(s):
        # variable z = x0 + sum c D - s I, constrained to the affine slice
        cons = [
            (q, matcore.frob_inner(q, x0) - s * matcore.frob_inner(q, eye))
            for q in comp
        ]
        prob = ConeProblem(dim=d, affine=cons)
        return dykstra_feasible(prob, tol=config.lambda_tol * 0.1, config=config)

    def recover(cert, s):
        y = cert.witness + s * eye
        diff = y - x0
        coeffs = np.array([matcore.frob_inner(q, diff) for q in span])
        return y, coeffs

    lo = float(matcore.lambda_min(x0))  # feasible at c = 0
    witness, coeffs = x0, np.zeros(len(span))
    hi_probe = matcore.op_norm(x0) + 10.0
    cert = try_level(hi_probe)
    if cert.feasible:
        y, coeffs = recover(cert, hi_probe)
        return LambdaMinResult(
            t_star=hi_probe, coeffs=coeffs, witness=y, unbounded=True
        )
    hi = hi_probe
    for _ in range(config.bisect_depth):
        if hi - lo <= config.lambda_tol:
            break
        mid = 0.5 * (lo + hi)
        cert = try_level(mid)
        if cert.feasible:
            lo = mid
            witness, coeffs = recover(cert, mid)
        else:
            if cert.verdict == INDETERMINATE:
                indet += 1
            hi = mid
    # express coefficients over the caller's direction list (least squares)
    if directions:
        cols = np.stack([np.asarray(dm).ravel() for dm in directions], axis=1)
        target = (witness - x0).ravel()
        sol, *_ = np.linalg.lstsq(
            np.concatenate([cols.real, cols.imag]),
            np.concatenate([target.real, target.imag]),
            rcond=None,
        )
        coeffs = sol
    return LambdaMinResult(
        t_star=lo, coeffs=coeffs, witness=witness, indeterminate_steps=indet
    )


def min_linear(problem, normalization, config=DEFAULT_CONFIG):
    """Minimize <objective, x> over {x >= 0, affine, <N, x> = nu}.

    Bisection on the objective level set; each level is a dykstra_feasible
    call; the minimum is certified to within config.objective_tol.
    """
    if problem.objective is None:
        raise ValueError("min_linear requires an objective")
    nmat, nu = normalization
    obj = matcore.herm(problem.objective)
    if not problem.affine and problem.psd_shift is None and float(nu) > 0:
        # pure normalization slice: the minimum is a generalized bottom
        # eigenvalue, so skip the bisection entirely
        wn_, vn = matcore.eig_herm(matcore.herm(nmat))  # descending
        if wn_[-1] > 1e-10 * max(wn_[0], 1.0):
            vr = vn / np.sqrt(wn_)
            mid = vr.conj().T @ obj @ vr
            lam, vecs = matcore.eig_herm(mid)
            y = vr @ vecs[:, -1]
            witness = float(nu) * np.outer(y, y.conj())
            return Certificate(
                verdict=FEASIBLE,
                witness=witness,
                affine_residual=abs(matcore.frob_inner(nmat, witness) - nu),
                psd_residual=0.0,
                objective_value=float(nu) * float(lam[-1]),
                detail={"method": "eig"},
            )
    base_cons = list(problem.affine) + [(matcore.herm(nmat), float(nu))]

    def level(c, start=None):
        prob = ConeProblem(
            dim=problem.dim,
            affine=base_cons + [(obj, c)],
            psd_shift=problem.psd_shift,
        )
        return dykstra_feasible(prob, config=config, start=start)

    # anchor: any point of the slice
    anchor = dykstra_feasible(
        ConeProblem(dim=problem.dim, affine=base_cons, psd_shift=problem.psd_shift),
        config=config,
    )
    if not anchor.feasible:
        return Certificate(verdict=anchor.verdict, detail={"reason": "empty slice"})
    shift = problem.psd_shift
    if shift is None:
        shift = np.zeros((problem.dim, problem.dim), dtype=np.complex128)
    hi = matcore.frob_inner(obj, anchor.witness)
    witness = anchor.witness
    lam_n = matcore.lambda_min(nmat)
    if lam_n > 1e-10:
        # x + shift >= 0 and <N, x+shift> bounded  =>  trace bound on x+shift
        tr_bound = (nu + abs(matcore.frob_inner(nmat, shift))) / lam_n
        lo = -matcore.op_norm(obj) * (tr_bound + np.linalg.norm(shift) * problem.dim) - 1.0
    else:
        lo, step = hi - 1.0, 1.0
        for _ in range(40):
            cert = level(lo, start=witness)
            if not cert.feasible:
                break
            witness = cert.witness
            hi = lo
            step *= 2.0
            lo = hi - step
        else:
            return Certificate(verdict=INDETERMINATE, detail={"reason": "unbounded below"})
    iters = 0
    for _ in range(config.bisect_depth):
        if hi - lo <= config.objective_tol:
            break
        mid = 0.5 * (lo + hi)
        # warm-start from the best feasible point seen; only the objective
        # level moves, so it is usually nearly feasible already
        cert = level(mid, start=witness)
        iters += cert.iterations
        if cert.feasible:
            hi = mid
            witness = cert.witness
        else:
            lo = mid
    value = matcore.frob_inner(obj, witness)
    aff, psd = _witness_residuals(witness + shift, base_cons)
    return Certificate(
        verdict=FEASIBLE,
        witness=witness,
        affine_residual=aff,
        psd_residual=psd,
        iterations=iters,
        objective_value=float(value),
    )
