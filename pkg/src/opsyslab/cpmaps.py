"""Linear and completely positive map calculus.

A map is stored by the images of its domain basis; when the domain is a
full matrix algebra the Choi matrix sum_ij e_ij (x) phi(e_ij) is carried
alongside and the two representations are exact linear-algebra inverses of
each other.  Complete positivity of full-algebra maps is read off the Choi
matrix; for subsystem domains it is decided as CP-extension feasibility on
the ambient algebra, and for quotient domains as feasibility of a CP lift
annihilating the kernel.

Amplification norms are non-convex, so ||f||_k is never computed exactly:
consumers get a certified lower bound (sampled ascent) and a coarse upper
bound (sum of block image norms), and record which side they used.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import conic, matcore, opsys


@dataclass
class CpMap:
    domain: opsys.OperatorSystem
    codomain_dim: int
    basis_images: list
    choi: Optional[np.ndarray] = None

    @property
    def domain_full(self):
        return opsys.is_full_algebra(self.domain)

    def to_json(self):
        if self.choi is None:
            raise ValueError("JSON wire format requires a full-algebra domain")
        return {
            "domain_dim": self.domain.ambient_dim,
            "codomain_dim": self.codomain_dim,
            "choi": matcore.matrix_to_json(self.choi),
        }


def apply_map(f, mat):
    """Apply the map to a matrix in the domain span."""
    c = opsys.coords_of(f.domain, mat)
    d = f.codomain_dim
    out = np.zeros((d, d), dtype=np.complex128)
    for s, img in enumerate(f.basis_images):
        out += c[s] * img
    return out


def apply_level(f, bigmat, k):
    """Blockwise application of id_k (x) f to a matrix in M_k(domain)."""
    m = f.domain.ambient_dim
    d = f.codomain_dim
    out = np.zeros((k * d, k * d), dtype=np.complex128)
    for a in range(k):
        for b in range(a, k):
            blk = apply_map(f, bigmat[a * m : (a + 1) * m, b * m : (b + 1) * m])
            out[a * d : (a + 1) * d, b * d : (b + 1) * d] = blk
            if b > a:
                out[b * d : (b + 1) * d, a * d : (a + 1) * d] = blk.conj().T
    return out


def _apply_coords(f, coords):
    """Apply to a (k, k, dim) coordinate tensor; returns a (kd, kd) matrix."""
    k = coords.shape[0]
    d = f.codomain_dim
    imgs = np.stack(f.basis_images)  # (dim, d, d)
    blocks = np.einsum("abs,sij->aibj", coords, imgs)
    return blocks.reshape(k * d, k * d)


def _matrix_units(n):
    for i in range(n):
        for j in range(n):
            e = np.zeros((n, n), dtype=np.complex128)
            e[i, j] = 1.0
            yield i, j, e


def map_from_images(domain, images):
    """Build a map from basis images; Choi attached for full-algebra domains."""
    images = [np.asarray(im, dtype=np.complex128) for im in images]
    if len(images) != domain.dim:
        raise ValueError("one image per basis element required")
    d = images[0].shape[0]
    f = CpMap(domain=domain, codomain_dim=d, basis_images=images)
    if opsys.is_full_algebra(domain):
        f.choi = choi_of(f)
    return f


def choi_of(f):
    """Choi matrix sum_ij e_ij (x) f(e_ij); full-algebra domains only."""
    if not opsys.is_full_algebra(f.domain):
        raise ValueError("Choi matrix requires a full matrix-algebra domain")
    n = f.domain.ambient_dim
    d = f.codomain_dim
    c = np.zeros((n * d, n * d), dtype=np.complex128)
    for i, j, e in _matrix_units(n):
        c[i * d : (i + 1) * d, j * d : (j + 1) * d] = apply_map(f, e)
    return c


def map_from_choi(n, d, c):
    """Inverse of choi_of: block (i, j) of c is the image of e_ij."""
    c = np.asarray(c, dtype=np.complex128)
    if c.shape != (n * d, n * d):
        raise ValueError(f"Choi matrix must be {n * d}x{n * d}, got {c.shape}")
    domain = opsys.full_matrix_system(n)
    unit_images = {}
    for i, j, _ in _matrix_units(n):
        unit_images[(i, j)] = c[i * d : (i + 1) * d, j * d : (j + 1) * d]
    images = []
    for b in domain.basis:
        img = np.zeros((d, d), dtype=np.complex128)
        for (i, j), blk in unit_images.items():
            img += b[i, j] * blk
        images.append(img)
    f = CpMap(domain=domain, codomain_dim=d, basis_images=images)
    f.choi = c
    return f


def amplify(f, k):
    """id_{M_k} (x) f, acting blockwise."""
    if k < 1:
        raise ValueError("amplification level must be >= 1")
    if k == 1:
        return f
    m = f.domain.ambient_dim
    if f.domain_full:
        domain = opsys.full_matrix_system(k * m)
    else:
        import warnings

        gens = [
            np.kron(h, b)
            for h in opsys.hermitian_basis(k)
            for b in f.domain.basis
        ]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            domain = opsys.make_system(k * m, gens)
    images = [apply_level(f, b, k) for b in domain.basis]
    return map_from_images(domain, images)


def _extension_problem(m, d, pairs):
    """Feasibility data for a PSD Choi matrix on M_m -> M_d matching pairs.

    pairs: list of (Hermitian a in M_m, Hermitian target in M_d) with the
    meaning Phi(a) = target.
    """
    hb = opsys.hermitian_basis(d)
    cons = []
    for a, target in pairs:
        at = a.T  # Hermitian since a is
        for h in hb:
            cmat = np.kron(at, h)
            cmat = 0.5 * (cmat + cmat.conj().T)
            cons.append((cmat, float(np.real(np.trace(h @ target)))))
    return conic.ConeProblem(dim=m * d, affine=cons)


def is_ucp(f, tol=1e-7, config=conic.DEFAULT_CONFIG):
    """Unitality plus complete positivity, with regime-appropriate CP test."""
    unit_img = apply_map(f, f.domain.unit)
    d = f.codomain_dim
    unital_resid = matcore.op_norm(unit_img - np.eye(d))
    m = f.domain.ambient_dim
    if f.domain_full:
        lam = matcore.lambda_min(f.choi if f.choi is not None else choi_of(f))
        cp_ok = lam >= -tol
        verdict = conic.FEASIBLE if (cp_ok and unital_resid <= tol) else conic.INFEASIBLE
        return conic.Certificate(
            verdict=verdict,
            psd_residual=max(0.0, -lam),
            affine_residual=unital_resid,
            detail={"unital_residual": unital_resid, "choi_lambda_min": lam},
        )
    pairs = list(zip(f.domain.basis, f.basis_images))
    if f.domain.regime == opsys.QUOTIENT:
        zero = np.zeros((d, d), dtype=np.complex128)
        pairs += [(kb, zero) for kb in f.domain.kernel.basis]
    prob = _extension_problem(m, d, pairs)
    cert = conic.dykstra_feasible(prob, tol=min(tol * 0.1, 1e-8), config=config)
    if unital_resid > tol and cert.feasible:
        cert.verdict = conic.INFEASIBLE
    cert.detail["unital_residual"] = unital_resid
    return cert


def _norm_ratio(f, coords):
    k = coords.shape[0]
    nx = _coords_op_norm(f.domain, coords)
    if nx < 1e-14:
        return 0.0
    return matcore.op_norm_fast(_apply_coords(f, coords)) / nx


def _coords_op_norm(system, coords):
    k = coords.shape[0]
    m = system.ambient_dim
    amb = np.einsum("abs,sij->aibj", coords, np.stack(system.basis)).reshape(k * m, k * m)
    return matcore.op_norm_fast(amb)


def knorm_lower(f, k, trials=8, seed=0, ascent_steps=200):
    """Certified lower bound on the k-th amplification norm.

    Max of the Rayleigh-type ratio over sampled points in M_k(domain),
    refined by finite-difference ascent with step halving; deterministic
    given the seed.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(seed)
    dim = f.domain.dim
    best_val, best_wit = 0.0, None
    # build up level by level so each level inherits the zero-padded witness
    # of the previous one; the padded ratio is unchanged, which makes the
    # reported bound monotone in k
    for level in range(1, k + 1):
        starts = []
        if best_wit is not None:
            padded = np.zeros((level, level, dim), dtype=np.complex128)
            padded[: level - 1, : level - 1, :] = best_wit
            starts.append(padded)
        if f.domain_full:
            # correlated pattern: blocks x_ab = e_ba, the classic transpose witness
            n = f.domain.ambient_dim
            r = min(level, n)
            amb = np.zeros((level * n, level * n), dtype=np.complex128)
            for a in range(r):
                for b in range(r):
                    amb[a * n + b, b * n + a] = 1.0
            el = opsys.element_from_ambient(f.domain, amb, level=level)
            starts.append(el.coords)
        for _ in range(trials):
            c = rng.standard_normal((level, level, dim)) + 1j * rng.standard_normal(
                (level, level, dim)
            )
            starts.append(c)
        best_val, best_wit = _ascend_starts(f, starts, best_val, ascent_steps)
    return best_val


def _ascend_starts(f, starts, best, ascent_steps):
    best_wit = None
    for c0 in starts:
        c = c0.copy()
        val = _norm_ratio(f, c)
        step = 0.2
        view = c.view(np.float64)
        for _ in range(ascent_steps):
            grad = np.zeros_like(view)
            h = 1e-6
            flat = view.ravel()
            gflat = grad.ravel()
            for idx in range(flat.size):
                old = flat[idx]
                flat[idx] = old + h
                gflat[idx] = (_norm_ratio(f, c) - val) / h
                flat[idx] = old
            gn = np.linalg.norm(gflat)
            if gn < 1e-12:
                break
            improved = False
            while step > 1e-9:
                trial_c = c + step * (grad / gn).view(np.complex128).reshape(c.shape)
                tv = _norm_ratio(f, trial_c)
                if tv > val + 1e-14:
                    c, val = trial_c, tv
                    view = c.view(np.float64)
                    improved = True
                    break
                step *= 0.5
            if not improved:
                break
        if val > best or best_wit is None:
            best, best_wit = val, c
    return best, best_wit


def cb_upper(f):
    """Coarse cb-norm upper bound: sum of matrix-unit image norms.

    Valid because every unit-norm element of M_k(M_n) has blocks of norm
    at most one in the e_ij expansion.
    """
    if not f.domain_full:
        raise ValueError("cb_upper requires a full matrix-algebra domain")
    total = 0.0
    for _, _, e in _matrix_units(f.domain.ambient_dim):
        total += matcore.op_norm(apply_map(f, e))
    return total


def map_sub(f, g):
    if f.domain is not g.domain and f.domain.dim != g.domain.dim:
        raise ValueError("maps must share a domain")
    images = [fi - gi for fi, gi in zip(f.basis_images, g.basis_images)]
    return map_from_images(f.domain, images)


@dataclass
class DistanceBounds:
    lower: float
    upper: Optional[float] = None


def dist1(f, g, trials=8, seed=0, ascent_steps=200):
    """Bounds on the level-1 map norm of f - g.

    Lower: sampled-ascent estimate of sup over the unit ball.  Upper: the
    rigorous cb bound when the domain is a full algebra (None otherwise).
    """
    h = map_sub(f, g)
    lower = knorm_lower(h, 1, trials=trials, seed=seed, ascent_steps=ascent_steps)
    upper = cb_upper(h) if h.domain_full else None
    return DistanceBounds(lower=lower, upper=upper)


@dataclass
class NearestUcpResult:
    map: CpMap
    choi_distance: float
    certificate: conic.Certificate


def nearest_ucp(f, tol=1e-7, config=conic.DEFAULT_CONFIG):
    """Frobenius-nearest Choi matrix that is PSD with unital block structure.

    Dykstra projection of the (symmetrized) Choi matrix onto the
    intersection of the PSD cone with {partial trace over the input factor
    = identity}; the corrected map and the Choi-space distance are
    returned, with the run certificate attached.
    """
    if not f.domain_full:
        raise ValueError("nearest_ucp requires a full matrix-algebra domain")
    n = f.domain.ambient_dim
    d = f.codomain_dim
    c0 = f.choi if f.choi is not None else choi_of(f)
    c0 = 0.5 * (c0 + c0.conj().T)
    cons = []
    for h in opsys.hermitian_basis(d):
        cons.append((np.kron(np.eye(n, dtype=np.complex128), h), float(np.real(np.trace(h)))))
    prob = conic.ConeProblem(dim=n * d, affine=cons)
    cert = conic.dykstra_feasible(
        prob, tol=min(tol * 0.1, 1e-9), config=config, start=c0
    )
    if cert.witness is None:
        # non-convergence: hand back the unprojected map, flagged
        return NearestUcpResult(map=f, choi_distance=np.inf, certificate=cert)
    cw = 0.5 * (cert.witness + cert.witness.conj().T)
    g = map_from_choi(n, d, cw)
    return NearestUcpResult(
        map=g,
        choi_distance=float(np.linalg.norm(cw - c0)),
        certificate=cert,
    )


# ---------------------------------------------------------------------------
# samplers


def random_ucp(rng, n, d, r=2):
    """Stinespring-sampled u.c.p. map x -> V^*(x (x) I_r)V on M_n -> M_d."""
    v = matcore.haar_isometry(rng, d, n * r)
    domain = opsys.full_matrix_system(n)
    eye_r = np.eye(r, dtype=np.complex128)
    images = [v.conj().T @ np.kron(b, eye_r) @ v for b in domain.basis]
    return map_from_images(domain, images)


def random_hermitian_preserving(rng, n, d, kill_unit=True):
    """Random Hermitian-preserving map, optionally annihilating the unit."""
    domain = opsys.full_matrix_system(n)
    images = [matcore.rand_herm(rng, d) for _ in domain.basis]
    if kill_unit:
        images[0] = np.zeros((d, d), dtype=np.complex128)
    return map_from_images(domain, images)


def random_unital_perturbed(rng, n, d, eps, r=2):
    """u.c.p. plus a unit-killing perturbation with cb_upper <= eps.

    Returns (map, base u.c.p. map, realized perturbation cb bound).
    """
    base = random_ucp(rng, n, d, r=r)
    pert = random_hermitian_preserving(rng, n, d, kill_unit=True)
    bound = cb_upper(pert)
    if bound > 0 and eps > 0:
        scale = eps / bound
        pert = map_from_images(
            pert.domain, [scale * im for im in pert.basis_images]
        )
        bound = eps
    elif eps == 0:
        pert = map_from_images(
            pert.domain, [0.0 * im for im in pert.basis_images]
        )
        bound = 0.0
    images = [b + p for b, p in zip(base.basis_images, pert.basis_images)]
    return map_from_images(base.domain, images), base, bound
