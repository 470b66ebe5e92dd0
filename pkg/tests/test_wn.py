import numpy as np
import pytest

from opsyslab import cpmaps, matcore, opsys, wn


@pytest.fixture(scope="module")
def ctx1():
    return wn.make_context(1, rep_dims=(2, 3), seed=0)


@pytest.fixture(scope="module")
def ctx2():
    return wn.make_context(2, rep_dims=(2,), seed=1)


def trace_state_map(ctx, q):
    """x -> tr(lift x)/(n+1) * I, a u.c.p. map on the quotient."""
    d = ctx.n + 1
    images = [
        np.trace(b) / d * np.eye(q, dtype=complex) for b in ctx.quotient.basis
    ]
    return cpmaps.CpMap(
        domain=ctx.quotient, codomain_dim=q, basis_images=images, choi=None
    )


def perturbed_map(ctx, q, eps, seed):
    """Trace-state map plus Hermitian noise on the non-unit images."""
    rng = np.random.default_rng(seed)
    base = trace_state_map(ctx, q)
    images = [im.copy() for im in base.basis_images]
    for s in range(1, len(images)):
        images[s] = images[s] + eps * matcore.rand_herm(rng, q)
    return cpmaps.CpMap(
        domain=ctx.quotient, codomain_dim=q, basis_images=images, choi=None
    )


class TestGamma:
    def test_rep_maps_are_ucp(self, ctx1, ctx2):
        for ctx in (ctx1, ctx2):
            for idx in range(len(ctx.reps)):
                g = wn.gamma_n(ctx, idx)
                assert cpmaps.is_ucp(g).feasible

    def test_unit_maps_to_unit_exactly(self, ctx1, ctx2):
        for ctx in (ctx1, ctx2):
            g = wn.gamma_n(ctx)
            d = ctx.n + 1
            img = cpmaps.apply_map(g, np.eye(d, dtype=complex))
            assert np.abs(img - ctx.quotient.unit).max() <= 1e-12

    def test_kernel_annihilated(self, ctx1, ctx2):
        for ctx in (ctx1, ctx2):
            g = wn.gamma_n(ctx)
            for k in ctx.kernel.basis:
                img = cpmaps.apply_map(g, k.astype(complex))
                assert np.abs(img).max() <= 1e-12

    def test_diagonal_units_map_to_scaled_unit(self, ctx1, ctx2):
        for ctx in (ctx1, ctx2):
            g = wn.gamma_n(ctx)
            d = ctx.n + 1
            for i in range(d):
                e = np.zeros((d, d), dtype=complex)
                e[i, i] = 1.0
                img = cpmaps.apply_map(g, e)
                assert np.abs(img - ctx.quotient.unit / d).max() <= 1e-12

    def test_trivial_representation(self, ctx1):
        # with u_1 = 1 every product u_i^* u_j is the identity, so every
        # matrix unit maps to 1/2 and the Choi matrix is the PSD
        # rank-one (all-ones/2) (x) I
        triv = opsys.make_system(2, [])
        triv.unitaries = [np.eye(2, dtype=complex), np.eye(2, dtype=complex)]
        ctx = wn.WnContext(
            n=1, quotient=ctx1.quotient, kernel=ctx1.kernel,
            reps=[triv], rep_dims=[2], rep_seeds=[0],
        )
        g = wn.gamma_n(ctx, 0)
        for _, _, e in cpmaps._matrix_units(2):
            assert np.allclose(cpmaps.apply_map(g, e), np.eye(2) / 2, atol=1e-12)
        expect = np.kron(np.ones((2, 2)) / 2, np.eye(2))
        assert np.allclose(g.choi, expect, atol=1e-12)
        assert matcore.lambda_min(g.choi) >= -1e-12


class TestCorrection:
    def test_fixed_point_on_ucp(self, ctx1):
        phi = trace_state_map(ctx1, 3)
        psi, trace = wn.correct_to_ucp(phi, ctx1, delta=0.1)
        dev = max(
            np.abs(a - b).max()
            for a, b in zip(psi.basis_images, phi.basis_images)
        )
        assert dev <= 1e-8
        assert trace.nearest_ucp_choi_dist <= 1e-8
        assert trace.sup_generator_dev <= 1e-8

    @pytest.mark.parametrize("ctxname", ["ctx1", "ctx2"])
    def test_output_always_ucp(self, ctxname, request):
        ctx = request.getfixturevalue(ctxname)
        for seed in range(5):
            phi = perturbed_map(ctx, 2, 0.4, seed)
            psi, trace = wn.correct_to_ucp(phi, ctx)
            assert cpmaps.is_ucp(psi, tol=1e-6).feasible
            assert trace.kernel_residual <= 1e-8

    def test_distance_decreases_with_perturbation(self, ctx1):
        meds = []
        for eps in (0.5, 0.2, 0.05):
            devs = []
            for seed in range(8):
                phi = perturbed_map(ctx1, 2, eps, 100 + seed)
                psi, trace = wn.correct_to_ucp(phi, ctx1)
                devs.append(trace.sup_generator_dev)
            meds.append(np.median(devs))
        assert meds[0] >= meds[1] >= meds[2]

    def test_diagonal_images_exact(self, ctx1):
        phi = perturbed_map(ctx1, 3, 0.4, 7)
        psi, _ = wn.correct_to_ucp(phi, ctx1)
        # the corrected map sends each diagonal coset to unit/(n+1):
        # the image of the quotient unit is I and of each diagonal e_ii
        # (coset = unit/2) is I/2
        img = cpmaps.apply_map(psi, ctx1.quotient.unit)
        assert np.allclose(img, np.eye(3), atol=1e-10)

    def test_invertibility_failure_raises(self, ctx1):
        phi = trace_state_map(ctx1, 2)
        # absurdly large tolerance pushes the invertibility floor above the
        # actual diagonal eigenvalues
        with pytest.raises(wn.CorrectionError) as exc:
            wn.correct_to_ucp(phi, ctx1, tol=0.6)
        assert exc.value.index == 0

    def test_proof_chain_diagnostics(self, ctx1):
        phi = perturbed_map(ctx1, 2, 0.3, 11)
        _, trace = wn.correct_to_ucp(phi, ctx1, delta=16.0)
        assert trace.bound_16n4 == pytest.approx(1.0)
        assert trace.bound_4n2 == pytest.approx(4.0)
        assert trace.bound_2n2 == pytest.approx(8.0)
        assert trace.within_4n2 is not None

    def test_trace_json(self, ctx1):
        phi = trace_state_map(ctx1, 2)
        _, trace = wn.correct_to_ucp(phi, ctx1, delta=0.5)
        dump = trace.to_json()
        assert dump["n"] == 1
        assert "sup_generator_dev" in dump


class TestCircleOracle:
    def coset(self, ctx, p, q, r):
        m = np.array([[p, q], [np.conj(q), r]], dtype=complex)
        return opsys.quotient_coset(ctx.quotient, m)

    def test_closed_form_agreement(self, ctx1):
        # positivity of the coset of [[p, q], [conj(q), r]] is p + r >= 2|q|
        for p in np.linspace(0.0, 2.0, 7):
            for r in np.linspace(0.0, 2.0, 7):
                for qm in np.linspace(0.0, 2.0, 7):
                    x = self.coset(ctx1, p, qm * np.exp(0.7j), r)
                    expect = p + r >= 2.0 * qm - 1e-9
                    assert wn.circle_positive(x, tol=1e-7) == expect

    def test_boundary_point(self, ctx1):
        x = self.coset(ctx1, 1.0, 1.0, 1.0)
        assert abs(wn.circle_min_eig(x.coords)) <= 1e-9

    def test_matches_quotient_membership(self, ctx1):
        rng = np.random.default_rng(3)
        for _ in range(15):
            p, r = rng.uniform(0, 2, size=2)
            q = rng.uniform(0, 2) * np.exp(1j * rng.uniform(0, 2 * np.pi))
            x = self.coset(ctx1, p, q, r)
            margin = p + r - 2 * abs(q)
            if abs(margin) < 1e-3:
                continue  # keep clear of the boundary at solver tolerance
            member = opsys.cone_member(x, tol=1e-6).feasible
            assert member == wn.circle_positive(x, tol=1e-6)
            assert member == (margin > 0)

    def test_level_two_circle(self, ctx1):
        # block element: diag(coset(a), coset(b)) has circle minimum equal
        # to the smaller of the two scalar minima
        xa = self.coset(ctx1, 1.0, 0.4, 1.0).coords[0, 0]
        xb = self.coset(ctx1, 1.0, 0.9, 1.0).coords[0, 0]
        coords = np.zeros((2, 2, 3), dtype=complex)
        coords[0, 0], coords[1, 1] = xa, xb
        got = wn.circle_min_eig(coords)
        expect = min(wn.circle_min_eig(xa.reshape(1, 1, 3)),
                     wn.circle_min_eig(xb.reshape(1, 1, 3)))
        assert got == pytest.approx(expect, abs=1e-9)


class TestQuotientVsConcrete:
    def test_positive_sample_agrees(self, ctx1):
        x = opsys.quotient_coset(
            ctx1.quotient, np.array([[1.5, 0.5], [0.5, 1.0]], dtype=complex)
        )
        report = wn.quotient_vs_concrete(ctx1, x)
        assert report["quotient_verdict"] == "feasible"
        assert all(report["rep_positive"])
        assert report["circle_positive"]
        assert not report["converse_exception"]

    def test_negative_sample(self, ctx1):
        x = opsys.quotient_coset(
            ctx1.quotient, np.array([[0.1, 1.0], [1.0, 0.1]], dtype=complex)
        )
        report = wn.quotient_vs_concrete(ctx1, x)
        assert report["quotient_verdict"] == "infeasible"
        assert not report["circle_positive"]

    def test_quotient_positive_implies_rep_positive(self, ctx2):
        rng = np.random.default_rng(9)
        d = 3
        for _ in range(10):
            g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            x = opsys.quotient_coset(ctx2.quotient, g @ g.conj().T)
            report = wn.quotient_vs_concrete(ctx2, x)
            if report["quotient_verdict"] == "feasible":
                assert all(report["rep_positive"])


def test_context_json(ctx1):
    dump = ctx1.to_json()
    assert dump["n"] == 1
    assert dump["rep_dims"] == [2, 3]
    assert len(dump["rep_seeds"]) == 2


def test_context_determinism():
    a = wn.make_context(2, rep_dims=(3,), seed=5)
    b = wn.make_context(2, rep_dims=(3,), seed=5)
    assert np.allclose(a.reps[0].unitaries[0], b.reps[0].unitaries[0])
