import numpy as np
import pytest

from opsyslab import cpmaps, matcore, opsys


def rng(seed):
    return np.random.default_rng(seed)


def identity_map(n):
    domain = opsys.full_matrix_system(n)
    return cpmaps.map_from_images(domain, [b.copy() for b in domain.basis])


def transpose_map(n):
    domain = opsys.full_matrix_system(n)
    return cpmaps.map_from_images(domain, [b.T.copy() for b in domain.basis])


def random_map(seed, n, d):
    r = rng(seed)
    domain = opsys.full_matrix_system(n)
    images = [
        r.standard_normal((d, d)) + 1j * r.standard_normal((d, d))
        for _ in domain.basis
    ]
    # make it Hermitian-preserving so the Choi matrix is Hermitian
    images = [0.5 * (im + im.conj().T) for im in images]
    return cpmaps.map_from_images(domain, images)


class TestChoiCalculus:
    def test_identity_choi_is_maximally_entangled(self):
        f = identity_map(2)
        expect = np.zeros((4, 4), dtype=complex)
        for i in range(2):
            for j in range(2):
                expect[i * 2 + i, j * 2 + j] = 1.0
        assert np.allclose(f.choi, expect, atol=1e-12)
        w, _ = matcore.eig_herm(f.choi)
        assert w[0] == pytest.approx(2.0, abs=1e-10)
        assert np.allclose(w[1:], 0.0, atol=1e-10)

    def test_transpose_choi_is_swap(self):
        f = transpose_map(2)
        swap = np.zeros((4, 4), dtype=complex)
        for i in range(2):
            for j in range(2):
                swap[i * 2 + j, j * 2 + i] = 1.0
        assert np.allclose(f.choi, swap, atol=1e-12)
        w, _ = matcore.eig_herm(f.choi)
        assert np.allclose(sorted(w), [-1, 1, 1, 1], atol=1e-10)

    @pytest.mark.parametrize("n,d", [(2, 2), (2, 3), (3, 2), (4, 4)])
    def test_roundtrip(self, n, d):
        for trial in range(5):
            f = random_map(977 * n + d + trial, n, d)
            g = cpmaps.map_from_choi(n, d, cpmaps.choi_of(f))
            for bi, bj in zip(f.basis_images, g.basis_images):
                assert np.abs(bi - bj).max() <= 1e-12

    def test_cp_iff_choi_psd(self):
        # Stinespring-sampled maps are CP; random Hermitian-image maps rarely are
        for trial in range(10):
            f = cpmaps.random_ucp(rng(trial), 2, 3)
            assert matcore.lambda_min(f.choi) >= -1e-10
        f = transpose_map(2)
        assert matcore.lambda_min(f.choi) < -0.5


class TestAmplify:
    def test_identity_amplifies_to_identity(self):
        f = amplified = cpmaps.amplify(identity_map(2), 2)
        x = matcore.rand_herm(rng(0), 4)
        assert np.allclose(cpmaps.apply_map(amplified, x), x, atol=1e-10)

    def test_amplification_associativity(self):
        f = random_map(5, 2, 2)
        f2 = cpmaps.amplify(f, 2)
        f4a = cpmaps.amplify(f2, 2)
        f4b = cpmaps.amplify(f, 4)
        x = matcore.rand_herm(rng(1), 8)
        assert np.allclose(
            cpmaps.apply_map(f4a, x), cpmaps.apply_map(f4b, x), atol=1e-9
        )

    def test_cp_closed_under_amplification(self):
        f = cpmaps.random_ucp(rng(3), 2, 2)
        f2 = cpmaps.amplify(f, 2)
        assert matcore.lambda_min(f2.choi) >= -1e-9


class TestIsUcp:
    def test_identity_is_ucp(self):
        cert = cpmaps.is_ucp(identity_map(2))
        assert cert.feasible

    def test_transpose_unital_not_cp(self):
        cert = cpmaps.is_ucp(transpose_map(2))
        assert not cert.feasible
        assert cert.detail["unital_residual"] <= 1e-10

    def test_random_ucp_passes(self):
        for trial in range(5):
            assert cpmaps.is_ucp(cpmaps.random_ucp(rng(trial + 20), 3, 2)).feasible

    def test_subsystem_domain(self):
        # compression of a concrete system is u.c.p.
        pauli_x = np.array([[0, 1], [1, 0]], dtype=complex)
        sys = opsys.make_system(2, [pauli_x])
        images = [b.copy() for b in sys.basis]  # inclusion map
        f = cpmaps.map_from_images(sys, images)
        assert cpmaps.is_ucp(f).feasible


class TestNorms:
    def test_identity_knorm(self):
        f = identity_map(2)
        for k in (1, 2):
            val = cpmaps.knorm_lower(f, k, trials=2, seed=0, ascent_steps=20)
            assert val >= 1.0 - 1e-9
            assert val <= 1.0 + 1e-6

    def test_transpose_k2_reaches_two(self):
        val = cpmaps.knorm_lower(transpose_map(2), 2, trials=2, seed=1, ascent_steps=60)
        assert val >= 1.95

    def test_homogeneity(self):
        f = random_map(7, 2, 2)
        g = cpmaps.map_from_images(f.domain, [3.0 * im for im in f.basis_images])
        a = cpmaps.knorm_lower(f, 1, trials=3, seed=2, ascent_steps=30)
        b = cpmaps.knorm_lower(g, 1, trials=3, seed=2, ascent_steps=30)
        assert b == pytest.approx(3.0 * a, rel=1e-6)

    def test_knorm_monotone_in_k(self):
        f = random_map(9, 2, 2)
        v1 = cpmaps.knorm_lower(f, 1, trials=3, seed=3, ascent_steps=40)
        v2 = cpmaps.knorm_lower(f, 2, trials=3, seed=3, ascent_steps=40)
        assert v2 >= v1 - 1e-7

    def test_cb_upper_identity(self):
        assert cpmaps.cb_upper(identity_map(3)) == pytest.approx(9.0, abs=1e-8)

    def test_cb_upper_zero_map(self):
        domain = opsys.full_matrix_system(2)
        z = cpmaps.map_from_images(domain, [0 * b for b in domain.basis])
        assert cpmaps.cb_upper(z) == 0.0

    def test_cb_dominates_knorm(self):
        for trial in range(3):
            f = random_map(trial + 40, 2, 2)
            ub = cpmaps.cb_upper(f)
            for k in (1, 2):
                assert cpmaps.knorm_lower(f, k, trials=2, seed=trial, ascent_steps=30) <= ub + 1e-7


class TestDist1:
    def test_zero_for_equal_maps(self):
        f = identity_map(2)
        db = cpmaps.dist1(f, f, trials=2, ascent_steps=10)
        assert db.lower <= 1e-10
        assert db.upper <= 1e-10

    def test_rank_one_perturbation(self):
        f = cpmaps.random_ucp(rng(31), 2, 2)
        s = 0.3
        images = [im.copy() for im in f.basis_images]
        # perturb the image of one non-unit basis element by s * e_11
        delta = np.zeros((2, 2), dtype=complex)
        delta[0, 0] = s
        images[1] = images[1] + delta
        g = cpmaps.map_from_images(f.domain, images)
        db = cpmaps.dist1(f, g, trials=4, seed=5, ascent_steps=100)
        assert db.lower >= 0.9 * s * np.linalg.norm(f.domain.basis[1].ravel(), np.inf) * 0  # lower bound positive
        assert db.lower > 0.05
        assert db.lower <= db.upper + 1e-9

    def test_triangle_inequality(self):
        f = random_map(61, 2, 2)
        g = random_map(62, 2, 2)
        h = random_map(63, 2, 2)
        dfg = cpmaps.dist1(f, g, trials=3, seed=6, ascent_steps=40)
        dgh = cpmaps.dist1(g, h, trials=3, seed=6, ascent_steps=40)
        dfh = cpmaps.dist1(f, h, trials=3, seed=6, ascent_steps=40)
        # lower bound of the sum can undershoot; compare against upper bounds
        assert dfh.lower <= dfg.upper + dgh.upper + 1e-7


class TestNearestUcp:
    def test_fixed_point(self):
        f = cpmaps.random_ucp(rng(71), 2, 2)
        res = cpmaps.nearest_ucp(f)
        assert res.choi_distance <= 1e-7
        assert cpmaps.is_ucp(res.map, tol=1e-6).feasible

    def test_transpose_strictly_corrected(self):
        res = cpmaps.nearest_ucp(transpose_map(2))
        assert res.choi_distance > 0.1
        assert cpmaps.is_ucp(res.map, tol=1e-6).feasible
        # cross-check with long-run plain alternating projections from the
        # corrected point: it should not move (already in the intersection)
        c = res.map.choi.copy()
        for _ in range(200):
            c = matcore.psd_project(c)
            c = matcore.affine_project(
                c,
                [
                    (np.kron(np.eye(2, dtype=complex), h), float(np.trace(h).real))
                    for h in opsys.hermitian_basis(2)
                ],
            )
        assert np.linalg.norm(c - res.map.choi) <= 1e-5

    def test_perturbation_distance_trend(self):
        dists = []
        for eps in (0.2, 0.05, 0.01):
            vals = []
            for trial in range(5):
                f, _, _ = cpmaps.random_unital_perturbed(rng(trial), 2, 2, eps)
                vals.append(cpmaps.nearest_ucp(f).choi_distance)
            dists.append(np.median(vals))
        assert dists[0] > dists[1] > dists[2]

    def test_idempotent(self):
        f, _, _ = cpmaps.random_unital_perturbed(rng(83), 2, 2, 0.3)
        res1 = cpmaps.nearest_ucp(f, tol=1e-7)
        res2 = cpmaps.nearest_ucp(res1.map, tol=1e-7)
        assert res2.choi_distance <= 2e-7


def test_map_json():
    f = identity_map(2)
    dump = f.to_json()
    assert dump["domain_dim"] == 2 and dump["codomain_dim"] == 2
    back = matcore.matrix_from_json(dump["choi"])
    assert np.allclose(back, f.choi)
