import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from tetraslit import tomo
from tetraslit.sicsearch import DetectorLayout, Povm4, build_povm
from tetraslit.wavefield import BlochState, intensity_envelope

vec3 = st.tuples(*[st.floats(-1, 1, allow_nan=False)] * 3).map(np.array)
ball = vec3.map(lambda v: v / max(1.0, np.linalg.norm(v)))


class TestIdealProbabilities:
    def test_mixed(self, reference_povm):
        np.testing.assert_allclose(tomo.ideal_probabilities(np.zeros(3), reference_povm), 0.25, atol=1e-6)

    def test_vertex(self, reference_povm):
        p = tomo.ideal_probabilities(reference_povm.vectors[0], reference_povm)
        np.testing.assert_allclose(p, [0.5, 1 / 6, 1 / 6, 1 / 6], atol=1e-6)

    def test_matches_matrix_trace(self, reference_povm, rng):
        for r in tomo.random_bloch(rng, 50):
            rho = BlochState(r).matrix
            traced = np.real(np.einsum("nij,ji->n", reference_povm.effects, rho))
            np.testing.assert_allclose(tomo.ideal_probabilities(r, reference_povm), traced, atol=1e-12)


class TestSampling:
    def test_slit_state_moments(self, reference_layout):
        n = 1_000_000
        lay = reference_layout
        pos = tomo.sample_positions(BlochState.slit(1), lay, n, seed=5)
        var = (1 + lay.zeta0**2) / 2
        assert abs(pos.mean() + lay.delta) < 5 * np.sqrt(var / n)
        assert abs(pos.var() - var) < 5 * var * np.sqrt(2 / n)

    def test_mixed_state_histogram(self, reference_layout):
        # oracle: I/2 is an equal mixture of two normals with variance (1 + zeta^2)/2
        lay = reference_layout
        n = 100_000
        pos = tomo.sample_positions(np.zeros(3), lay, n, seed=9)
        sd = np.sqrt((1 + lay.zeta0**2) / 2)
        edges = np.linspace(-12, 12, 49)
        cdf = 0.5 * (stats.norm.cdf(edges, -lay.delta, sd) + stats.norm.cdf(edges, lay.delta, sd))
        expected = np.diff(np.concatenate([[0.0], cdf, [1.0]])) * n
        observed = np.histogram(pos, np.concatenate([[-np.inf], edges, [np.inf]]))[0]
        assert stats.chisquare(observed, expected).pvalue > 1e-3

    def test_deterministic(self, reference_layout):
        a = tomo.sample_positions([0.1, 0.2, 0.3], reference_layout, 1000, seed=3)
        b = tomo.sample_positions([0.1, 0.2, 0.3], reference_layout, 1000, seed=3)
        np.testing.assert_array_equal(a, b)

    def test_block_prefix_stable(self, reference_layout):
        short = tomo.sample_positions(np.zeros(3), reference_layout, 10, seed=4)
        long = tomo.sample_positions(np.zeros(3), reference_layout, 20, seed=4)
        np.testing.assert_array_equal(short, long[:10])


class TestBinning:
    def test_empty(self, reference_layout):
        c = tomo.bin_counts([], reference_layout)
        assert c.n == (0, 0, 0, 0) and c.n_discarded == 0

    def test_centres(self, reference_layout):
        c = tomo.bin_counts(list(reference_layout.xi) + [50.0], reference_layout)
        assert c.n == (1, 1, 1, 1) and c.n_discarded == 1 and c.n_total == 5

    def test_overlap_rejected(self):
        lay = DetectorLayout(3.0, (-1.0, -0.001, 0.0, 1.0), 0.01, 2.0)
        with pytest.raises(ValueError):
            tomo.bin_counts([0.0], lay)

    def test_mixed_counts_equal(self, reference_layout):
        n = 1_000_000
        c = tomo.bin_counts(tomo.sample_positions(np.zeros(3), reference_layout, n, seed=21), reference_layout)
        q = tomo.window_probabilities(np.zeros(3), reference_layout)
        # all four windows see the same acceptance on a balanced layout
        np.testing.assert_allclose(q, q[0], rtol=1e-6)
        assert max(c.n) - min(c.n) < 5 * np.sqrt(n * q[0])

    def test_discard_accounting(self, reference_layout, rng):
        n = 1_000_000
        r = tomo.random_bloch(rng, 1)[0]
        c = tomo.bin_counts(tomo.sample_positions(r, reference_layout, n, seed=33), reference_layout)
        q = tomo.window_probabilities(r, reference_layout).sum()
        assert abs(c.acceptance - q) < 5 * np.sqrt(q * (1 - q) / n)

    def test_window_probabilities_vs_midpoint(self, reference_layout):
        lay = reference_layout
        q = tomo.window_probabilities(np.zeros(3), lay)
        approx = 0.5 * intensity_envelope(np.array(lay.xi), lay.zeta0, lay.delta) * 2 * lay.delta_xi
        np.testing.assert_allclose(q, approx, rtol=1e-5)

    def test_count_record_json(self):
        c = tomo.CountRecord((1, 2, 3, 4), 10, 20)
        assert tomo.CountRecord.from_dict(json.loads(json.dumps(c.to_dict()))) == c
        with pytest.raises(ValueError):
            tomo.CountRecord((1, 2, 3, 4), 10, 21)

    def test_sample_counts_consistent(self, reference_layout):
        c = tomo.sample_counts(np.zeros(3), reference_layout, 10_000_000, seed=1)
        q = tomo.window_probabilities(np.zeros(3), reference_layout)
        assert c.n_total == 10_000_000
        for k in range(4):
            assert abs(c.n[k] - 1e7 * q[k]) < 5 * np.sqrt(1e7 * q[k])

    def test_sample_accepted_counts(self, reference_layout):
        c = tomo.sample_accepted_counts(np.zeros(3), reference_layout, 10_000, seed=2)
        assert c.accepted == 10_000
        q = tomo.window_probabilities(np.zeros(3), reference_layout).sum()
        assert abs(c.acceptance - q) < 5 * q * np.sqrt((1 - q) / 10_000)


class TestLinearInversion:
    def test_uniform(self, reference_povm):
        np.testing.assert_allclose(tomo.linear_invert([0.25] * 4, reference_povm), 0, atol=1e-6)

    def test_vertex(self, reference_povm):
        r = tomo.linear_invert([0.5, 1 / 6, 1 / 6, 1 / 6], reference_povm)
        np.testing.assert_allclose(r, reference_povm.vectors[0], atol=1e-6)

    def test_frame_formula_on_ideal_povm(self, reference):
        povm = Povm4.ideal(reference.bloch_vectors)
        p = np.array([0.5, 1 / 6, 1 / 6, 1 / 6])
        np.testing.assert_allclose(tomo.frame_invert(p, povm.vectors), povm.vectors[0], atol=1e-12)
        np.testing.assert_allclose(tomo.linear_invert(p, povm), povm.vectors[0], atol=1e-12)

    def test_round_trip(self, reference_povm, rng):
        for r in tomo.random_bloch(rng, 200):
            np.testing.assert_allclose(
                tomo.linear_invert(tomo.ideal_probabilities(r, reference_povm), reference_povm), r, atol=1e-10
            )

    def test_round_trip_unbalanced(self, reference, rng):
        povm = build_povm(reference, 1.5)
        for r in tomo.random_bloch(rng, 50):
            np.testing.assert_allclose(tomo.linear_invert(tomo.ideal_probabilities(r, povm), povm), r, atol=1e-10)

    def test_artificial_balance(self, reference, rng):
        povm = build_povm(reference, 1.5)
        r = tomo.random_bloch(rng, 1)[0]
        n = np.round(tomo.ideal_probabilities(r, povm) * 1e9).astype(int)
        counts = tomo.CountRecord(tuple(n), 0, int(n.sum()))
        balanced = tomo.frame_invert(tomo.artificially_balanced(counts, povm), povm.vectors)
        # frame formula assumes a perfect tetrahedron; the vectors still are one
        np.testing.assert_allclose(balanced, r, atol=1e-6)

    def test_coplanar_rejected(self):
        ring = np.array([[1, 0, 0], [0, 1, 0], [-1, 0, 0], [0, -1, 0]], dtype=float)
        with pytest.raises(tomo.RankDeficientError) as err:
            tomo.linear_invert([0.25] * 4, Povm4.ideal(ring))
        np.testing.assert_allclose(np.abs(err.value.null_directions[0]), [0, 0, 1], atol=1e-12)


class TestProjection:
    def test_inside(self):
        r, changed = tomo.project_physical([0, 0, 0.5])
        np.testing.assert_array_equal(r, [0, 0, 0.5])
        assert not changed

    def test_outside(self):
        r, changed = tomo.project_physical([0, 0, 1.25])
        np.testing.assert_allclose(r, [0, 0, 1])
        assert changed

    @given(vec3.map(lambda v: 2 * v))
    def test_idempotent(self, v):
        once, _ = tomo.project_physical(v)
        twice, changed = tomo.project_physical(once)
        np.testing.assert_allclose(twice, once)
        assert np.linalg.norm(once) <= 1 + 1e-12


class TestMle:
    def test_uniform(self, reference_povm):
        np.testing.assert_allclose(tomo.mle_reconstruct([250, 250, 250, 250], reference_povm), 0, atol=1e-6)

    def test_agrees_with_linear_on_exact_data(self, reference_povm, rng):
        for r in tomo.random_bloch(rng, 30) * 0.98:
            p = tomo.ideal_probabilities(r, reference_povm)
            lin = tomo.linear_invert(p, reference_povm)
            np.testing.assert_allclose(tomo.mle_reconstruct(p * 1e6, reference_povm), lin, atol=1e-6)

    def test_unbalanced_exact_data(self, reference, rng):
        povm = build_povm(reference, 3.5)
        for r in tomo.random_bloch(rng, 10) * 0.95:
            p = tomo.ideal_probabilities(r, povm)
            np.testing.assert_allclose(tomo.mle_reconstruct(p * 1e6, povm), r, atol=1e-6)

    def test_boundary_counts_physical(self, reference_povm):
        r = tomo.mle_reconstruct(tomo.CountRecord((1000, 0, 0, 0), 0, 1000), reference_povm)
        assert np.linalg.norm(r) <= 1 + 1e-12
        assert np.linalg.norm(tomo.linear_invert([1, 0, 0, 0], reference_povm)) == pytest.approx(3, rel=1e-5)

    def test_likelihood_monotone(self, reference_povm, reference_layout, rng):
        for seed, r in enumerate(tomo.random_bloch(rng, 20)):
            counts = tomo.sample_accepted_counts(r, reference_layout, 200, seed)
            _, history = tomo.mle_reconstruct(counts, reference_povm, return_history=True)
            assert np.all(np.diff(history) >= 0)

    def test_maximises_likelihood(self, reference_povm, reference_layout, rng):
        r = tomo.random_bloch(rng, 1, pure=True)[0]
        counts = tomo.sample_accepted_counts(r, reference_layout, 500, 4)
        est = tomo.mle_reconstruct(counts, reference_povm)
        best = tomo.log_likelihood(est, counts, reference_povm)
        for trial in tomo.random_bloch(rng, 300):
            assert tomo.log_likelihood(trial, counts, reference_povm) <= best + 1e-9

    def test_no_counts(self, reference_povm):
        with pytest.raises(ValueError):
            tomo.mle_reconstruct([0, 0, 0, 0], reference_povm)


class TestMetrics:
    def test_identical(self, rng):
        r = tomo.random_bloch(rng, 1)[0]
        assert tomo.fidelity(r, r) == pytest.approx(1)
        assert tomo.trace_distance(r, r) == 0

    def test_orthogonal(self):
        assert tomo.fidelity([0, 0, 1], [0, 0, -1]) == pytest.approx(0, abs=1e-15)
        assert tomo.trace_distance([0, 0, 1], [0, 0, -1]) == pytest.approx(1)

    def test_mixed_vs_pure(self):
        assert tomo.fidelity([0, 0, 0], [1, 0, 0]) == pytest.approx(0.5)
        assert tomo.trace_distance([0, 0, 0], [1, 0, 0]) == pytest.approx(0.5)

    def test_fidelity_matches_matrix_formula(self, rng):
        from scipy.linalg import sqrtm

        for a, b in zip(tomo.random_bloch(rng, 20), tomo.random_bloch(rng, 20)):
            ra, rb = BlochState(a).matrix, BlochState(b).matrix
            s = sqrtm(ra)
            expected = np.real(np.trace(sqrtm(s @ rb @ s))) ** 2
            assert tomo.fidelity(a, b) == pytest.approx(expected, abs=1e-9)

    @given(ball, ball, ball)
    def test_trace_distance_metric(self, a, b, c):
        d = tomo.trace_distance
        assert d(a, c) <= d(a, b) + d(b, c) + 1e-12
        assert d(a, b) == pytest.approx(d(b, a))
        assert 0 <= d(a, b) <= 1 + 1e-12
        assert 0 <= tomo.fidelity(a, b) <= 1


class TestReport:
    def test_linear_projected_on_boundary_counts(self, reference_povm):
        counts = tomo.CountRecord((1000, 0, 0, 0), 5000, 6000)
        rep = tomo.reconstruct(counts, reference_povm, "linear", reference_povm.vectors[0])
        assert rep.projected
        assert rep.method == "linear-inversion"
        assert np.linalg.norm(rep.r_hat) == pytest.approx(1)
        assert 0 <= rep.fidelity <= 1 and 0 <= rep.trace_distance <= 1
        assert json.loads(json.dumps(rep.to_dict()))["projected"] is True

    def test_mle_report(self, reference_povm):
        rep = tomo.reconstruct(tomo.CountRecord((1000, 0, 0, 0), 0, 1000), reference_povm, "mle")
        assert rep.method == "mle" and not rep.projected
        assert np.linalg.norm(rep.r_hat) <= 1 + 1e-12

    def test_unknown_method(self, reference_povm):
        with pytest.raises(ValueError):
            tomo.reconstruct(tomo.CountRecord((1, 1, 1, 1), 0, 4), reference_povm, "bayes")

    def test_zero_accepted(self, reference_povm):
        with pytest.raises(ValueError):
            tomo.reconstruct(tomo.CountRecord((0, 0, 0, 0), 10, 10), reference_povm)
