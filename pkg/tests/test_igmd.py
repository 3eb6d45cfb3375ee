import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from itergmd.igmd import (
    MajorizationError,
    OmegaKind,
    SweepTrace,
    geometric_mean_target,
    igmd,
    mse_diag,
    omega,
    rotation_pair,
    stage_update,
    sweep,
)
from itergmd.init import init_decompose
from itergmd.matcore import RankError
from itergmd.triple import DecompositionTriple
from oracles import (
    complex_gaussian,
    geometric_mean_via_det,
    random_unitary,
    scalar_omega,
    scalar_trajectory,
)

KINDS = list(OmegaKind)
positive = st.floats(min_value=1e-6, max_value=1e6, allow_nan=False)


def diag_triple(values):
    k = len(values)
    eye = np.eye(k, dtype=complex)
    return DecompositionTriple(eye.copy(), np.diag(np.asarray(values, dtype=complex)), eye.copy())


class TestOmega:
    @pytest.mark.parametrize("kind, expected", [("gm", 2.0), ("am", 2.5), ("hm", 1.6)])
    def test_closed_form(self, kind, expected):
        assert omega(4.0, 1.0, kind) == pytest.approx(expected, rel=1e-15)

    @pytest.mark.parametrize("kind", KINDS)
    def test_equal_arguments(self, kind):
        assert omega(3.7, 3.7, kind) == 3.7

    @pytest.mark.parametrize("bad", [0.0, -1.0, float("nan")])
    def test_rejects_nonpositive(self, bad):
        with pytest.raises(ValueError):
            omega(bad, 1.0, "gm")

    @settings(max_examples=500, deadline=None)
    @given(z1=positive, z2=positive, kind=st.sampled_from(KINDS))
    def test_condition_and_range(self, z1, z2, kind):
        om = float(omega(z1, z2, kind))
        assert min(z1, z2) <= om <= max(z1, z2)
        assert om + z1 * z2 / om <= (z1 + z2) * (1 + 1e-12)

    @settings(max_examples=300, deadline=None)
    @given(z1=positive, z2=positive)
    def test_am_hm_duality(self, z1, z2):
        assert omega(z1, z2, "am") * omega(z1, z2, "hm") == pytest.approx(z1 * z2, rel=1e-12)


class TestRotationPair:
    def test_worked_example(self):
        rp = rotation_pair(2.0, 0.5, 1.0)
        c = math.sqrt((1 - 0.25) / (4 - 0.25))
        assert c == pytest.approx(math.sqrt(0.2))
        assert rp.phi_r[0, 0] == pytest.approx(c, rel=1e-15)
        assert rp.phi_r[1, 0] == pytest.approx(math.sqrt(1 - c * c), rel=1e-15)
        prod = rp.phi_l @ np.diag([2.0, 0.5]) @ rp.phi_r
        assert abs(prod[1, 0]) <= 1e-15
        assert prod[0, 0] == pytest.approx(1.0, rel=1e-12)
        assert prod[1, 1] == pytest.approx(1.0, rel=1e-12)

    def test_degenerate_equal_sigmas(self):
        rp = rotation_pair(1.5, 1.5, 1.5)
        np.testing.assert_array_equal(rp.phi_l, np.eye(2))
        np.testing.assert_array_equal(rp.phi_r, np.eye(2))

    def test_boundary_omega_is_sigma1(self):
        rp = rotation_pair(3.0, 1.0, 3.0)
        np.testing.assert_allclose(rp.phi_r, np.eye(2), atol=1e-15)
        prod = rp.phi_l @ np.diag([3.0, 1.0]) @ rp.phi_r
        np.testing.assert_allclose(prod, np.diag([3.0, 1.0]), atol=1e-15)

    def test_boundary_omega_is_sigma2(self):
        rp = rotation_pair(3.0, 1.0, 1.0)
        prod = rp.phi_l @ np.diag([3.0, 1.0]) @ rp.phi_r
        assert prod[0, 0] == pytest.approx(1.0, rel=1e-14)
        assert prod[1, 1] == pytest.approx(3.0, rel=1e-14)

    @pytest.mark.parametrize("om", [0.5, 3.5])
    def test_majorization_violated(self, om):
        with pytest.raises(MajorizationError, match="majorization"):
            rotation_pair(3.0, 1.0, om)

    @settings(max_examples=500, deadline=None)
    @given(
        s1=positive,
        ratio=st.one_of(st.just(0.0), st.floats(1e-12, 1)),
        t=st.one_of(st.just(0.0), st.floats(1e-12, 1)),
    )
    def test_invariants(self, s1, ratio, t):
        s2 = s1 * ratio
        om = s2 + t * (s1 - s2)
        if om < 1e-12 * s1:
            return
        rp = rotation_pair(s1, s2, om)
        eye = np.eye(2)
        assert np.abs(rp.phi_l @ rp.phi_l.T - eye).max() <= 1e-12
        assert np.abs(rp.phi_r @ rp.phi_r.T - eye).max() <= 1e-12
        prod = rp.phi_l @ np.diag([s1, s2]) @ rp.phi_r
        assert abs(prod[1, 0]) <= 1e-12 * s1
        assert prod[0, 0] == pytest.approx(om, rel=1e-12)
        assert prod[1, 1] == pytest.approx(s1 * s2 / om, rel=1e-12, abs=1e-300)


class TestStageUpdate:
    def test_diag_4_1_gm(self):
        out = stage_update(diag_triple([4.0, 1.0]), 1, "gm")
        np.testing.assert_allclose(out.diag, [2.0, 2.0], rtol=1e-14)
        # Frobenius norm is preserved: 16 + 1 = 2^2 + 2^2 + |x|^2
        assert abs(out.r[0, 1]) == pytest.approx(3.0, rel=1e-14)
        assert out.r[1, 0] == 0

    @pytest.mark.parametrize("kind", KINDS)
    def test_equal_diagonal_is_fixed(self, kind):
        state = diag_triple([1.3, 1.3])
        out = stage_update(state, 1, kind)
        np.testing.assert_allclose(out.r, state.r, atol=1e-12)

    def test_golden_block(self):
        state = DecompositionTriple(np.eye(2, dtype=complex), np.array([[1.0, 1.0], [0.0, 1.0]], dtype=complex), np.eye(2, dtype=complex))
        h = state.reconstruct()
        out = stage_update(state, 1, "gm")
        np.testing.assert_allclose(out.diag, [1.0, 1.0], rtol=1e-14)
        assert out.errors(h)["reconstruction"] <= 1e-14

    def test_only_two_rows_and_columns_change(self, rng):
        h = complex_gaussian(rng, (6, 6))
        state = init_decompose(h, "qr")
        out = stage_update(state, 3, "am")
        keep = [0, 1, 4, 5]
        np.testing.assert_array_equal(out.q[:, keep], state.q[:, keep])
        np.testing.assert_array_equal(out.s[:, keep], state.s[:, keep])
        np.testing.assert_array_equal(out.r[np.ix_(keep, keep)], state.r[np.ix_(keep, keep)])
        d0 = state.diag
        assert out.diag[2] == pytest.approx(scalar_omega(d0[2], d0[3], "am"), rel=1e-12)
        assert out.diag[3] == pytest.approx(d0[2] * d0[3] / scalar_omega(d0[2], d0[3], "am"), rel=1e-12)
        assert out.errors(h)["reconstruction"] <= 1e-10

    def test_input_not_mutated(self, rng):
        state = init_decompose(complex_gaussian(rng, (4, 4)), "svd")
        before = state.copy()
        stage_update(state, 1, "hm")
        np.testing.assert_array_equal(state.r, before.r)

    @pytest.mark.parametrize("k", [0, 4])
    def test_stage_index_range(self, k):
        with pytest.raises(ValueError):
            stage_update(diag_triple([1.0, 2.0, 3.0, 4.0]), k, "gm")


class TestSweep:
    def test_two_by_two_is_one_stage(self):
        state = diag_triple([4.0, 1.0])
        np.testing.assert_array_equal(sweep(state, "gm").r, stage_update(state, 1, "gm").r)

    @pytest.mark.parametrize("kind", KINDS)
    def test_constant_diagonal_is_fixed(self, kind, rng):
        u, v = random_unitary(rng, 5), random_unitary(rng, 5)
        state = DecompositionTriple(u, 2.0 * np.eye(5, dtype=complex), v)
        out = sweep(state, kind)
        np.testing.assert_allclose(out.r, state.r, atol=1e-12)

    @pytest.mark.parametrize("kind", KINDS)
    def test_f_decreases_strictly(self, kind, rng):
        h = complex_gaussian(rng, (1000, 7, 7))
        state = init_decompose(h, "qr")
        f0 = state.diag.sum(axis=-1)
        out = sweep(state, kind)
        f1 = out.diag.sum(axis=-1)
        assert np.all(f1 < f0)
        np.testing.assert_allclose(np.prod(out.diag, axis=-1), np.prod(state.diag, axis=-1), rtol=1e-9)


class TestIgmd:
    def test_scaled_unitary_converged_at_start(self, rng):
        h = 1.7 * random_unitary(rng, 7)
        _, trace = igmd(h, "svd", "gm", 3)
        mse = mse_diag(trace, geometric_mean_target(h))
        assert mse[0] <= 1e-28

    def test_diag_8_1_gm_one_iteration(self):
        triple, trace = igmd(np.diag([8.0, 1.0]), "svd", "gm", 1)
        np.testing.assert_allclose(triple.diag, [math.sqrt(8)] * 2, rtol=1e-14)
        assert trace.iteration_index == 1
        assert len(trace.diag_history) == len(trace.f_history) == 2

    @pytest.mark.parametrize("kind", KINDS)
    @pytest.mark.parametrize("init", ["svd", "intrlv-svd", "qr", "vbqr"])
    def test_invariants_hold(self, kind, init, channels):
        triple, trace = igmd(channels[:20], init, kind, 10)
        err = triple.errors(channels[:20])
        assert err["reconstruction"].max() <= 1e-10
        assert max(err["q_unitarity"].max(), err["s_unitarity"].max()) <= 1e-10
        prods = np.prod(trace.diags(), axis=-1)
        np.testing.assert_allclose(prods, np.broadcast_to(prods[0], prods.shape), rtol=1e-9)
        f = np.array(trace.f_history)
        assert np.all(np.diff(f, axis=0) <= 1e-9 * f[1:])

    def test_converges_to_geometric_mean(self, channels):
        # 150 sweeps clear the linear rate of the map for every kind
        sigma_bar = geometric_mean_target(channels)
        for kind in KINDS:
            triple, _ = igmd(channels, "svd", kind, 150)
            dev = np.abs(triple.diag - sigma_bar[:, None]) / sigma_bar[:, None]
            assert dev.max() <= 1e-6

    def test_spread_tol_stops_early(self, channels):
        _, trace = igmd(channels[0], "intrlv-svd", "am", 500, spread_tol=1e-8)
        assert 10 < trace.iteration_index < 500
        d = trace.diag_history[-1]
        assert d.max() / d.min() - 1 <= 1e-8

    def test_zero_iterations(self, channels):
        triple, trace = igmd(channels[0], "qr", "gm", 0)
        assert trace.iteration_index == 0

    def test_matches_scalar_oracle(self, channels):
        for kind in KINDS:
            _, trace = igmd(channels[:10], "qr", kind, 10)
            for i in range(10):
                ref = scalar_trajectory(trace.diag_history[0][i], kind.value, 10)
                np.testing.assert_allclose(trace.diags()[:, i], ref, rtol=1e-9)


class TestGeometricMeanTarget:
    def test_closed_forms(self):
        assert geometric_mean_target(np.diag([8.0, 1.0])) == pytest.approx(math.sqrt(8), rel=1e-15)
        assert geometric_mean_target(np.diag([1.0, 2.0, 4.0])) == pytest.approx(2.0, rel=1e-15)

    def test_matches_determinant(self, channels):
        np.testing.assert_allclose(geometric_mean_target(channels), geometric_mean_via_det(channels), rtol=1e-12)

    def test_singular(self):
        with pytest.raises(RankError):
            geometric_mean_target(np.diag([1.0, 0.0]))


class TestMseDiag:
    def test_converged(self):
        trace = SweepTrace()
        trace.record([2.0, 2.0, 2.0])
        assert mse_diag(trace, 2.0)[0] == 0.0

    def test_arithmetic(self):
        trace = SweepTrace()
        trace.record([4.0, 1.0])
        assert mse_diag(trace, 2.0)[0] == 2.5

    def test_gm_curves_decrease(self, channels):
        sigma_bar = geometric_mean_target(channels)
        for init in ("svd", "qr"):
            _, trace = igmd(channels, init, "gm", 8)
            mean = mse_diag(trace, sigma_bar).mean(axis=1)
            assert np.all(np.diff(mean) < 0)
