"""Oracle and statistical tests for the fading channel model."""

import numpy as np
import pytest

from risae.channel import (
    ArrayGeometry,
    ChannelModel,
    PhaseShiftMatrix,
    RicianParams,
    adversary_cascade,
    cascaded_matrix,
    corr_uniform,
    dump_realization,
    legitimate_cascade,
    link_sample,
    load_realization_bin,
    los_matrix,
    nlos_sample,
    realization_sample,
    steering_ula,
    steering_upa,
)
from risae.config import SystemConfig
from risae.errors import DimensionMismatch


def crand(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def tiny_config(**kwargs) -> SystemConfig:
    base = dict(n_t=2, n_r=2, a1_v=1, a1_h=2, a2_v=1, a2_h=2, m=4, block_len=2,
                num_scatterers=3, hidden_width=8)
    base.update(kwargs)
    return SystemConfig(**base)


class TestSteering:
    def test_zero_angle_is_all_ones(self):
        assert np.allclose(steering_ula(5, 0.5, 0.0), np.ones(5))

    def test_single_element(self):
        assert np.allclose(steering_ula(1, 0.5, 1.2), [1.0])

    def test_half_wavelength_broadside(self):
        # exp(j pi n sin(pi/2)) alternates sign
        v = steering_ula(2, 0.5, np.pi / 2)
        assert np.allclose(v, [1.0, -1.0], atol=1e-12)

    def test_unit_modulus(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            v = steering_ula(7, 0.37, rng.uniform(-np.pi, np.pi))
            assert np.allclose(np.abs(v), 1.0, atol=1e-12)

    def test_upa_degenerate(self):
        geom = ArrayGeometry.upa(1, 1, 0.5, 0.5)
        assert np.allclose(steering_upa(geom, 0.7, -0.2), [1.0])

    def test_upa_zero_angles(self):
        geom = ArrayGeometry.upa(2, 3, 0.5, 0.5)
        assert np.allclose(steering_upa(geom, 0.0, 0.0), np.ones(6))

    def test_upa_matches_kron_expansion(self):
        rng = np.random.default_rng(1)
        geom = ArrayGeometry.upa(2, 2, 0.4, 0.6)
        for _ in range(20):
            az = rng.uniform(-np.pi, np.pi)
            el = rng.uniform(-np.pi / 2, np.pi / 2)
            a_v = steering_ula(2, 0.4, el)
            a_h = steering_ula(2, 0.6, az)
            assert np.allclose(steering_upa(geom, az, el), np.kron(a_v, a_h), atol=1e-13)


class TestLosMatrix:
    def test_all_ones(self):
        m = los_matrix(np.ones(3), np.ones(2))
        assert np.allclose(m, np.ones((3, 2)))

    def test_vector_case(self):
        m = los_matrix(np.array([1.0, -1.0]), np.array([1.0]))
        assert np.allclose(m, [[1.0], [-1.0]])

    def test_rank_one(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            rx = steering_ula(6, 0.5, rng.uniform(-np.pi, np.pi))
            tx = steering_ula(4, 0.5, rng.uniform(-np.pi, np.pi))
            sv = np.linalg.svd(los_matrix(rx, tx), compute_uv=False)
            assert sv[1] < 1e-10

    def test_uses_transpose_not_conjugate(self):
        rx = np.array([1j])
        tx = np.array([1j])
        assert np.allclose(los_matrix(rx, tx), [[-1.0]])


def corr_oracle(count, spacing, spread, sc):
    """Direct double-loop summation of the correlation definition."""
    out = np.zeros((count, count), dtype=complex)
    a = 0.5 * (sc - 1)
    ks = [-a + i for i in range(sc)]
    for m in range(count):
        for n in range(count):
            q = m - n
            total = 0.0 + 0.0j
            for k in ks:
                beta = k * spread / (1.0 - sc) if sc > 1 else 0.0
                total += np.exp(1j * 2.0 * np.pi * spacing * q * np.sin(beta))
            out[m, n] = total / sc
    return out


class TestCorrUniform:
    def test_unit_diagonal(self):
        r = corr_uniform(5, 0.5, 0.9, 7)
        assert np.allclose(np.diagonal(r), 1.0)

    def test_single_scatterer_all_ones(self):
        assert np.allclose(corr_uniform(4, 0.5, 0.3, 1), np.ones((4, 4)))

    def test_matches_summation_oracle(self):
        assert np.allclose(corr_uniform(4, 0.5, 0.3, 3), corr_oracle(4, 0.5, 0.3, 3), atol=1e-12)

    def test_matches_oracle_on_random_parameters(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            count = int(rng.integers(1, 6))
            sc = int(rng.integers(1, 9))
            spacing = float(rng.uniform(0.1, 2.0))
            spread = float(rng.uniform(0.05, np.pi))
            r = corr_uniform(count, spacing, spread, sc)
            assert np.allclose(r, corr_oracle(count, spacing, spread, sc), atol=1e-12)

    def test_grid_hermitian_psd_unit_diagonal(self):
        grid = [(n, d, s, sc)
                for n in (2, 4, 8)
                for d in (0.25, 0.5)
                for s in (0.3, 1.0, np.pi / 2)
                for sc in (2, 5, 9)][:30]
        assert len(grid) == 30
        for count, spacing, spread, sc in grid:
            r = corr_uniform(count, spacing, spread, sc)
            assert np.allclose(r, r.conj().T, atol=1e-12)
            assert np.allclose(np.diagonal(r), 1.0, atol=1e-12)
            assert np.linalg.eigvalsh(r).min() >= -1e-9

    def test_even_scatterer_count_keeps_unit_diagonal(self):
        r = corr_uniform(3, 0.5, 0.7, 4)
        assert np.allclose(np.diagonal(r), 1.0)


class _StubRng:
    """Deterministic standard_normal source for fixed-draw tests."""

    def __init__(self, values):
        self.values = list(values)

    def standard_normal(self, shape):
        return np.full(shape, self.values.pop(0), dtype=float)


class TestNlosSample:
    def test_single_scatterer_rank_one(self):
        rng = np.random.default_rng(4)
        n = nlos_sample(np.eye(4), np.eye(1), np.eye(3), 1, rng)
        sv = np.linalg.svd(n, compute_uv=False)
        assert sv[1] < 1e-10

    def test_second_moment_identity_correlations(self):
        rng = np.random.default_rng(5)
        n1, n2, sc = 3, 4, 5
        total = 0.0
        draws = 10_000
        for _ in range(draws):
            n = nlos_sample(np.eye(n1), np.eye(sc), np.eye(n2), sc, rng)
            total += np.linalg.norm(n) ** 2
        assert total / draws == pytest.approx(n1 * n2, rel=0.05)

    def test_fixed_draws_match_hand_product(self):
        # Q filled with (1 + 2j)/sqrt(2), P with (3 + 4j)/sqrt(2)
        stub = _StubRng([1.0, 2.0, 3.0, 4.0])
        r_tx = np.diag([4.0, 1.0])
        r_sc = np.eye(2)
        r_rx = np.diag([9.0, 1.0])
        out = nlos_sample(r_tx, r_sc, r_rx, 2, stub)
        q = np.full((2, 2), (1.0 + 2.0j) / np.sqrt(2.0))
        p = np.full((2, 2), (3.0 + 4.0j) / np.sqrt(2.0))
        expected = np.diag([2.0, 1.0]) @ q @ np.eye(2) @ p @ np.diag([3.0, 1.0]) / np.sqrt(2.0)
        assert np.allclose(out, expected, atol=1e-13)


class TestLinkSample:
    def test_pure_los_limit(self):
        rng = np.random.default_rng(6)
        los = los_matrix(steering_ula(3, 0.5, 0.4), steering_ula(2, 0.5, -0.3))
        out = link_sample(RicianParams(1.0, 1e12), los, np.eye(3), np.eye(2), np.eye(2), 2, rng)
        assert np.linalg.norm(out - los) / np.linalg.norm(los) < 1e-5

    def test_pure_nlos_limit(self):
        los = np.ones((3, 2), dtype=complex)
        seed_rng = lambda: np.random.default_rng(7)
        out = link_sample(RicianParams(1.0, 0.0), los, np.eye(3), np.eye(2), np.eye(2), 2, seed_rng())
        nlos = nlos_sample(np.eye(3), np.eye(2), np.eye(2), 2, seed_rng())
        assert np.allclose(out, nlos)

    def test_second_moment(self):
        rng = np.random.default_rng(8)
        n1, n2, sc = 3, 4, 4
        los = los_matrix(steering_ula(n1, 0.5, 0.2), steering_ula(n2, 0.5, 0.9))
        total = 0.0
        draws = 10_000
        for _ in range(draws):
            out = link_sample(RicianParams(1.0, 0.2), los, np.eye(n1), np.eye(sc), np.eye(n2), sc, rng)
            total += np.linalg.norm(out) ** 2
        assert total / draws == pytest.approx(n1 * n2, rel=0.05)


class TestRealizationSample:
    def test_paper_scale_shapes(self):
        cfg = SystemConfig(n_t=16, n_r=16, a1_v=4, a1_h=8, a2_v=4, a2_h=8,
                           m=64, block_len=20, num_scatterers=3)
        real = realization_sample(cfg, np.random.default_rng(9))
        assert real.u1.shape == (32, 16)
        assert real.u2.shape == (32, 16)
        assert real.y1.shape == (16, 32)
        assert real.y2.shape == (16, 32)
        assert real.e.shape == (32, 32)
        assert real.u1p.shape == (32, 16)
        assert real.ep.shape == (32, 32)

    def test_primed_shapes_follow_adversary_antennas(self):
        cfg = tiny_config(n_adv=3)
        real = realization_sample(cfg, np.random.default_rng(10))
        assert real.u1p.shape == (2, 3)
        assert real.u2p.shape == (2, 3)
        assert real.y1p.shape == (2, 2)
        assert real.ep.shape == (2, 2)

    def test_deterministic_under_seed(self):
        cfg = tiny_config()
        r1 = realization_sample(cfg, np.random.default_rng(11))
        r2 = realization_sample(cfg, np.random.default_rng(11))
        for name in ("u1", "u2", "y1", "y2", "e", "u1p", "u2p", "y1p", "y2p", "ep"):
            assert np.array_equal(getattr(r1, name), getattr(r2, name))

    def test_zero_large_scale_gain(self):
        cfg = tiny_config(omega=0.0)
        real = realization_sample(cfg, np.random.default_rng(12))
        assert np.allclose(real.u1, 0.0)
        assert np.allclose(real.ep, 0.0)

    def test_batch_indexing_matches_batch_arrays(self):
        cfg = tiny_config()
        model = ChannelModel(cfg)
        batch = model.sample_batch(3, np.random.default_rng(13))
        assert len(batch) == 3
        single = batch[1]
        assert np.array_equal(single.u1, batch.u1[1])

    def test_per_symbol_link_view_is_static(self):
        cfg = tiny_config()
        real = realization_sample(cfg, np.random.default_rng(14))
        assert np.array_equal(real.link("u1", 0), real.link("u1", cfg.block_len - 1))
        with pytest.raises(IndexError):
            real.link("u1", cfg.block_len)


def cascade_oracle(y2, e, y1, u1, u2, d1, d2):
    return (y2 @ np.diag(d2) @ e @ np.diag(d1) @ u1
            + y1 @ np.diag(d1) @ u1
            + y2 @ np.diag(d2) @ u2)


class TestCascadedMatrix:
    def test_single_path_reduction(self):
        rng = np.random.default_rng(15)
        y1 = crand(rng, 2, 3)
        u1 = crand(rng, 3, 2)
        k = cascaded_matrix(np.zeros((2, 4)), crand(rng, 4, 3), y1, u1,
                            np.zeros((4, 2)), np.ones(3), np.ones(4))
        assert np.allclose(k, y1 @ u1)

    def test_scalar_hand_evaluation(self):
        y2, e, y1, u1, u2 = 2.0 + 1j, 0.5 - 0.5j, 1.0 + 0j, 3.0 + 0j, 1.0 + 2j
        k = cascaded_matrix(*[np.array([[v]]) for v in (y2, e, y1, u1, u2)],
                            np.ones(1), np.ones(1))
        assert np.allclose(k, y2 * e * u1 + y1 * u1 + y2 * u2)

    def test_matches_direct_formula(self):
        rng = np.random.default_rng(16)
        for _ in range(100):
            y2 = crand(rng, 2, 2)
            e = crand(rng, 2, 2)
            y1 = crand(rng, 2, 2)
            u1 = crand(rng, 2, 2)
            u2 = crand(rng, 2, 2)
            d1 = np.exp(1j * rng.uniform(-np.pi, np.pi, 2))
            d2 = np.exp(1j * rng.uniform(-np.pi, np.pi, 2))
            k = cascaded_matrix(y2, e, y1, u1, u2, d1, d2)
            assert np.allclose(k, cascade_oracle(y2, e, y1, u1, u2, d1, d2), atol=1e-12)

    def test_linear_in_each_link(self):
        # Superposition per operand: links absent from a term contribute a
        # constant offset, so compare against F(a) + F(b) - F(0).
        rng = np.random.default_rng(17)
        d1 = np.exp(1j * rng.uniform(-np.pi, np.pi, 2))
        d2 = np.exp(1j * rng.uniform(-np.pi, np.pi, 2))
        args_a = [crand(rng, 2, 2) for _ in range(5)]
        args_b = [crand(rng, 2, 2) for _ in range(5)]
        for idx in range(5):
            mixed = list(args_a)
            mixed[idx] = args_a[idx] + args_b[idx]
            swapped = list(args_a)
            swapped[idx] = args_b[idx]
            zeroed = list(args_a)
            zeroed[idx] = np.zeros((2, 2))
            lhs = cascaded_matrix(*mixed, d1, d2)
            rhs = (cascaded_matrix(*args_a, d1, d2)
                   + cascaded_matrix(*swapped, d1, d2)
                   - cascaded_matrix(*zeroed, d1, d2))
            assert np.allclose(lhs, rhs, atol=1e-12)

    def test_accepts_phase_shift_objects(self):
        rng = np.random.default_rng(18)
        mats = [crand(rng, 2, 2) for _ in range(5)]
        angles1 = rng.uniform(-np.pi, np.pi, 2)
        angles2 = rng.uniform(-np.pi, np.pi, 2)
        k1 = cascaded_matrix(*mats, PhaseShiftMatrix(angles1), PhaseShiftMatrix(angles2))
        k2 = cascaded_matrix(*mats, np.exp(1j * angles1), np.exp(1j * angles2))
        assert np.allclose(k1, k2)

    def test_dimension_mismatch(self):
        rng = np.random.default_rng(19)
        with pytest.raises(DimensionMismatch):
            cascaded_matrix(crand(rng, 2, 3), crand(rng, 3, 3), crand(rng, 2, 3),
                            crand(rng, 3, 2), crand(rng, 4, 2), np.ones(3), np.ones(3))

    def test_adversary_ordering(self):
        cfg = tiny_config(n_adv=3)
        real = realization_sample(cfg, np.random.default_rng(20))
        rng = np.random.default_rng(21)
        d1 = np.exp(1j * rng.uniform(-np.pi, np.pi, cfg.a1))
        d2 = np.exp(1j * rng.uniform(-np.pi, np.pi, cfg.a2))
        g = adversary_cascade(real, d1, d2)
        expected = (real.y1p @ np.diag(d1) @ real.ep @ np.diag(d2) @ real.u2p
                    + real.y1p @ np.diag(d1) @ real.u1p
                    + real.y2p @ np.diag(d2) @ real.u2p)
        assert np.allclose(g, expected, atol=1e-12)
        assert g.shape == (cfg.n_r, 3)

    def test_legitimate_wrapper(self):
        cfg = tiny_config()
        real = realization_sample(cfg, np.random.default_rng(22))
        rng = np.random.default_rng(23)
        d1 = np.exp(1j * rng.uniform(-np.pi, np.pi, cfg.a1))
        d2 = np.exp(1j * rng.uniform(-np.pi, np.pi, cfg.a2))
        k = legitimate_cascade(real, d1, d2)
        assert np.allclose(k, cascade_oracle(real.y2, real.e, real.y1, real.u1, real.u2, d1, d2))


class TestStatisticalInvariants:
    def test_steering_modulus_via_model(self):
        cfg = tiny_config()
        model = ChannelModel(cfg)
        los = model._los_batch("u1", 50, np.random.default_rng(24))
        assert np.allclose(np.abs(los), 1.0, atol=1e-12)

    def test_nlos_second_moment_through_model(self):
        # kappa = 0 isolates the NLoS part; correlations give unit diagonal so
        # the Frobenius second moment stays N1 * N2.
        cfg = tiny_config(kappa=0.0)
        model = ChannelModel(cfg)
        batch = model.sample_batch(10_000, np.random.default_rng(25))
        mean_sq = np.mean(np.abs(batch.u1) ** 2 * batch.u1.shape[1] * batch.u1.shape[2],)
        assert mean_sq == pytest.approx(cfg.a1 * cfg.n_t, rel=0.05)


class TestDump:
    def test_csv_round_line_count(self, tmp_path):
        cfg = tiny_config()
        real = realization_sample(cfg, np.random.default_rng(26))
        path = tmp_path / "real.csv"
        dump_realization(real, path, fmt="csv")
        lines = path.read_text().strip().splitlines()
        expected_entries = sum(getattr(real, n).size for n in
                               ("u1", "u2", "y1", "y2", "e", "u1p", "u2p", "y1p", "y2p", "ep"))
        assert len(lines) == expected_entries + 1

    def test_binary_round_trip(self, tmp_path):
        cfg = tiny_config()
        real = realization_sample(cfg, np.random.default_rng(27))
        path = tmp_path / "real.bin"
        dump_realization(real, path, fmt="bin")
        back = load_realization_bin(path, block_len=cfg.block_len)
        assert np.array_equal(back.u1, real.u1)
        assert np.array_equal(back.ep, real.ep)
