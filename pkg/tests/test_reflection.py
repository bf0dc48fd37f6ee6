import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import active_irs.reflection as refl_mod
from active_irs.channel import ChannelRealization, NoisePowers, synthesize_los
from active_irs.errors import DomainError
from active_irs.reflection import (ActivePerElement, ActiveTotal, Passive, QuantizationSpec,
                                   ReflectionConfig, achievable_rate, amplifier_power,
                                   brute_force_oracle, optimize, optimize_active,
                                   optimize_passive, quantize_reflection, received_snr)

from conftest import NOISE, fig5_scenario, random_channel


def phase_grid_max(ch, alpha, P_t, noise, G):
    """Exhaustive max of received_snr over a G**M phase grid with fixed amplitudes."""
    M = ch.num_elements
    grid = 2 * np.pi * np.arange(G) / G
    mesh = np.stack(np.meshgrid(*([grid] * M), indexing="ij"), axis=-1).reshape(-1, M)
    best = 0.0
    for i in range(0, mesh.shape[0], 1 << 20):
        phi = mesh[i:i + (1 << 20)]
        s = np.exp(1j * phi) @ (np.conj(ch.h) * alpha * ch.g) + ch.t
        den = noise.sigmaI_sq * np.sum(np.abs(ch.h) ** 2 * alpha ** 2) + noise.sigma0_sq
        best = max(best, float(np.max(P_t * np.abs(s) ** 2 / den)))
    return best


class TestReceivedSnr:
    def test_scalar_substitution(self):
        ch = ChannelRealization(np.ones(1), np.ones(1), 0)
        cfg = ReflectionConfig(np.ones(1), np.zeros(1))
        assert received_snr(ch, cfg, 1.0, NoisePowers(0.1, 0.1)) == pytest.approx(5.0, rel=1e-15)

    def test_zero_amplitude_no_direct(self):
        ch = ChannelRealization(np.ones(3), np.ones(3), 0)
        assert received_snr(ch, ReflectionConfig(np.zeros(3), np.zeros(3)), 1.0, NOISE) == 0.0

    def test_two_elements_aligned(self):
        # hand evaluation: conj(h) * g = (1, -1j), aligned sum |1 + 1| ** 2 = 4
        ch = ChannelRealization(np.array([1, 1]), np.array([1, 1j]), 0)
        cfg = optimize_passive(ch)
        assert cfg.phi[1] == pytest.approx(np.pi / 2)
        assert received_snr(ch, cfg, 1.0, NoisePowers(1.0, 0.0)) == pytest.approx(4.0, rel=1e-15)
        anti = ReflectionConfig(np.ones(2), np.array([0.0, -np.pi / 2]))
        assert received_snr(ch, anti, 1.0, NoisePowers(1.0, 0.0)) == pytest.approx(0.0, abs=1e-30)

    def test_amplification_noise_term(self):
        ch = ChannelRealization(np.array([1.0, 2.0]), np.array([3.0, 1.0]), 0)
        cfg = ReflectionConfig(np.array([2.0, 1.0]), np.zeros(2))
        # signal |3*2*1 + 1*1*2|^2 = 64, noise 0.5*(9*4 + 1*1) + 0.25
        assert received_snr(ch, cfg, 2.0, NoisePowers(0.25, 0.5)) == pytest.approx(128 / 18.75)

    def test_zero_noise_is_error(self):
        ch = ChannelRealization(np.ones(1), np.ones(1))
        with pytest.raises(DomainError):
            received_snr(ch, ReflectionConfig(np.ones(1), np.zeros(1)), 1.0, NoisePowers(0, 0))

    def test_dimension_mismatch(self):
        ch = ChannelRealization(np.ones(2), np.ones(2))
        with pytest.raises(DomainError):
            received_snr(ch, ReflectionConfig(np.ones(3), np.zeros(3)), 1.0, NOISE)

    def test_non_positive_power(self):
        ch = ChannelRealization(np.ones(1), np.ones(1))
        with pytest.raises(DomainError):
            received_snr(ch, ReflectionConfig(np.ones(1), np.zeros(1)), 0.0, NOISE)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.01, 100.0))
    def test_scale_covariance(self, seed, c):
        rng = np.random.default_rng(seed)
        ch = random_channel(rng, 4)
        alpha = rng.uniform(0, 3, 4)
        phi = rng.uniform(0, 2 * np.pi, 4)
        coef = alpha * np.exp(1j * phi)
        coef_c = c * coef
        sig = abs(np.sum(np.conj(ch.h) * coef * ch.g)) ** 2
        sig_c = abs(np.sum(np.conj(ch.h) * coef_c * ch.g)) ** 2
        nz = np.sum(np.abs(ch.h) ** 2 * alpha ** 2)
        nz_c = np.sum(np.abs(ch.h) ** 2 * (c * alpha) ** 2)
        assert sig_c == pytest.approx(c * c * sig, rel=1e-10)
        assert nz_c == pytest.approx(c * c * nz, rel=1e-10)
        # with only amplification noise the SNR is scale invariant
        noise = NoisePowers(0.0, 1.0)
        s1 = received_snr(ch, ReflectionConfig(alpha, phi), 1.0, noise)
        s2 = received_snr(ch, ReflectionConfig(c * alpha, phi), 1.0, noise)
        assert s2 == pytest.approx(s1, rel=1e-9)


class TestAchievableRate:
    @pytest.mark.parametrize("snr,rate", [(0, 0), (1, 1), (3, 2)])
    def test_values(self, snr, rate):
        assert achievable_rate(snr) == rate

    def test_negative(self):
        with pytest.raises(DomainError):
            achievable_rate(-1e-3)


class TestAmplifierPower:
    def test_substitution(self):
        ch = ChannelRealization(np.array([math.sqrt(1e-5)]), np.ones(1))
        per, total = amplifier_power(ch, ReflectionConfig(np.ones(1), np.zeros(1)), 1.0, 1e-11)
        assert per[0] == pytest.approx(1.000001e-5, rel=1e-12)
        assert total == per[0]

    def test_zero(self):
        ch = ChannelRealization(np.ones(3), np.ones(3))
        assert amplifier_power(ch, ReflectionConfig(np.zeros(3), np.zeros(3)), 1.0, 1e-3)[1] == 0.0

    def test_quadratic(self, rng):
        ch = random_channel(rng, 5)
        a = rng.uniform(0, 2, 5)
        t1 = amplifier_power(ch, ReflectionConfig(a, np.zeros(5)), 0.3, 1e-6)[1]
        t2 = amplifier_power(ch, ReflectionConfig(2 * a, np.zeros(5)), 0.3, 1e-6)[1]
        assert t2 == pytest.approx(4 * t1, rel=1e-14)


class TestOptimizePassive:
    @pytest.mark.parametrize("M", [1, 4, 32])
    def test_unit_channels(self, M):
        ch = ChannelRealization(np.ones(M), np.ones(M))
        cfg = optimize_passive(ch)
        np.testing.assert_array_equal(cfg.alpha, 1.0)
        np.testing.assert_allclose(cfg.phi, 0.0, atol=0)
        noise = NoisePowers(1e-3, 0.0)
        assert received_snr(ch, cfg, 2.0, noise) == pytest.approx(2.0 * M * M / 1e-3, rel=1e-14)

    def test_single_element_phase_immaterial(self, rng):
        ch = random_channel(rng, 1)
        noise = NoisePowers(1e-9, 0.0)
        ref = received_snr(ch, optimize_passive(ch), 1.0, noise)
        for phi in rng.uniform(0, 2 * np.pi, 5):
            assert received_snr(ch, ReflectionConfig(np.ones(1), [phi]), 1.0, noise) == pytest.approx(ref, rel=1e-12)

    @pytest.mark.parametrize("seed", range(4))
    def test_two_elements_against_fine_grid(self, seed):
        rng = np.random.default_rng(seed)
        ch = random_channel(rng, 2, direct=seed % 2 == 1)
        noise = NoisePowers(1e-9, 0.0)
        snr = received_snr(ch, optimize_passive(ch), 1.0, noise)
        grid = phase_grid_max(ch, np.ones(2), 1.0, noise, 4096)
        assert snr >= grid * (1 - 1e-12)
        assert grid >= snr * (1 - 1e-6)
        # triangle inequality bound is met with equality
        bound = (np.sum(np.abs(ch.h) * np.abs(ch.g)) + abs(ch.t)) ** 2 / 1e-9
        assert snr == pytest.approx(bound, rel=1e-12)

    def test_aligns_with_direct_link(self, rng):
        ch = random_channel(rng, 3, direct=True)
        cfg = optimize_passive(ch)
        terms = np.conj(ch.h) * np.exp(1j * cfg.phi) * ch.g
        np.testing.assert_allclose(np.angle(terms * np.conj(ch.t)), 0.0, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3), st.booleans())
def test_alignment_maximizes_snr_for_fixed_amplitudes(seed, M, direct):
    rng = np.random.default_rng(seed)
    ch = random_channel(rng, M, direct=direct)
    alpha = rng.uniform(0.1, 2.0, M)
    noise = NoisePowers(1e-9, 0.0)
    aligned = received_snr(ch, ReflectionConfig(alpha, optimize_passive(ch).phi), 1.0, noise)
    assert aligned >= phase_grid_max(ch, alpha, 1.0, noise, 32) * (1 - 1e-12)


class TestOptimizeActive:
    def test_rejects_passive_model(self, rng):
        with pytest.raises(DomainError):
            optimize_active(random_channel(rng, 2), Passive(), 1.0, NOISE)

    @pytest.mark.parametrize("bad", [0.0, -1.0])
    def test_infeasible_budget(self, bad):
        with pytest.raises(DomainError):
            ActiveTotal(bad)
        with pytest.raises(DomainError):
            ActivePerElement(bad)

    def test_phases_are_aligned(self, rng):
        ch = random_channel(rng, 6, direct=True)
        cfg = optimize_active(ch, ActiveTotal(1e-3), 1.0, NoisePowers(1e-9, 1e-9))
        np.testing.assert_allclose(cfg.phi, optimize_passive(ch).phi)

    @pytest.mark.parametrize("M", [2, 3, 128])
    def test_equal_gain_total_uniform(self, M):
        sc = fig5_scenario(60.0, num_elements=M)
        ch = synthesize_los(sc)
        P_a = 1e-2
        cfg = optimize_active(ch, ActiveTotal(P_a), sc.transmit_power, sc.noise)
        g2 = abs(ch.g[0]) ** 2
        expected = math.sqrt(P_a / (M * (sc.transmit_power * g2 + sc.noise.sigmaI_sq)))
        np.testing.assert_allclose(cfg.alpha, expected, rtol=1e-9)
        snr = received_snr(ch, cfg, sc.transmit_power, sc.noise)
        if M <= 3:
            oracle = brute_force_oracle(ch, ActiveTotal(P_a), sc.transmit_power, sc.noise, 32)
            assert snr >= received_snr(ch, oracle, sc.transmit_power, sc.noise) * (1 - 1e-9)
        else:
            # 1-D search over uniform amplitudes up to the budget boundary
            phi = cfg.phi
            scan = [received_snr(ch, ReflectionConfig(np.full(M, a), phi), sc.transmit_power, sc.noise)
                    for a in np.linspace(0, expected, 2001)]
            assert snr >= max(scan) * (1 - 1e-12)
            assert np.argmax(scan) == 2000

    def test_noise_free_amplifiers_matched_direction(self, rng):
        ch = random_channel(rng, 2)
        noise = NoisePowers(1e-9, 0.0)
        P_t, P_a = 1.0, 1e-3
        cfg = optimize_active(ch, ActiveTotal(P_a), P_t, noise)
        a = np.abs(ch.h) * np.abs(ch.g)
        c = P_t * np.abs(ch.g) ** 2
        direction = a / c
        np.testing.assert_allclose(cfg.alpha / np.linalg.norm(cfg.alpha),
                                   direction / np.linalg.norm(direction), rtol=1e-7)
        assert amplifier_power(ch, cfg, P_t, 0.0)[1] == pytest.approx(P_a, rel=1e-9)
        oracle = brute_force_oracle(ch, ActiveTotal(P_a), P_t, noise, 64)
        assert received_snr(ch, cfg, P_t, noise) >= received_snr(ch, oracle, P_t, noise) * (1 - 1e-12)

    def test_per_element_single(self):
        ch = ChannelRealization(np.ones(1), np.ones(1))
        cfg = optimize_active(ch, ActivePerElement(4.0), 1.0, NoisePowers(1.0, 0.0))
        assert cfg.alpha[0] == 2.0

    def test_per_element_equal_gain_is_maximum(self):
        sc = fig5_scenario(40.0, num_elements=64)
        ch = synthesize_los(sc)
        cfg = optimize_active(ch, ActivePerElement(1e-3), sc.transmit_power, sc.noise)
        c = sc.transmit_power * np.abs(ch.g) ** 2 + sc.noise.sigmaI_sq
        np.testing.assert_allclose(cfg.alpha, np.sqrt(1e-3 / c), rtol=1e-14)

    def test_per_element_maximum_can_be_suboptimal(self):
        # weak incident signal on element 2: amplifying it mostly amplifies noise
        ch = ChannelRealization(np.array([1e-2, 1e-5]), np.array([1e-2, 1e-1]))
        noise = NoisePowers(1e-9, 1e-8)
        pm = ActivePerElement(1e-3)
        cfg = optimize_active(ch, pm, 1.0, noise)
        c = np.abs(ch.g) ** 2 + noise.sigmaI_sq
        max_rule = ReflectionConfig(np.sqrt(1e-3 / c), cfg.phi)
        snr = received_snr(ch, cfg, 1.0, noise)
        assert snr > 100 * received_snr(ch, max_rule, 1.0, noise)
        oracle = brute_force_oracle(ch, pm, 1.0, noise, 64)
        assert snr >= received_snr(ch, oracle, 1.0, noise) * (1 - 1e-12)

    def test_alpha_max_cap(self, rng):
        ch = random_channel(rng, 8)
        noise = NoisePowers(1e-9, 1e-10)
        for pm in (ActiveTotal(1.0, alpha_max=3.0), ActivePerElement(1.0, alpha_max=3.0)):
            cfg = optimize_active(ch, pm, 1e-3, noise)
            assert np.all(cfg.alpha <= 3.0 * (1 + 1e-12))

    def test_alpha_max_against_oracle(self, rng):
        ch = random_channel(rng, 2, direct=True)
        noise = NoisePowers(1e-9, 1e-9)
        for pm in (ActiveTotal(1e-2, alpha_max=2.0), ActivePerElement(1e-2, alpha_max=2.0)):
            snr = received_snr(ch, optimize_active(ch, pm, 1e-3, noise), 1e-3, noise)
            oracle = received_snr(ch, brute_force_oracle(ch, pm, 1e-3, noise, 64), 1e-3, noise)
            assert snr >= oracle * (1 - 1e-12)

    def test_zero_cascaded_gain_returns_zero_amplitudes(self):
        ch = ChannelRealization(np.zeros(3), np.ones(3), t=1e-3)
        cfg = optimize_active(ch, ActiveTotal(1.0), 1.0, NoisePowers(1e-9, 1e-6))
        np.testing.assert_array_equal(cfg.alpha, 0.0)

    def test_zero_noise_is_error(self, rng):
        with pytest.raises(DomainError):
            optimize_active(random_channel(rng, 2), ActiveTotal(1.0), 1.0, NoisePowers(0, 0))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 100_000), st.integers(1, 40), st.booleans(), st.booleans(),
           st.floats(-12, -6))
    def test_feasible_and_binding(self, seed, M, direct, per_element, log_si):
        rng = np.random.default_rng(seed)
        ch = random_channel(rng, M, direct=direct)
        noise = NoisePowers(1e-9, 10.0 ** log_si)
        P_t = 1.0
        if per_element:
            pm = ActivePerElement(1e-4)
            per, _ = amplifier_power(ch, optimize_active(ch, pm, P_t, noise), P_t, noise.sigmaI_sq)
            assert np.all(per <= 1e-4 + 1e-9)
        else:
            pm = ActiveTotal(1e-3)
            _, total = amplifier_power(ch, optimize_active(ch, pm, P_t, noise), P_t, noise.sigmaI_sq)
            assert total <= 1e-3 + 1e-9
            if not direct:
                assert total == pytest.approx(1e-3, rel=1e-6)

    @pytest.mark.parametrize("seed", range(6))
    def test_direct_link_against_oracle(self, seed):
        rng = np.random.default_rng(100 + seed)
        M = 1 + seed % 3
        ch = random_channel(rng, M, direct=True)
        noise = NoisePowers(1e-9, 10.0 ** rng.uniform(-10, -7))
        pm = ActiveTotal(1e-3)
        snr = received_snr(ch, optimize_active(ch, pm, 1.0, noise), 1.0, noise)
        oracle = received_snr(ch, brute_force_oracle(ch, pm, 1.0, noise, 32), 1.0, noise)
        assert snr >= oracle * (1 - 1e-12)

    def test_flat_boundary_optimum(self):
        # amplification noise dominates and the optimum sits on the budget sphere,
        # where the objective is flat to rounding along the boundary
        ch = ChannelRealization(g=np.array([-0.01134374 - 0.01378293j, 0.0043804 + 0.00989486j]),
                                h=np.array([-0.00056185 - 0.00080442j, -0.01865916 + 0.00175419j]),
                                t=-8.59641542015624e-06 + 0.00014945454553579363j)
        noise = NoisePowers(1e-9, 9.612450799774959e-07)
        pm = ActiveTotal(0.000415906229728665)
        P_t = 0.3185064930168639
        cfg = optimize_active(ch, pm, P_t, noise)
        assert amplifier_power(ch, cfg, P_t, noise.sigmaI_sq)[1] <= pm.total_power * (1 + 1e-12)
        oracle = brute_force_oracle(ch, pm, P_t, noise, 64)
        assert received_snr(ch, cfg, P_t, noise) >= received_snr(ch, oracle, P_t, noise)

    def test_dispatch(self, rng):
        ch = random_channel(rng, 3)
        np.testing.assert_array_equal(optimize(ch, Passive(), 1.0, NOISE).alpha, 1.0)
        assert optimize(ch, ActiveTotal(1e-3), 1.0, NOISE).alpha.sum() > 0


class TestProjection:
    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 6))
    def test_projection_is_nearest_feasible_point(self, seed, M):
        rng = np.random.default_rng(seed)
        v = rng.normal(0, 2, M)
        upper = np.where(rng.random(M) < 0.5, np.inf, rng.uniform(0.1, 1.5, M))
        radius = rng.uniform(0.2, 2.0)
        u = refl_mod._project(v, upper, radius)
        assert np.all(u >= 0) and np.all(u <= upper) and np.linalg.norm(u) <= radius * (1 + 1e-12)
        # no random feasible point is closer
        cand = np.abs(rng.normal(0, 1, (2000, M)))
        cand = np.minimum(cand, upper)
        norms = np.linalg.norm(cand, axis=1)
        cand = cand * np.minimum(1.0, radius / np.maximum(norms, 1e-300))[:, None]
        d = np.linalg.norm(u - v)
        assert np.all(np.linalg.norm(cand - v, axis=1) >= d - 1e-9)


class TestBruteForceOracle:
    def test_single_element_passive_exact(self, rng):
        ch = random_channel(rng, 1)
        noise = NoisePowers(1e-9, 0.0)
        o = brute_force_oracle(ch, Passive(), 1.0, noise, 8)
        assert received_snr(ch, o, 1.0, noise) == pytest.approx(
            received_snr(ch, optimize_passive(ch), 1.0, noise), rel=1e-14)

    def test_refuses_large_m(self, rng):
        with pytest.raises(DomainError):
            brute_force_oracle(random_channel(rng, 4), Passive(), 1.0, NOISE, 8)

    def test_refuses_coarse_grid(self, rng):
        with pytest.raises(DomainError):
            brute_force_oracle(random_channel(rng, 2), Passive(), 1.0, NOISE, 4)

    @pytest.mark.parametrize("pm", [Passive(), ActiveTotal(1e-3), ActivePerElement(3e-4)])
    def test_refinement_non_decreasing(self, pm):
        rng = np.random.default_rng(7)
        ch = random_channel(rng, 2, direct=True)
        noise = NoisePowers(1e-9, 1e-9)
        snrs = [received_snr(ch, brute_force_oracle(ch, pm, 1.0, noise, G), 1.0, noise)
                for G in (8, 16, 32)]
        assert snrs[0] <= snrs[1] <= snrs[2]

    @pytest.mark.parametrize("direct", [False, True])
    def test_phase_reduction_matches_exhaustive(self, monkeypatch, direct):
        rng = np.random.default_rng(11)
        ch = random_channel(rng, 3, direct=direct)
        noise = NoisePowers(1e-9, 1e-9)
        pm = ActiveTotal(1e-3)
        monkeypatch.setattr(refl_mod, "_EXHAUSTIVE_PHASE_LIMIT", 10 ** 9)
        full = received_snr(ch, brute_force_oracle(ch, pm, 1.0, noise, 8), 1.0, noise)
        monkeypatch.setattr(refl_mod, "_EXHAUSTIVE_PHASE_LIMIT", 0)
        reduced = received_snr(ch, brute_force_oracle(ch, pm, 1.0, noise, 8), 1.0, noise)
        assert reduced == pytest.approx(full, rel=1e-13)

    def test_oracle_is_feasible(self, rng):
        ch = random_channel(rng, 3, direct=True)
        noise = NoisePowers(1e-9, 1e-9)
        o = brute_force_oracle(ch, ActiveTotal(1e-3), 1.0, noise, 16)
        assert amplifier_power(ch, o, 1.0, 1e-9)[1] <= 1e-3 * (1 + 1e-12)
        o = brute_force_oracle(ch, ActivePerElement(1e-4), 1.0, noise, 16)
        assert np.all(amplifier_power(ch, o, 1.0, 1e-9)[0] <= 1e-4 * (1 + 1e-12))


class TestQuantize:
    def test_one_bit_phase(self):
        q = quantize_reflection(ReflectionConfig([1.0], [0.1]), QuantizationSpec(1, 16, 2.0))
        assert q.phi[0] == 0.0

    def test_single_amplitude_level(self):
        q = quantize_reflection(ReflectionConfig([0.3, 5.0], [0, 0]), QuantizationSpec(3, 1, 2.0))
        np.testing.assert_array_equal(q.alpha, 0.0)

    def test_ties_round_down(self):
        q = quantize_reflection(ReflectionConfig([0.25, 0.75], [np.pi / 2, 3 * np.pi / 2]),
                                QuantizationSpec(1, 3, 1.0))
        np.testing.assert_array_equal(q.alpha, [0.0, 0.5])
        np.testing.assert_array_equal(q.phi, [0.0, np.pi])

    def test_wraps_near_two_pi(self):
        q = quantize_reflection(ReflectionConfig([1.0], [2 * np.pi - 0.01]), QuantizationSpec(2, 4, 1.0))
        assert q.phi[0] == 0.0

    def test_clamps_amplitude(self):
        q = quantize_reflection(ReflectionConfig([7.0], [0.0]), QuantizationSpec(2, 5, 2.0))
        assert q.alpha[0] == 2.0

    @pytest.mark.parametrize("kw", [dict(phase_bits=0), dict(amp_levels=0), dict(alpha_max=0.0)])
    def test_invalid_settings(self, kw):
        args = dict(phase_bits=2, amp_levels=4, alpha_max=1.0)
        args.update(kw)
        with pytest.raises(DomainError):
            QuantizationSpec(**args)

    def test_phase_bits_converge(self):
        sc = fig5_scenario()
        ch = synthesize_los(sc)
        cont = optimize_passive(ch)
        noise = NoisePowers(sc.noise.sigma0_sq, 0.0)
        s_cont = received_snr(ch, cont, sc.transmit_power, noise)
        s = [received_snr(ch, quantize_reflection(cont, QuantizationSpec(b, 2, 1.0)),
                          sc.transmit_power, noise) for b in range(1, 9)]
        assert all(x <= s_cont * (1 + 1e-12) for x in s)
        assert all(b >= a for a, b in zip(s, s[1:]))
        assert s[-1] == pytest.approx(s_cont, rel=1e-4)
