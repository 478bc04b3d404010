import math
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from qrnscale.model import (PERFECT, DistillationInfeasible, DistillationTrace, FixedPointNotConverged,
                            NoiseParams, distill_fidelity, distill_fixed_point, distill_n_rounds,
                            distill_success_prob, swap_chain_fidelity, swap_chain_fidelity_hetero,
                            werner_fidelity)

from conftest import exact_distill, exact_swap

NOISY = NoiseParams(0.99, 0.99)

fidelities = st.floats(0.25, 1.0)
distillable = st.floats(0.5, 1.0)
noise_st = st.builds(NoiseParams, st.floats(0.5, 1.0), st.floats(0.5, 1.0))


def bbpssw_noiseless(f):
    # textbook two-copy Werner recurrence, written independently of the noisy form
    num = f**2 + ((1 - f) / 3) ** 2
    den = f**2 + 2 * f * (1 - f) / 3 + 5 * ((1 - f) / 3) ** 2
    return num / den, den


class TestWerner:
    @pytest.mark.parametrize("w, expected", [(1.0, 1.0), (0.0, 0.25), (0.5, 0.625)])
    def test_values(self, w, expected):
        assert werner_fidelity(w) == expected

    @pytest.mark.parametrize("w", [-0.1, 1.01])
    def test_domain(self, w):
        with pytest.raises(ValueError):
            werner_fidelity(w)


class TestNoiseParams:
    @pytest.mark.parametrize("p2, eta", [(0.0, 0.9), (0.9, 0.0), (1.1, 0.9), (0.9, 1.0001)])
    def test_rejects_out_of_range(self, p2, eta):
        with pytest.raises(ValueError):
            NoiseParams(p2, eta)

    def test_frozen(self):
        with pytest.raises(AttributeError):
            NOISY.p2 = 0.5


class TestSwap:
    def test_single_link_identity(self):
        assert swap_chain_fidelity(0.8, 1, NOISY) == 0.8

    def test_perfect(self):
        assert swap_chain_fidelity(1.0, 2, PERFECT) == 1.0

    def test_two_noisy_links(self):
        expected = float(exact_swap("0.99", 2, "0.99", "0.99"))
        assert swap_chain_fidelity(0.99, 2, NOISY) == pytest.approx(expected, rel=1e-14)
        assert expected == pytest.approx(0.95365, abs=5e-6)

    def test_bad_link_count(self):
        with pytest.raises(ValueError):
            swap_chain_fidelity(0.9, 0, NOISY)

    @given(fidelities, noise_st)
    def test_identity_property(self, f, noise):
        assert swap_chain_fidelity(f, 1, noise) == f

    @given(fidelities, st.integers(1, 60), noise_st)
    def test_hetero_agrees(self, f, n, noise):
        homo = swap_chain_fidelity(f, n, noise)
        hetero = swap_chain_fidelity_hetero([f] * n, noise)
        assert hetero == pytest.approx(homo, rel=1e-12)

    def test_hetero_mixed(self):
        got = swap_chain_fidelity_hetero([0.9, 0.95, 0.99], NOISY)
        a = NOISY.swap_factor
        assert got == pytest.approx(0.25 + 0.75 * a**2 * (2.6 / 3) * (2.8 / 3) * (2.96 / 3), rel=1e-14)

    @given(st.floats(0.2501, 1.0), st.integers(1, 80), noise_st)
    def test_decreasing_in_links(self, f, n, noise):
        assume(noise.swap_factor * (4 * f - 1) / 3 < 1)
        assume(noise.swap_factor > 0)
        # beyond this the correction term is lost to round-off against 1/4
        assume(swap_chain_fidelity(f, n, noise) - 0.25 > 1e-12)
        assert swap_chain_fidelity(f, n + 1, noise) < swap_chain_fidelity(f, n, noise)


class TestDistill:
    def test_pure_input_is_fixed(self):
        assert distill_fidelity(1.0, PERFECT) == 1.0
        assert distill_success_prob(1.0, PERFECT) == 1.0

    def test_noiseless_point(self):
        assert distill_fidelity(0.7, PERFECT) == pytest.approx(25 / 34, abs=1e-12)
        assert distill_success_prob(0.7, PERFECT) == pytest.approx(0.68, abs=1e-12)

    def test_half_is_fixed(self):
        assert distill_fidelity(0.5, PERFECT) == pytest.approx(0.5, abs=1e-12)

    def test_noisy_success_probability(self):
        f_exact, p_exact = exact_distill("0.99", "0.99", "0.99")
        assert p_exact == Fraction("0.958177182848")
        assert distill_success_prob(0.99, NOISY) == pytest.approx(float(p_exact), rel=1e-14)
        assert distill_fidelity(0.99, NOISY) == pytest.approx(float(f_exact), rel=1e-14)

    @pytest.mark.parametrize("fn", [distill_fidelity, distill_success_prob])
    def test_below_half_refused(self, fn):
        with pytest.raises(DistillationInfeasible) as info:
            fn(0.49, NOISY)
        assert info.value.fidelity == 0.49

    @given(distillable, noise_st)
    def test_matches_exact_rational(self, f, noise):
        f_exact, p_exact = exact_distill(f, noise.eta, noise.p2)
        assert distill_fidelity(f, noise) == pytest.approx(float(f_exact), rel=1e-12)
        assert distill_success_prob(f, noise) == pytest.approx(float(p_exact), rel=1e-12)

    @given(distillable)
    def test_noiseless_matches_textbook(self, f):
        fid, p = bbpssw_noiseless(f)
        assert distill_fidelity(f, PERFECT) == pytest.approx(fid, rel=1e-13)
        assert distill_success_prob(f, PERFECT) == pytest.approx(p, rel=1e-13)

    @given(st.floats(0.5, 1.0, exclude_min=True, exclude_max=True))
    def test_noiseless_gain(self, f):
        assume(f < 1 - 1e-9)
        assert distill_fidelity(f, PERFECT) > f

    @settings(max_examples=300)
    @given(distillable, st.builds(NoiseParams, st.floats(0.01, 1.0), st.floats(0.01, 1.0)))
    def test_success_probability_bounds(self, f, noise):
        p = distill_success_prob(f, noise)
        assert 0 < p <= 1

    @given(st.floats(0.5, 0.999), st.floats(1e-4, 1e-3), noise_st)
    def test_map_increasing(self, f, df, noise):
        # the link-count bound relies on the map being increasing in its input
        assert distill_fidelity(min(f + df, 1.0), noise) >= distill_fidelity(f, noise)


class TestRounds:
    def test_zero_rounds(self):
        t = distill_n_rounds(0, 0.8, NOISY)
        assert t.final == 0.8 and t.success_probs == () and t.rate_factor() == 1.0

    def test_one_and_two_rounds(self):
        assert distill_n_rounds(1, 0.7, PERFECT).final == pytest.approx(25 / 34, abs=1e-12)
        t = distill_n_rounds(2, 0.7, PERFECT)
        assert t.final == pytest.approx(317 / 410, abs=1e-12)
        assert t.fidelities[:2] == (0.7, distill_fidelity(0.7, PERFECT))
        assert t.success_probs[0] == pytest.approx(0.68, abs=1e-12)

    def test_reports_failing_round(self):
        # noisy map pushes 0.5 below 0.5, so round 2 is refused
        assert distill_fidelity(0.5, NOISY) < 0.5
        with pytest.raises(DistillationInfeasible) as info:
            distill_n_rounds(3, 0.5, NOISY)
        assert info.value.round_index == 2

    @given(st.integers(1, 12), st.floats(0.55, 1.0))
    def test_recursion(self, n, f):
        noise = NoiseParams(0.995, 0.995)
        prev = distill_n_rounds(n - 1, f, noise)
        assume(prev.final >= 0.5)
        assert distill_n_rounds(n, f, noise).final == distill_fidelity(prev.final, noise)

    def test_trace_shape_validated(self):
        with pytest.raises(ValueError):
            DistillationTrace((0.9, 0.95), ())

    def test_negative_rounds(self):
        with pytest.raises(ValueError):
            distill_n_rounds(-1, 0.9, NOISY)


class TestFixedPoint:
    def test_noiseless_attractor(self):
        assert distill_fixed_point(0.7, PERFECT, 1e-12) == pytest.approx(1.0, abs=1e-10)

    def test_noiseless_half(self):
        assert distill_fixed_point(0.5, PERFECT, 1e-12) == pytest.approx(0.5, abs=1e-12)

    def test_noisy_regression(self):
        # 40-digit mpmath iteration of the same map
        fp = distill_fixed_point(0.9, NOISY, 1e-12)
        assert fp == pytest.approx(0.97375657562214269, abs=1e-10)
        assert fp < 1

    @given(st.floats(0.6, 1.0), st.builds(NoiseParams, st.floats(0.97, 1.0), st.floats(0.97, 1.0)))
    def test_bracketing(self, f, noise):
        tol = 1e-12
        try:
            fp = distill_fixed_point(f, noise, tol)
        except DistillationInfeasible:
            assume(False)
        assert abs(distill_fidelity(fp, noise) - fp) < 10 * tol

    def test_cap(self):
        with pytest.raises(FixedPointNotConverged) as info:
            distill_fixed_point(0.7, PERFECT, 1e-12, max_iter=3)
        assert 0.7 < info.value.last < 1

    def test_falls_below_half(self):
        with pytest.raises(DistillationInfeasible):
            distill_fixed_point(0.52, NoiseParams(0.9, 0.9))
