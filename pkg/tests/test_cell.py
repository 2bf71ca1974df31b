import math

import numpy as np
import pytest

from skimrnn.cell import (
    Argmax,
    Decision,
    Forced,
    LstmParams,
    Sample,
    SkimState,
    SkimUnitParams,
    TemperatureSchedule,
    Threshold,
    decision_probs,
    gumbel_sample,
    gumbel_softmax,
    init_lstm_params,
    init_skim_unit,
    lstm_step,
    skim_step_hard,
    skim_step_relaxed,
    temperature,
)
from skimrnn.tensor import ContractError, DimensionError, Tape, Tensor, backward

from gradcheck import assert_grads_close


def random_state(rng, d):
    return SkimState(Tensor(rng.uniform(-1, 1, size=d)), Tensor(rng.uniform(-1, 1, size=d)))


class FixedUniform:
    """Stub rng emitting a fixed sequence of uniform draws."""

    def __init__(self, values):
        self.values = list(values)

    def random(self):
        return self.values.pop(0)


class TestLstmStep:
    def test_zero_params_zero_output(self):
        p = LstmParams(Tensor(np.zeros((8, 5))), Tensor(np.zeros(8)),
                       d_in=3, d_out=2, d_read=2)
        h, c = lstm_step(p, Tensor([1.0, -2.0, 3.0]), Tensor(np.zeros(2)),
                         Tensor(np.zeros(2)))
        np.testing.assert_array_equal(h.data, [0.0, 0.0])
        np.testing.assert_array_equal(c.data, [0.0, 0.0])

    def test_saturated_gates_integrate(self):
        # i = f = o ~ 1, candidate ~ 1: cell accumulates one unit per step
        b = np.array([20.0, 20.0, 20.0, 20.0])  # order i, f, o, g
        p = LstmParams(Tensor(np.zeros((4, 2))), Tensor(b), d_in=1, d_out=1, d_read=1)
        c_prev = Tensor([0.5])
        h, c = lstm_step(p, Tensor([0.3]), Tensor([0.1]), c_prev)
        assert abs(c.data[0] - (0.5 + 1.0)) < 1e-6
        assert abs(h.data[0] - math.tanh(c.data[0])) < 1e-6

    def test_wrong_input_length(self):
        rng = np.random.default_rng(0)
        p = init_lstm_params(rng, 3, 2, 2)
        with pytest.raises(DimensionError):
            lstm_step(p, Tensor([1.0, 2.0]), Tensor(np.zeros(2)), Tensor(np.zeros(2)))

    def test_forget_bias_initialized_to_one(self):
        p = init_lstm_params(np.random.default_rng(0), 3, 4, 4)
        np.testing.assert_array_equal(p.b.data[4:8], np.ones(4))
        np.testing.assert_array_equal(p.b.data[:4], np.zeros(4))
        np.testing.assert_array_equal(p.b.data[8:], np.zeros(8))


class TestDecisionProbs:
    def test_zero_weights_uniform(self):
        params = init_skim_unit(np.random.default_rng(0), 3, 4, 2)
        params.decision_w.data[...] = 0.0
        p = decision_probs(params, Tensor(np.ones(3)), Tensor(np.ones(4)))
        np.testing.assert_array_equal(p.data, [0.5, 0.5])

    def test_bias_closed_form(self):
        params = init_skim_unit(np.random.default_rng(0), 3, 4, 2)
        params.decision_w.data[...] = 0.0
        params.decision_b.data[...] = [math.log(3.0), 0.0]
        p = decision_probs(params, Tensor(np.zeros(3)), Tensor(np.zeros(4)))
        np.testing.assert_allclose(p.data, [0.75, 0.25], rtol=1e-14)

    def test_saturation(self):
        params = init_skim_unit(np.random.default_rng(0), 3, 4, 2)
        params.decision_w.data[...] = 0.0
        params.decision_b.data[...] = [20.0, -20.0]
        p = decision_probs(params, Tensor(np.zeros(3)), Tensor(np.zeros(4)))
        assert p.data[0] >= 1.0 - 1e-12


class TestHardStep:
    def test_skip_leaves_state_bitwise_unchanged(self):
        rng = np.random.default_rng(1)
        params = init_skim_unit(rng, 4, 6, 0)
        for _ in range(200):
            state = random_state(rng, 6)
            x = Tensor(rng.uniform(-2, 2, size=4))
            out = skim_step_hard(params, x, state, Forced(Decision.SKIM))
            assert np.array_equal(out.state.h.data, state.h.data)
            assert np.array_equal(out.state.c.data, state.c.data)

    def test_skim_slicing_semantics(self):
        rng = np.random.default_rng(2)
        params = init_skim_unit(rng, 3, 4, 2)
        h = Tensor([1.0, 2.0, 3.0, 4.0])
        c = Tensor([5.0, 6.0, 7.0, 8.0])
        x = Tensor(rng.uniform(-1, 1, size=3))
        out = skim_step_hard(params, x, SkimState(h, c), Forced(Decision.SKIM))
        h_small, c_small = lstm_step(params.small, x, h, c.slice(0, 2))
        np.testing.assert_array_equal(out.state.h.data[:2], h_small.data)
        np.testing.assert_array_equal(out.state.c.data[:2], c_small.data)
        np.testing.assert_array_equal(out.state.h.data[2:], [3.0, 4.0])
        np.testing.assert_array_equal(out.state.c.data[2:], [7.0, 8.0])

    def test_read_equals_plain_big_cell(self):
        rng = np.random.default_rng(3)
        params = init_skim_unit(rng, 3, 5, 2)
        state = random_state(rng, 5)
        x = Tensor(rng.uniform(-1, 1, size=3))
        out = skim_step_hard(params, x, state, Forced(Decision.READ))
        h, c = lstm_step(params.big, x, state.h, state.c)
        assert np.array_equal(out.state.h.data, h.data)
        assert np.array_equal(out.state.c.data, c.data)

    def test_threshold_zero_always_reads(self):
        rng = np.random.default_rng(4)
        params = init_skim_unit(rng, 3, 4, 2)
        for _ in range(50):
            state = random_state(rng, 4)
            x = Tensor(rng.uniform(-3, 3, size=3))
            out = skim_step_hard(params, x, state, Threshold(0.0))
            assert out.decision == Decision.READ

    def test_threshold_validation(self):
        rng = np.random.default_rng(5)
        params = init_skim_unit(rng, 3, 4, 2)
        state = random_state(rng, 4)
        x = Tensor(np.zeros(3))
        with pytest.raises(ContractError):
            skim_step_hard(params, x, state, Threshold(1.5))

    def test_argmax_matches_half_threshold(self):
        rng = np.random.default_rng(6)
        params = init_skim_unit(rng, 3, 4, 2)
        for _ in range(100):
            state = random_state(rng, 4)
            x = Tensor(rng.uniform(-3, 3, size=3))
            a = skim_step_hard(params, x, state, Argmax())
            t = skim_step_hard(params, x, state, Threshold(0.5))
            if a.p.data[0] != 0.5:
                assert a.decision == t.decision

    def test_sample_policy_follows_uniform_draw(self):
        rng = np.random.default_rng(7)
        params = init_skim_unit(rng, 3, 4, 2)
        params.decision_w.data[...] = 0.0  # p = (0.5, 0.5)
        state = random_state(rng, 4)
        x = Tensor(np.zeros(3))
        out = skim_step_hard(params, x, state, Sample(FixedUniform([0.4])))
        assert out.decision == Decision.READ
        out = skim_step_hard(params, x, state, Sample(FixedUniform([0.6])))
        assert out.decision == Decision.SKIM

    def test_skim_carries_tail_of_state(self):
        rng = np.random.default_rng(8)
        for _ in range(25):
            d = int(rng.integers(2, 7))
            ds = int(rng.integers(0, d))
            params = init_skim_unit(rng, 3, d, ds)
            state = random_state(rng, d)
            x = Tensor(rng.uniform(-1, 1, size=3))
            out = skim_step_hard(params, x, state, Forced(Decision.SKIM))
            assert np.array_equal(out.state.h.data[ds:], state.h.data[ds:])
            assert np.array_equal(out.state.c.data[ds:], state.c.data[ds:])


class TestGumbel:
    def test_half_closed_form(self):
        g = gumbel_sample(FixedUniform([0.5]))
        assert abs(g - 0.36651) < 1e-4  # -log(log 2)

    def test_inverse_e_gives_zero(self):
        g = gumbel_sample(FixedUniform([math.exp(-1.0)]))
        assert abs(g) < 1e-12

    def test_endpoint_clamping(self):
        assert math.isfinite(gumbel_sample(FixedUniform([0.0])))
        assert math.isfinite(gumbel_sample(FixedUniform([1.0])))

    def test_monte_carlo_mean_euler_mascheroni(self):
        rng = np.random.default_rng(99)
        n = 10 ** 6
        u = np.clip(rng.random(n), 1e-12, 1 - 1e-12)
        mean = (-np.log(-np.log(u))).mean()
        assert abs(mean - 0.5772156649) < 0.01
        # the scalar sampler agrees with the vectorized formula
        rng2 = np.random.default_rng(99)
        scalar = np.array([gumbel_sample(rng2) for _ in range(1000)])
        rng3 = np.random.default_rng(99)
        vec = -np.log(-np.log(np.clip(rng3.random(1000), 1e-12, 1 - 1e-12)))
        np.testing.assert_allclose(scalar, vec, rtol=1e-12)


class TestGumbelSoftmax:
    def test_uniform_symmetric(self):
        r = gumbel_softmax(Tensor([0.5, 0.5]), Tensor([0.0, 0.0]), 1.0)
        np.testing.assert_array_equal(r.data, [0.5, 0.5])

    def test_closed_form(self):
        r = gumbel_softmax(Tensor([0.5, 0.5]), Tensor([1.0, 0.0]), 1.0)
        e = math.e
        np.testing.assert_allclose(r.data, [e / (e + 1.0), 1.0 / (e + 1.0)], rtol=1e-14)

    def test_low_temperature_saturates(self):
        r = gumbel_softmax(Tensor([0.6, 0.4]), Tensor([0.0, 0.0]), 0.01)
        assert r.data.max() >= 0.999

    def test_temperature_contract(self):
        with pytest.raises(ContractError):
            gumbel_softmax(Tensor([0.5, 0.5]), Tensor([0.0, 0.0]), 0.0)

    def test_sums_to_one_in_open_interval(self):
        rng = np.random.default_rng(10)
        for _ in range(200):
            p = rng.dirichlet([1.0, 1.0])
            g = np.array([gumbel_sample(rng), gumbel_sample(rng)])
            r = gumbel_softmax(Tensor(p), Tensor(g), 0.7).data
            assert abs(r.sum() - 1.0) <= 1e-12
            assert (r > 0).all() and (r < 1).all()

    def test_differentiable_wrt_p(self):
        p = Tensor([0.3, 0.7])
        g = np.array([0.2, -0.1])
        assert_grads_close(
            lambda: gumbel_softmax(p, Tensor(g), 0.8).slice(0, 1), [p], rtol=1e-5)


class TestRelaxedStep:
    def test_degenerate_noise_matches_hard_read(self):
        rng = np.random.default_rng(11)
        params = init_skim_unit(rng, 3, 5, 2)
        state = random_state(rng, 5)
        x = Tensor(rng.uniform(-1, 1, size=3))
        relaxed = skim_step_relaxed(params, x, state, tau=1.0,
                                    noise=np.array([80.0, 0.0]))
        hard = skim_step_hard(params, x, state, Forced(Decision.READ))
        np.testing.assert_allclose(relaxed.state.h.data, hard.state.h.data, atol=1e-12)
        np.testing.assert_allclose(relaxed.state.c.data, hard.state.c.data, atol=1e-12)

    def test_even_blend_is_convex_average(self):
        rng = np.random.default_rng(12)
        params = init_skim_unit(rng, 3, 5, 2)
        params.decision_w.data[...] = 0.0  # p uniform, zero noise -> r = (0.5, 0.5)
        state = random_state(rng, 5)
        x = Tensor(rng.uniform(-1, 1, size=3))
        out = skim_step_relaxed(params, x, state, tau=1.0, noise=np.zeros(2))
        np.testing.assert_array_equal(out.r.data, [0.5, 0.5])
        read = skim_step_hard(params, x, state, Forced(Decision.READ)).state
        skim = skim_step_hard(params, x, state, Forced(Decision.SKIM)).state
        np.testing.assert_allclose(
            out.state.h.data, 0.5 * read.h.data + 0.5 * skim.h.data, rtol=1e-14)
        np.testing.assert_allclose(
            out.state.c.data, 0.5 * read.c.data + 0.5 * skim.c.data, rtol=1e-14)

    def test_temperature_contract(self):
        rng = np.random.default_rng(13)
        params = init_skim_unit(rng, 3, 5, 2)
        with pytest.raises(ContractError):
            skim_step_relaxed(params, Tensor(np.zeros(3)), random_state(rng, 5),
                              tau=-1.0, rng=rng)

    def test_low_temperature_collapse_to_argmax_branch(self):
        rng = np.random.default_rng(14)
        params = init_skim_unit(rng, 3, 5, 2)
        checked = 0
        while checked < 50:
            state = random_state(rng, 5)
            x = Tensor(rng.uniform(-1, 1, size=3))
            p = decision_probs(params, x, state.h).data
            g = np.array([gumbel_sample(rng), gumbel_sample(rng)])
            gap = math.log(p[0]) + g[0] - math.log(p[1]) - g[1]
            if abs(gap) < 0.05:
                continue
            winner = Decision.READ if gap > 0 else Decision.SKIM
            relaxed = skim_step_relaxed(params, x, state, tau=1e-3, noise=g)
            hard = skim_step_hard(params, x, state, Forced(winner))
            assert np.abs(relaxed.state.h.data - hard.state.h.data).max() <= 1e-6
            assert np.abs(relaxed.state.c.data - hard.state.c.data).max() <= 1e-6
            checked += 1

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(15)
        d_in, d, d_small, seq = 3, 6, 2, 3
        params = init_skim_unit(rng, d_in, d, d_small)
        xs = [rng.uniform(-1, 1, size=d_in) for _ in range(seq)]
        noises = [np.array([gumbel_sample(rng), gumbel_sample(rng)]) for _ in range(seq)]
        tensors = list(params.parameters().values())

        def build_loss():
            state = SkimState.zeros(d)
            total = None
            for t in range(seq):
                out = skim_step_relaxed(params, Tensor(xs[t]), state, tau=1.0,
                                        noise=noises[t])
                state = out.state
                term = state.h.sum()
                total = term if total is None else total + term
            return total + state.c.sum()

        err = assert_grads_close(build_loss, tensors, rtol=1e-4)
        assert err <= 1e-4

    def test_decision_gradient_nonzero(self):
        rng = np.random.default_rng(16)
        params = init_skim_unit(rng, 3, 5, 2)
        state = random_state(rng, 5)
        x = Tensor(rng.uniform(-1, 1, size=3))
        params.decision_w.grad = None
        with Tape():
            out = skim_step_relaxed(params, x, state, tau=1.0,
                                    noise=np.array([0.2, -0.3]))
            backward(out.state.h.sum())
        assert params.decision_w.grad is not None
        assert np.abs(params.decision_w.grad).max() > 0


class TestTemperature:
    def test_at_zero(self):
        assert temperature(TemperatureSchedule(), 0) == 1.0

    def test_closed_form_near_floor(self):
        tau = temperature(TemperatureSchedule(rate=1e-4, floor=0.5), 6931)
        assert abs(tau - 0.5) < 1e-4

    def test_floor(self):
        assert temperature(TemperatureSchedule(), 10 ** 6) == 0.5

    def test_non_increasing(self):
        sched = TemperatureSchedule()
        taus = [temperature(sched, n) for n in range(0, 20000, 500)]
        assert all(a >= b for a, b in zip(taus, taus[1:]))
        assert min(taus) >= 0.5

    def test_negative_step_rejected(self):
        with pytest.raises(ContractError):
            temperature(TemperatureSchedule(), -1)


class TestParamValidation:
    def test_small_width_bound(self):
        rng = np.random.default_rng(17)
        with pytest.raises(ContractError):
            init_skim_unit(rng, 3, 4, 4)

    def test_unit_param_names(self):
        params = init_skim_unit(np.random.default_rng(18), 3, 4, 2)
        assert set(params.parameters()) == {
            "big.w", "big.b", "small.w", "small.b", "decision.w", "decision.b"}
