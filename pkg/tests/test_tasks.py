import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pgae.grammar import VOCAB, Signal
from pgae.tasks import Sample, act_loss, build_task_io, corpus_word_weights, lang_loss, total_loss, word_weights


def sample(M=6, desc="pull crimson fast", seed=0):
    rng = np.random.default_rng(seed)
    j = rng.uniform(-1, 1, size=(M, 5))
    feats = {vp: rng.normal(size=(M, 30)) for vp in ("self", "opposite")}
    return Sample("s000", desc, j, feats, action=3)


class TestBuildTaskIO:
    def test_describe(self):
        s = sample()
        io = build_task_io(s, Signal.DESCRIBE)
        assert io.lang_in == [VOCAB.signal_id(Signal.DESCRIBE), VOCAB.eos]
        assert len(io.act_in) == 6
        assert io.lang_target == [VOCAB["pull"], VOCAB["crimson"], VOCAB["fast"], VOCAB.eos]
        np.testing.assert_array_equal(io.act_target, np.repeat(s.joints[-1:], 5, axis=0))

    def test_execute(self):
        s = sample()
        io = build_task_io(s, Signal.EXECUTE)
        assert len(io.act_in) == 1
        assert io.lang_in[1:-1] == [VOCAB["pull"], VOCAB["crimson"], VOCAB["fast"]]
        assert io.lang_target == [VOCAB.eos]
        np.testing.assert_array_equal(io.act_target, s.joints[1:])

    def test_repeat_action(self):
        s = sample()
        io = build_task_io(s, Signal.REPEAT_ACTION)
        assert len(io.act_in) == 6 and io.lang_in == [VOCAB.signal_id(Signal.REPEAT_ACTION), VOCAB.eos]
        assert io.lang_target == [VOCAB.eos]
        np.testing.assert_array_equal(io.act_target, s.joints[1:])

    def test_repeat_language(self):
        s = sample()
        io = build_task_io(s, Signal.REPEAT_LANGUAGE)
        assert len(io.act_in) == 1 and len(io.lang_in) == 5
        np.testing.assert_array_equal(io.act_target, np.repeat(s.joints[:1], 5, axis=0))

    def test_repeat_both(self):
        s = sample()
        io = build_task_io(s, Signal.REPEAT_BOTH)
        assert len(io.act_in) == 6 and len(io.lang_in) == 5 and len(io.lang_target) == 4

    def test_act_input_rows_are_vis_then_joints(self):
        s = sample()
        io = build_task_io(s, Signal.REPEAT_ACTION, viewpoint="opposite")
        np.testing.assert_array_equal(io.act_in[:, :30], s.features["opposite"])
        np.testing.assert_array_equal(io.act_in[:, 30:], s.joints)
        np.testing.assert_array_equal(io.dec_vis, s.features["opposite"][:-1])
        np.testing.assert_array_equal(io.j1, s.joints[0])

    def test_missing_description_names_signal(self):
        s = sample(desc="")
        with pytest.raises(ValueError, match="execute"):
            build_task_io(s, Signal.EXECUTE)
        build_task_io(s, Signal.REPEAT_ACTION)

    def test_missing_view(self):
        s = sample()
        del s.features["opposite"]
        with pytest.raises(ValueError, match="opposite"):
            build_task_io(s, Signal.DESCRIBE, viewpoint="opposite")

    def test_total_and_pure(self):
        s = sample()
        before = s.joints.copy()
        for sig in Signal:
            a, b = build_task_io(s, sig), build_task_io(s, sig)
            assert a.lang_in == b.lang_in
            np.testing.assert_array_equal(a.act_target, b.act_target)
            assert a.rollout == 5
        np.testing.assert_array_equal(s.joints, before)


class TestLosses:
    def test_lang_perfect(self):
        probs = np.eye(28)[[3, 7, VOCAB.eos]]
        assert lang_loss([3, 7, VOCAB.eos], probs, np.ones(28)) == 0.0

    def test_lang_uniform_is_log_v(self):
        probs = np.full((1, 28), 1 / 28)
        assert lang_loss([5], probs, np.ones(28)) == pytest.approx(3.3322045, abs=1e-6)

    def test_lang_weight_linear(self):
        probs = np.full((2, 28), 1 / 28)
        w = np.ones(28)
        base = lang_loss([4, 9], probs, w)
        w[4] = 2.0
        assert lang_loss([4, 9], probs, w) == pytest.approx(1.5 * base)

    def test_lang_count_mismatch(self):
        with pytest.raises(ValueError):
            lang_loss([1, 2], np.full((1, 28), 1 / 28), np.ones(28))

    def test_lang_clamps_zero_probability(self):
        probs = np.zeros((1, 28))
        probs[0, 0] = 1.0
        assert lang_loss([1], probs, np.ones(28)) == pytest.approx(-np.log(1e-12))

    def test_act_offset(self):
        t = np.zeros((7, 5))
        p = t.copy()
        p[:, 2] = 0.1
        assert act_loss(t, p) == pytest.approx(0.01)
        assert act_loss(t, t) == 0.0

    def test_act_shape(self):
        with pytest.raises(ValueError):
            act_loss(np.zeros((3, 5)), np.zeros((4, 5)))

    @settings(max_examples=30)
    @given(st.integers(0, 1000))
    def test_act_time_permutation(self, seed):
        rng = np.random.default_rng(seed)
        t, p = rng.normal(size=(2, 9, 5))
        perm = rng.permutation(9)
        assert act_loss(t[perm], p[perm]) == pytest.approx(act_loss(t, p), rel=1e-12)

    def test_total(self):
        assert total_loss(2.0, 0.5) == 2.5
        assert total_loss(2.0, 0.5, 1.0, 0.0) == 2.0

    @settings(max_examples=30)
    @given(st.integers(0, 1000))
    def test_losses_nonnegative(self, seed):
        rng = np.random.default_rng(seed)
        logits = rng.normal(size=(4, 28))
        probs = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
        assert lang_loss(list(rng.integers(0, 28, 4)), probs, rng.uniform(0.1, 10, 28)) > 0


class TestWordWeights:
    def test_uniform_corpus(self):
        np.testing.assert_array_equal(word_weights([list(range(28))]), 1.0)

    def test_double_frequency(self):
        seq = list(range(28)) + [0]
        w = word_weights([seq])
        # total 29; token 0 counted twice -> 29 / 56
        assert w[0] == pytest.approx(29 / 56)
        assert w[1] == pytest.approx(29 / 28)

    def test_rare_token_clamped(self):
        w = word_weights([[0] * 1_000_000 + [1]])
        assert w[1] == 10.0
        assert w[0] == pytest.approx(max(0.1, 1_000_001 / 28e6))

    def test_absent_tokens_get_one(self):
        w = word_weights([[0, 1]])
        assert w[5] == 1.0

    def test_empty(self):
        with pytest.raises(ValueError):
            word_weights([])

    def test_corpus_counts_eos_heavily(self):
        w = corpus_word_weights([sample()])
        assert w[VOCAB.eos] < w[VOCAB["pull"]]
