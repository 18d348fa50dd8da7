import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pgae import checkpoint
from pgae.evaluate import describe_accuracy, eval_all_tasks, nrmse, task_names
from pgae.gradcheck import reduced_samples
from pgae.grammar import VOCAB
from pgae.language import target_tokens
from pgae.model import PGAE, ModelConfig
from pgae.pipeline import model_checkpoint, model_from_checkpoint
from pgae.tasks import corpus_word_weights


class TestDescribeAccuracy:
    def test_two_of_three(self):
        truth = [target_tokens(s) for s in ("push red slowly", "pull blue fast", "slide lime quickly")]
        pred = [truth[0], truth[1], target_tokens("slide green quickly")]
        exact, sem = describe_accuracy(pred, truth)
        assert exact == pytest.approx(66.6666667)
        assert round(exact, 2) == 66.67
        assert sem == 100.0

    def test_missing_eos_is_wrong(self):
        truth = [target_tokens("push red slowly")]
        assert describe_accuracy([truth[0][:-1]], truth) == (0.0, 0.0)

    def test_synonym_swap(self):
        truth = [target_tokens("push red slowly")]
        assert describe_accuracy([target_tokens("shove red slowly")], truth) == (0.0, 100.0)

    def test_count_mismatch(self):
        with pytest.raises(ValueError):
            describe_accuracy([[1]], [])


class TestNrmse:
    def test_perfect(self):
        a = np.random.default_rng(0).uniform(-1, 1, (10, 5))
        assert nrmse(a, a, 2.0) == 0.0

    def test_constant_offset(self):
        t = np.zeros((10, 5))
        assert nrmse(t + 0.02, t, 2.0) == pytest.approx(1.0)

    def test_homogeneous(self):
        rng = np.random.default_rng(1)
        t, p = rng.uniform(-1, 1, (2, 8, 5))
        assert nrmse(t + 2 * (p - t), t, 3.0) == pytest.approx(nrmse(p, t, 1.5))

    def test_zero_range(self):
        with pytest.raises(ValueError):
            nrmse(np.zeros(3), np.zeros(3), 0.0)

    @settings(max_examples=40)
    @given(st.integers(0, 10_000), st.floats(1e-4, 0.5))
    def test_noise_never_helps_a_perfect_prediction(self, seed, amp):
        rng = np.random.default_rng(seed)
        t = rng.uniform(-1, 1, (6, 5))
        noisy = t + rng.uniform(-amp, amp, t.shape)
        assert nrmse(noisy, t, 2.0) >= nrmse(t, t, 2.0)

    def test_expected_error_grows_with_amplitude(self):
        rng = np.random.default_rng(3)
        t = rng.uniform(-1, 1, (200, 5))
        p = t + 0.05
        errs = [nrmse(p + rng.uniform(-a, a, t.shape), t, 2.0) for a in (0.0, 0.1, 0.2, 0.4)]
        assert errs == sorted(errs)


@pytest.fixture(scope="module")
def model_and_samples():
    model = PGAE(ModelConfig(hidden=8), seed=2)
    samples = reduced_samples(steps=6, count=4, seed=2)
    return model, samples


class TestEvalAllTasks:
    def test_task_matrix(self, model_and_samples):
        model, samples = model_and_samples
        rep = eval_all_tasks(model, samples)
        assert list(rep.tasks) == [n for n, _, _ in task_names(("self", "opposite"))]
        assert len(rep.tasks) == 6
        for r in rep.tasks.values():
            assert 0 <= r.accuracy <= 100 and 0 <= r.semantic_accuracy <= 100 and r.nrmse >= 0
        single = eval_all_tasks(model, samples, viewpoints=("self",))
        assert list(single.tasks) == ["describe", "repeat-language", "execute", "repeat-action"]

    def test_deterministic_json(self, model_and_samples):
        model, samples = model_and_samples
        a, b = eval_all_tasks(model, samples).to_json(), eval_all_tasks(model, samples).to_json()
        assert a == b
        doc = json.loads(a)
        assert doc["reference"]["single-view"]["describe"] == [93.05, 0.23]

    def test_batch_size_does_not_change_metrics(self, model_and_samples):
        model, samples = model_and_samples
        a = eval_all_tasks(model, samples, batch=64)
        b = eval_all_tasks(model, samples, batch=1)
        for k in a.tasks:
            assert a.tasks[k].accuracy == b.tasks[k].accuracy
            assert a.tasks[k].nrmse == pytest.approx(b.tasks[k].nrmse, rel=1e-9)


class TestCheckpoint:
    def test_round_trip_bit_identical(self, tmp_path, model_and_samples):
        model, samples = model_and_samples
        w = corpus_word_weights(samples)
        ck = model_checkpoint(model, w, {"seed": 2})
        checkpoint.save(tmp_path / "m.ckpt", ck)
        back = checkpoint.load(tmp_path / "m.ckpt")
        assert checkpoint.to_bytes(back) == (tmp_path / "m.ckpt").read_bytes()
        m2, w2, _ = model_from_checkpoint(back)
        np.testing.assert_array_equal(w2, w)
        for k in model.params:
            np.testing.assert_array_equal(m2.params[k], model.params[k])
        assert back.vocab == VOCAB.symbols
        assert eval_all_tasks(m2, samples).to_json() == eval_all_tasks(model, samples).to_json()

    def test_header_layout(self, model_and_samples):
        model, samples = model_and_samples
        data = checkpoint.to_bytes(model_checkpoint(model, corpus_word_weights(samples), {}))
        assert data[:4] == b"PGAE"
        assert struct.unpack("<I", data[4:8])[0] == 1
        n = struct.unpack("<I", data[8:12])[0]
        cfg = json.loads(data[12 : 12 + n])
        assert cfg["gate_input_order"] == "action,language"
        assert list(cfg) == sorted(cfg)

    def test_float32_round_trip(self):
        ck = checkpoint.Checkpoint({"a": 1}, {"x": np.array([0.1, 3.0], dtype=np.float32)})
        back = checkpoint.from_bytes(checkpoint.to_bytes(ck))
        np.testing.assert_array_equal(back.tensors["x"].astype(np.float32), ck.tensors["x"])

    @pytest.mark.parametrize("mutate", [lambda d: b"XXXX" + d[4:], lambda d: d[:4] + struct.pack("<I", 9) + d[8:], lambda d: d[:-5]])
    def test_corrupt(self, mutate):
        data = checkpoint.to_bytes(checkpoint.Checkpoint({}, {"x": np.ones(3)}, ["a"], np.ones(2)))
        with pytest.raises(checkpoint.CheckpointError):
            checkpoint.from_bytes(mutate(data))
