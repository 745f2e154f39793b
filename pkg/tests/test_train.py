import math

import numpy as np
import pytest

from progeval import lstm, train
from progeval.curriculum import CurriculumConfig
from progeval.encode import Vocabulary
from progeval.progsynth import GenConfig, Sample, generate
from progeval.seeding import make_rng
from progeval.taskgen import gen_memorize, MemorizeConfig
from progeval.train import LrSchedule, TrainConfig, clip_gradients, global_norm, teacher_forced_accuracy


def _grads(norm, minibatch, seed=0):
    rng = make_rng(seed)
    g = {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=5)}
    scale = norm * minibatch / global_norm(g)
    return {k: v * scale for k, v in g.items()}


def test_clip_scales_by_half():
    g = _grads(10.0, 20)
    out = clip_gradients(g, 5.0, 20)
    for k in g:
        assert np.allclose(out[k], 0.5 * g[k])


def test_clip_leaves_small_norm():
    g = _grads(3.0, 20)
    out = clip_gradients(g, 5.0, 20)
    for k in g:
        assert np.array_equal(out[k], g[k])


def test_clip_bound_on_random_gradients():
    rng = make_rng(1)
    for k in range(1000):
        minibatch = int(rng.integers(1, 200))
        g = {"w": rng.normal(size=(4, 4)) * rng.exponential(50), "b": rng.normal(size=3)}
        assert global_norm(clip_gradients(g, 5.0, minibatch)) / minibatch <= 5.0 + 1e-9


def test_lr_trace():
    schedule = LrSchedule(0.5, 0.8, 0.001)
    trace = [schedule.lr]
    assert schedule.observe(False, 0.1) == 0.5
    trace.append(schedule.observe(True, 0.2))
    while trace[-1] >= 0.001:
        trace.append(schedule.observe(True, 0.2))
    assert trace[:3] == pytest.approx([0.5, 0.4, 0.32])
    assert len(trace) - 1 == 28
    assert all(b == pytest.approx(a * 0.8) for a, b in zip(trace, trace[1:]))
    assert 0.5 * 0.8**27 >= 0.001 > 0.5 * 0.8**28


def test_lr_holds_while_improving():
    schedule = LrSchedule(0.5, 0.8, 0.001)
    schedule.observe(True, 0.5)
    for k in range(10):
        assert schedule.observe(True, 0.6 + 0.01 * k) == pytest.approx(0.4)


class _Oracle:
    """Knows every sample, so it can emit the true next character."""

    def __init__(self, samples, vocab):
        self.vocab = vocab
        self.text = {s.code + s.target: s for s in samples}

    def logits(self, tokens):
        out = np.zeros((*tokens.shape, self.vocab.n_out))
        for k, row in enumerate(tokens):
            seen = self.vocab.decode(row)
            full = next(t for t in self.text if t.startswith(seen) and len(t) == len(seen) + 1)
            for t in range(len(seen)):
                nxt = full[t + 1]
                if nxt in self.vocab.out_to_id:
                    out[k, t, self.vocab.out_to_id[nxt]] = 1.0
        return out


def test_oracle_scores_one():
    vocab = Vocabulary.for_task("memorize")
    samples = [Sample("7.", "7.", 1, 1, "test", "memorize")] + [
        gen_memorize(MemorizeConfig(4), make_rng(2, i)) for i in range(20)
    ]
    assert teacher_forced_accuracy(_Oracle(samples, vocab), samples, vocab) == (1.0, 1.0)


@pytest.mark.parametrize("task,n_out", [("program", 12), ("memorize", 11)])
def test_random_predictor(task, n_out):
    vocab = Vocabulary.for_task(task)
    rng = make_rng(3)
    if task == "program":
        samples = [generate(GenConfig(4, 2), rng) for _ in range(3000)]
    else:
        samples = [gen_memorize(MemorizeConfig(6), rng) for _ in range(3000)]
    char, _ = teacher_forced_accuracy(train.UniformRandomPredictor(n_out, 4), samples, vocab)
    assert abs(char - 1 / n_out) < 0.015


def test_untrained_model_accuracy():
    vocab = Vocabulary()
    config = lstm.LstmConfig(2, 32, vocab.n_in, vocab.n_out)
    model = lstm.LstmModel(config, lstm.init_params(config, make_rng(5)))
    rng = make_rng(6)
    samples = [generate(GenConfig(4, 2), rng) for _ in range(1000)]
    char, _ = teacher_forced_accuracy(model, samples, vocab)
    assert 0.05 <= char <= 0.13


def _tiny_run(task="memorize", length=1, **overrides):
    vocab = Vocabulary.for_task(task)
    settings = dict(minibatch=10, window=20, eval_interval=5, eval_samples=20, test_samples=20, seed=7)
    settings.update(overrides)
    return train.run(
        TrainConfig(**settings),
        lstm.LstmConfig(1, 8, vocab.n_in, vocab.n_out),
        CurriculumConfig(length, 1, "combined"),
        task,
    )


def test_memorize_budget():
    result = _tiny_run(epoch_size=1000, max_epochs=2)
    assert result.samples == 2000
    assert result.stop_reason == "data budget spent"


def test_step_cap_and_log():
    result = _tiny_run(task="program", length=2, max_steps=12)
    assert result.steps == 12 and result.stop_reason == "step cap"
    assert [r.step for r in result.log] == [5, 10, 12]
    lrs = [r.learning_rate for r in result.log]
    assert all(a >= b for a, b in zip(lrs, lrs[1:]))


def test_runs_are_deterministic():
    a = _tiny_run(task="addition", length=2, max_steps=15)
    b = _tiny_run(task="addition", length=2, max_steps=15)
    assert [train.row_dict(r) for r in a.log] == [train.row_dict(r) for r in b.log]
    assert a.test_char_accuracy == b.test_char_accuracy


def test_loss_decreases():
    vocab = Vocabulary.for_task("memorize")
    result = train.run(
        TrainConfig(minibatch=8, window=20, eval_interval=50, eval_samples=50, test_samples=50, max_steps=500),
        lstm.LstmConfig(1, 16, vocab.n_in, vocab.n_out),
        CurriculumConfig(2, 1, "baseline"),
        "memorize",
    )
    assert result.log[-1].train_loss < result.log[0].train_loss
    assert result.log[0].train_loss < math.log(11)


def test_vocabulary_mismatch():
    with pytest.raises(ValueError):
        train.run(TrainConfig(), lstm.LstmConfig(1, 4, 10, 12), CurriculumConfig(2), "program")
    with pytest.raises(ValueError):
        train.run(TrainConfig(), lstm.LstmConfig(1, 4, 10, 12), CurriculumConfig(2, 2), "addition")


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(lr_decay=1.5)
    with pytest.raises(ValueError):
        TrainConfig(minibatch=0)
