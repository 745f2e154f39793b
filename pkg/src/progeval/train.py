"""SGD training with gradient clipping, hidden-state carryover and teacher-forced evaluation."""

from dataclasses import dataclass, field, fields, asdict
import logging
import math
import os
import time

import numpy as np

from . import curriculum as cur
from . import lstm
from .encode import LaneStream, Vocabulary, sample_arrays
from .seeding import make_rng
from .taskgen import TASKS, draw_from_split

log = logging.getLogger(__name__)

# stream ids for make_rng(seed, ...)
_MODEL, _DATA, _CURRICULUM, _VALIDATION, _TEST = range(5)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    minibatch: int = 100
    window: int = 50
    lr0: float = 0.5
    lr_decay: float = 0.8
    clip_norm: float = 5.0
    target_accuracy: float = 0.95
    lr_floor: float = 0.001
    max_epochs: int = 20
    epoch_size: int = 500_000
    eval_interval: int = 100
    eval_samples: int = 200
    test_samples: int = 1000
    max_steps: int | None = None
    seed: int = 0

    def __post_init__(self):
        for name in ("minibatch", "window", "max_epochs", "epoch_size", "eval_interval", "eval_samples"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.lr_decay < 1.0:
            raise ValueError("lr_decay must lie in (0, 1)")
        if not 0.0 < self.target_accuracy <= 1.0:
            raise ValueError("target_accuracy must lie in (0, 1]")
        if self.lr0 <= 0 or self.clip_norm <= 0 or self.lr_floor <= 0:
            raise ValueError("lr0, clip_norm and lr_floor must be positive")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be positive")


@dataclass
class TrainLogRow:
    step: int
    epoch: int
    length: int
    nesting: int
    learning_rate: float
    train_loss: float
    train_char_accuracy: float
    val_char_accuracy: float
    val_seq_accuracy: float
    curriculum_val_accuracy: float
    samples: int
    wall_time: float = field(default=0.0, compare=False)


LOG_COLUMNS = [f.name for f in fields(TrainLogRow) if f.name != "wall_time"]


@dataclass
class TrainResult:
    params: dict
    log: list
    curriculum: cur.CurriculumState
    test_char_accuracy: float
    test_seq_accuracy: float
    stop_reason: str
    steps: int
    samples: int


def global_norm(grads):
    return math.sqrt(sum(float(np.vdot(g, g)) for g in grads.values()))


def clip_gradients(grads, clip_norm, minibatch):
    """Rescale so the minibatch-normalized gradient has global norm at most ``clip_norm``."""
    if clip_norm <= 0:
        raise ValueError("clip_norm must be positive")
    norm = global_norm(grads) / minibatch
    if norm <= clip_norm:
        return grads
    scale = clip_norm / norm
    return {k: g * scale for k, g in grads.items()}


class UniformRandomPredictor:
    """Scores each output symbol at random, so its argmax is a uniform guess."""

    def __init__(self, n_out, seed=0):
        self.n_out = n_out
        self.rng = make_rng(seed)

    def logits(self, tokens):
        return self.rng.random((*np.shape(tokens), self.n_out))


class LrSchedule:
    """Multiplicative decay: once on reaching the goal at the target difficulty, then on every stall."""

    def __init__(self, lr0, decay, min_delta):
        self.lr = lr0
        self.decay = decay
        self.min_delta = min_delta
        self.decaying = False
        self._prev = None

    def observe(self, at_goal, train_accuracy):
        if not self.decaying:
            if at_goal:
                self.decaying = True
                self.lr *= self.decay
        elif self._prev is not None and train_accuracy - self._prev < self.min_delta:
            self.lr *= self.decay
        self._prev = train_accuracy
        return self.lr


def _eval_batches(samples, vocab, batch_size):
    for start in range(0, len(samples), batch_size):
        chunk = samples[start : start + batch_size]
        arrays = [sample_arrays(s, vocab) for s in chunk]
        width = max(len(ids) for ids, _ in arrays) - 1
        tokens = np.full((len(chunk), width), vocab.pad_id, dtype=np.int64)
        labels = np.full((len(chunk), width), -1, dtype=np.int64)
        for k, ((ids, flags), s) in enumerate(zip(arrays, chunk)):
            tokens[k, : len(ids) - 1] = ids[:-1]
            start_t = len(s.code) - 1
            labels[k, start_t : start_t + len(s.target)] = vocab.encode_target(s.target)
        yield tokens, labels


def teacher_forced_accuracy(model, samples, vocab, batch_size=256):
    """Character and whole-sequence accuracy, fed the true prefix at every target position.

    Each sample is scored from a zero state.  ``model`` needs a
    ``logits(tokens)`` method mapping ``(batch, T)`` ids to ``(batch, T, n_out)``.
    """
    if not samples:
        raise ValueError("no samples to evaluate")
    correct = total = seq_ok = 0
    for tokens, labels in _eval_batches(list(samples), vocab, batch_size):
        pred = np.argmax(model.logits(tokens), axis=-1)
        scored = labels >= 0
        hit = (pred == labels) & scored
        correct += int(hit.sum())
        total += int(scored.sum())
        seq_ok += int(np.all(hit | ~scored, axis=1).sum())
    return correct / total, seq_ok / len(samples)


def _heldout(task, length, nesting, split, count, seed, stream, reverse, double):
    rng = make_rng(seed, stream, length, nesting)
    return [draw_from_split(task, length, nesting, split, rng, reverse, double) for _ in range(count)]


def run(
    train_config: TrainConfig,
    lstm_config: lstm.LstmConfig,
    curriculum_config: cur.CurriculumConfig,
    task="program",
    reverse=False,
    double=False,
    checkpoint_dir=None,
    on_row=None,
):
    """Train on a fresh sample stream until the stopping rule fires.

    Program and addition runs stop once the learning rate falls below
    ``lr_floor``; memorization runs stop after ``max_epochs * epoch_size``
    samples.  ``max_steps`` caps either.
    """
    if task not in TASKS:
        raise ValueError(f"task must be one of {TASKS}")
    tc, cc = train_config, curriculum_config
    if task != "program" and cc.target_nesting != 1:
        raise ValueError(f"{task} has no nesting; target nesting must be 1")
    vocab = Vocabulary.for_task(task)
    if (lstm_config.vocab_in, lstm_config.vocab_out) != (vocab.n_in, vocab.n_out):
        raise ValueError(
            f"model vocabulary ({lstm_config.vocab_in}, {lstm_config.vocab_out}) does not match "
            f"{task} vocabulary ({vocab.n_in}, {vocab.n_out})"
        )

    params = lstm.init_params(lstm_config, make_rng(tc.seed, _MODEL))
    model = lstm.LstmModel(lstm_config, params)
    data_rng = make_rng(tc.seed, _DATA)
    curriculum_rng = make_rng(tc.seed, _CURRICULUM)
    cstate = cur.initial_state(cc)
    budget = tc.max_epochs * tc.epoch_size if task == "memorize" else None
    consumed = 0

    def source():
        nonlocal consumed
        if budget is not None and consumed >= budget:
            return None
        length, nesting = cur.draw_difficulty(cc, cstate, curriculum_rng)
        consumed += 1
        return draw_from_split(task, length, nesting, "train", data_rng, reverse, double)

    val_cache = {}

    def validation(length, nesting):
        key = (length, nesting)
        if key not in val_cache:
            val_cache[key] = _heldout(task, length, nesting, "validation", tc.eval_samples, tc.seed, _VALIDATION, reverse, double)
        return val_cache[key]

    def save(tag):
        if checkpoint_dir is None:
            return
        os.makedirs(checkpoint_dir, exist_ok=True)
        path = os.path.join(checkpoint_dir, f"{tag}.ckpt")
        lstm.save_checkpoint(path, lstm_config, params, {"step": step, "difficulty": list(cstate.difficulty), "task": task})

    stream = LaneStream(source, vocab, tc.minibatch, tc.window)
    state = lstm.LstmState.zeros(lstm_config, tc.minibatch)
    schedule = LrSchedule(tc.lr0, tc.lr_decay, cc.stall_min_delta)
    lr = schedule.lr
    rows = []
    step = 0
    loss_sum = 0.0
    loss_count = correct = 0
    started = time.perf_counter()
    target = (cc.target_length, cc.target_nesting)
    stop_reason = None

    while stop_reason is None:
        window = stream.next_window()
        if window is None:
            stop_reason = "data budget spent"
            break
        loss, grads, state, logits = lstm.loss_and_grads(params, window, state, reduction="sum")
        if not math.isfinite(loss):
            raise TrainingError(
                f"non-finite loss at step {step}: lr={lr}, difficulty={cstate.difficulty}"
            )
        grads = clip_gradients(grads, tc.clip_norm, tc.minibatch)
        step_size = lr / tc.minibatch
        for name, g in grads.items():
            params[name] -= step_size * g
        step += 1
        mask = window.loss_mask
        loss_sum += loss
        loss_count += int(mask.sum())
        correct += int(((np.argmax(logits, axis=-1) == window.labels) & mask).sum())

        at_eval = step % tc.eval_interval == 0
        hit_cap = tc.max_steps is not None and step >= tc.max_steps
        if not (at_eval or hit_cap):
            continue

        train_acc = correct / loss_count if loss_count else 0.0
        train_loss = loss_sum / loss_count if loss_count else 0.0
        loss_sum, loss_count, correct = 0.0, 0, 0
        val_char, val_seq = teacher_forced_accuracy(model, validation(*target), vocab)
        if cstate.difficulty == target:
            current_acc = val_char
        else:
            current_acc = teacher_forced_accuracy(model, validation(*cstate.difficulty), vocab)[0]
        before = cstate.difficulty
        cstate = cur.observe_validation(cc, cstate, current_acc, step)
        if cstate.difficulty != before:
            save(f"advance-{step:08d}-L{cstate.current_length}-N{cstate.current_nesting}")

        lr = schedule.observe(cstate.reached_target and val_char >= tc.target_accuracy, train_acc)

        row = TrainLogRow(
            step=step,
            epoch=consumed // tc.epoch_size,
            length=before[0],
            nesting=before[1],
            learning_rate=lr,
            train_loss=train_loss,
            train_char_accuracy=train_acc,
            val_char_accuracy=val_char,
            val_seq_accuracy=val_seq,
            curriculum_val_accuracy=current_acc,
            samples=consumed,
            wall_time=time.perf_counter() - started,
        )
        rows.append(row)
        if on_row is not None:
            on_row(row)
        log.info(
            "step %d L=%d N=%d lr=%.4g loss=%.4f train=%.3f val=%.3f",
            step, before[0], before[1], lr, train_loss, train_acc, val_char,
        )
        if task != "memorize" and lr < tc.lr_floor:
            stop_reason = "learning rate below floor"
        elif hit_cap:
            stop_reason = "step cap"

    test = _heldout(task, *target, "test", tc.test_samples, tc.seed, _TEST, reverse, double)
    test_char, test_seq = teacher_forced_accuracy(model, test, vocab)
    save("final")
    return TrainResult(params, rows, cstate, test_char, test_seq, stop_reason, step, consumed)


def row_dict(row: TrainLogRow):
    return {k: v for k, v in asdict(row).items() if k != "wall_time"}
