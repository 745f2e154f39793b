"""Addition and memorization samples, plus a task-agnostic sample factory."""

from dataclasses import dataclass

from . import encode, progsynth
from .progsynth import Sample, assign_split
from .seeding import make_rng

TASKS = ("program", "addition", "memorize")


@dataclass(frozen=True)
class AdditionConfig:
    length: int
    seed: int = 0

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("addition length must be >= 1")


@dataclass(frozen=True)
class MemorizeConfig:
    length: int
    seed: int = 0

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("memorize length must be >= 1")


def addition_sample(a: int, b: int, length=None) -> Sample:
    code = f"print({a}+{b}){encode.END}"
    if length is None:
        length = len(str(a))
    return Sample(code, encode.render_target(a + b), length, 1, assign_split(code), "addition")


def gen_addition(config: AdditionConfig, rng=None) -> Sample:
    """Two operands with exactly ``length`` digits each."""
    if rng is None:
        rng = make_rng(config.seed)
    lo, hi = 10 ** (config.length - 1), 10**config.length - 1
    a = int(rng.integers(lo, hi, endpoint=True))
    b = int(rng.integers(lo, hi, endpoint=True))
    return addition_sample(a, b, config.length)


def memorize_sample(digits: str) -> Sample:
    code = digits + encode.END
    return Sample(code, digits + encode.END, len(digits), 1, assign_split(code), "memorize")


def gen_memorize(config: MemorizeConfig, rng=None) -> Sample:
    if rng is None:
        rng = make_rng(config.seed)
    digits = "".join(map(str, rng.integers(0, 10, size=config.length)))
    return memorize_sample(digits)


def make_sample(task, length, nesting, rng, reverse=False, double=False) -> Sample:
    """One sample of ``task`` at the given difficulty, input transforms applied.

    The split is recomputed from the transformed code, since that is the
    string the network actually reads.
    """
    if task == "program":
        sample = progsynth.generate(progsynth.GenConfig(length, nesting), rng)
    elif task == "addition":
        sample = gen_addition(AdditionConfig(length), rng)
    elif task == "memorize":
        sample = gen_memorize(MemorizeConfig(length), rng)
    else:
        raise ValueError(f"unknown task {task!r}")
    if reverse or double:
        code = encode.transform_input(sample.code, reverse=reverse, double=double)
        sample = Sample(code, sample.target, sample.length, sample.nesting, assign_split(code), sample.task)
    return sample


def draw_from_split(task, length, nesting, split, rng, reverse=False, double=False, max_tries=10_000):
    """Rejection-sample until the hash puts the sample in ``split``."""
    for _ in range(max_tries):
        sample = make_sample(task, length, nesting, rng, reverse, double)
        if sample.split == split:
            return sample
    raise RuntimeError(f"no {split} sample found for {task} at length={length}, nesting={nesting}")
