"""Difficulty scheduling: baseline, naive, mix and combined strategies."""

from dataclasses import dataclass, replace
import logging

log = logging.getLogger(__name__)

STRATEGIES = ("baseline", "naive", "mix", "combined")


@dataclass(frozen=True)
class CurriculumConfig:
    target_length: int
    target_nesting: int = 1
    strategy: str = "combined"
    combined_mix_prob: float = 0.5
    stall_patience: int = 3
    stall_min_delta: float = 0.001

    def __post_init__(self):
        if self.target_length < 1 or self.target_nesting < 1:
            raise ValueError("target length and nesting must be >= 1")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if not 0.0 <= self.combined_mix_prob <= 1.0:
            raise ValueError("combined_mix_prob must lie in [0, 1]")
        if self.stall_patience < 1:
            raise ValueError("stall_patience must be >= 1")


@dataclass(frozen=True)
class CurriculumState:
    current_length: int
    current_nesting: int
    best_val_accuracy: float = -1.0
    evals_since_improvement: int = 0
    reached_target: bool = False

    @property
    def difficulty(self):
        return self.current_length, self.current_nesting


def initial_state(config: CurriculumConfig) -> CurriculumState:
    """Curriculum strategies start at (1, 1); the others train on the target from the first step."""
    if config.strategy in ("naive", "combined"):
        at_target = (config.target_length, config.target_nesting) == (1, 1)
        return CurriculumState(1, 1, reached_target=at_target)
    return CurriculumState(config.target_length, config.target_nesting, reached_target=True)


def draw_difficulty(config: CurriculumConfig, state: CurriculumState, rng):
    if config.strategy == "baseline":
        return config.target_length, config.target_nesting
    if config.strategy == "naive":
        return state.current_length, state.current_nesting
    if config.strategy == "mix":
        return _mix_draw(config, rng)
    p = config.combined_mix_prob
    # no coin at the extremes, so seeded draws match mix or naive exactly
    if p >= 1.0 or (p > 0.0 and rng.random() < p):
        return _mix_draw(config, rng)
    return state.current_length, state.current_nesting


def _mix_draw(config, rng):
    length = int(rng.integers(1, config.target_length, endpoint=True))
    nesting = int(rng.integers(1, config.target_nesting, endpoint=True))
    return length, nesting


def observe_validation(config: CurriculumConfig, state: CurriculumState, val_accuracy: float, step=None):
    """Record a validation accuracy; advance length (then nesting) after a stall."""
    if not 0.0 <= val_accuracy <= 1.0:
        raise ValueError(f"accuracy must lie in [0, 1], got {val_accuracy}")
    if val_accuracy > state.best_val_accuracy + config.stall_min_delta:
        return replace(state, best_val_accuracy=val_accuracy, evals_since_improvement=0)
    state = replace(state, evals_since_improvement=state.evals_since_improvement + 1)
    if config.strategy not in ("naive", "combined"):
        return state
    if state.evals_since_improvement < config.stall_patience:
        return state
    a, b = config.target_length, config.target_nesting
    length, nesting = state.difficulty
    if (length, nesting) == (a, b):
        return replace(state, reached_target=True)
    if length < a:
        length += 1
    else:
        length, nesting = 1, nesting + 1
    log.info("curriculum advance at step %s: length=%d nesting=%d", step, length, nesting)
    return CurriculumState(
        length,
        nesting,
        best_val_accuracy=-1.0,
        evals_since_improvement=0,
        reached_target=(length, nesting) == (a, b),
    )
