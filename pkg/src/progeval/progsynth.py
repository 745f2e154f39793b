"""Random programs from the restricted subclass, with exact targets.

Programs are assembled bottom-up on a stack.  Each round picks one operation;
each operand slot either pops a previously built fragment (fair coin, if the
stack is non-empty) or takes a fresh literal.  A fragment carries its value,
the statements it needs, and the expression that names it, so the value is
known exactly without ever running the program.  Whatever is left on the stack
after the final pop is discarded whole, which is why no statement is ever dead.
"""

from dataclasses import dataclass, field

from . import encode
from .seeding import fnv1a_64, make_rng

SPLITS = ("train", "validation", "test")
VARIABLE_NAMES = "abcdefghij"
LOOP_VARIABLE = "x"

# One program-building round per unit of nesting picks one of these.
# "constant" pushes a bare literal, the shape behind listings like print(6652).
OPERATIONS = ("constant", "add", "sub", "mul", "if", "for", "assign")


@dataclass(frozen=True)
class GenConfig:
    length: int
    nesting: int
    seed: int = 0

    def __post_init__(self):
        if self.length < 1 or self.nesting < 1:
            raise ValueError(f"length and nesting must be >= 1, got {self.length}, {self.nesting}")
        if self.nesting > len(VARIABLE_NAMES):
            raise ValueError(f"nesting above {len(VARIABLE_NAMES)} would run out of variable names")
        if self.length > 18:
            raise ValueError("length above 18 is not supported")


@dataclass
class StackEntry:
    value: int
    statements: list = field(default_factory=list)
    expr: str = ""


@dataclass(frozen=True)
class Sample:
    code: str
    target: str
    length: int
    nesting: int
    split: str
    task: str = "program"


def assign_split(code: str) -> str:
    """train / validation / test from the 64-bit FNV-1a hash of the code, mod 3."""
    if not code:
        raise ValueError("cannot assign a split to empty code")
    return SPLITS[fnv1a_64(code.encode("utf-8")) % 3]


class _Builder:
    def __init__(self, config, rng):
        self.length = config.length
        self.rng = rng
        self.names = list(VARIABLE_NAMES)

    def coin(self):
        return self.rng.random() > 0.5

    def uniform(self, lo, hi):
        return int(self.rng.integers(lo, hi, endpoint=True))

    def fresh_name(self):
        return self.names.pop(self.uniform(0, len(self.names) - 1))

    def literal(self):
        value = self.uniform(1, 10**self.length)
        return StackEntry(value, [], str(value))

    def small(self):
        return self.uniform(1, 4 * self.length)

    def operand(self, stack):
        if stack and self.coin():
            return stack.pop()
        return self.literal()

    def build(self, op, stack):
        if op == "constant":
            return self.literal()
        if op in ("add", "sub"):
            a = self.operand(stack)
            b = self.operand(stack)
            sign = "+" if op == "add" else "-"
            value = a.value + b.value if op == "add" else a.value - b.value
            return StackEntry(value, a.statements + b.statements, f"({a.expr}{sign}{b.expr})")
        if op == "mul":
            left_small = self.coin()
            other = self.operand(stack)
            k = self.small()
            expr = f"({k}*{other.expr})" if left_small else f"({other.expr}*{k})"
            return StackEntry(k * other.value, other.statements, expr)
        if op == "if":
            a = self.operand(stack)
            b = self.operand(stack)
            c1 = self.operand(stack)
            c2 = self.operand(stack)
            cmp = "<" if self.coin() else ">"
            chosen = c1.value < c2.value if cmp == "<" else c1.value > c2.value
            return StackEntry(
                a.value if chosen else b.value,
                a.statements + b.statements + c1.statements + c2.statements,
                f"({a.expr} if {c1.expr}{cmp}{c2.expr} else {b.expr})",
            )
        if op == "for":
            init = self.operand(stack)
            step = self.operand(stack)
            reps = self.small()
            sign = "+" if self.coin() else "-"
            name = self.fresh_name()
            loop = f"for {LOOP_VARIABLE} in range({reps}):\n  {name}{sign}={step.expr}"
            value = init.value + reps * step.value if sign == "+" else init.value - reps * step.value
            return StackEntry(value, init.statements + step.statements + [f"{name}={init.expr}", loop], name)
        if op == "assign":
            a = self.operand(stack)
            name = self.fresh_name()
            return StackEntry(a.value, a.statements + [f"{name}={a.expr}"], name)
        raise ValueError(f"unknown operation {op!r}")


def build_program(config: GenConfig, rng) -> StackEntry:
    """Run the stack construction and return the printed fragment."""
    builder = _Builder(config, rng)
    stack = []
    for _ in range(config.nesting):
        op = OPERATIONS[builder.uniform(0, len(OPERATIONS) - 1)]
        stack.append(builder.build(op, stack))
    return stack.pop()


def generate(config: GenConfig, rng=None) -> Sample:
    if rng is None:
        rng = make_rng(config.seed)
    entry = build_program(config, rng)
    code = "\n".join(entry.statements + [f"print({entry.expr})"]) + encode.END
    return Sample(code, encode.render_target(entry.value), config.length, config.nesting, assign_split(code))


def scramble(code: str, permutation: dict) -> str:
    """Substitute characters through ``permutation``, a bijection on the input alphabet."""
    alphabet = set(encode.INPUT_ALPHABET)
    if set(permutation) != alphabet or set(permutation.values()) != alphabet:
        raise ValueError("permutation must be a bijection on the full input alphabet")
    return "".join(permutation[c] for c in code)


def invert(permutation: dict) -> dict:
    return {v: k for k, v in permutation.items()}


def demo_permutation(seed=0) -> dict:
    """Shuffle every input character except newline, so scrambled code keeps its lines."""
    chars = [c for c in encode.INPUT_ALPHABET if c != "\n"]
    shuffled = list(make_rng(seed).permutation(chars))
    perm = dict(zip(chars, shuffled))
    perm["\n"] = "\n"
    return perm
