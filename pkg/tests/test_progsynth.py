import re
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from progeval import interp, progsynth
from progeval.encode import INPUT_ALPHABET
from progeval.progsynth import GenConfig, Sample, assign_split, generate, scramble
from progeval.seeding import fnv1a_64, make_rng


class ScriptedRng:
    """Stands in for a numpy Generator, replaying fixed draws in order."""

    def __init__(self, integers, randoms=()):
        self._ints = list(integers)
        self._floats = list(randoms)

    def integers(self, lo, hi, endpoint=False):
        value = self._ints.pop(0)
        top = hi if endpoint else hi - 1
        assert lo <= value <= top, (lo, value, top)
        return value

    def random(self):
        return self._floats.pop(0)


def _target_value(sample):
    return int(sample.target[:-1])


def test_worked_example_target():
    code = "j=8584\nfor x in range(8):\n  j+=920\nb=(1500+j)\nprint((b+7567))."
    assert interp.run(code) == 25011
    assert Sample(code, "25011.", 4, 3, assign_split(code)).target == "25011."


def test_forced_constant_program():
    rng = ScriptedRng([progsynth.OPERATIONS.index("constant"), 7])
    sample = generate(GenConfig(1, 1), rng)
    assert sample.code == "print(7)."
    assert sample.target == "7."


def test_forced_loop_shape():
    # op=for; init literal 12, step literal 3, 5 repeats, '-', name index 0 -> 'a'
    rng = ScriptedRng([progsynth.OPERATIONS.index("for"), 12, 3, 5, 0], randoms=[0.2])
    sample = generate(GenConfig(2, 1), rng)
    assert sample.code == "a=12\nfor x in range(5):\n  a-=3\nprint(a)."
    assert sample.target == "-3."


def test_oracle_agreement_length4_nesting1():
    rng = make_rng(11)
    for _ in range(10_000):
        s = generate(GenConfig(4, 1), rng)
        assert interp.run(s.code) == _target_value(s)


@pytest.mark.parametrize("length,nesting", [(1, 1), (2, 3), (3, 2), (4, 3), (6, 3)])
def test_oracle_agreement_grid(length, nesting):
    rng = make_rng(length, nesting)
    for _ in range(2000):
        s = generate(GenConfig(length, nesting), rng)
        assert interp.run(s.code) == _target_value(s)


def test_invalid_config():
    with pytest.raises(ValueError):
        GenConfig(0, 1)
    with pytest.raises(ValueError):
        GenConfig(1, 0)


def _assigned_and_read(code):
    body = code[:-1]
    assigned = set(re.findall(r"^([a-j])=", body, re.M))
    reads = Counter()
    for line in body.split("\n"):
        rhs = line.split("=", 1)[1] if re.match(r"^[a-j]=", line) else line
        rhs = re.sub(r"^\s*[a-j][+-]=", "", rhs)
        reads.update(re.findall(r"\b([a-j])\b", rhs))
    return assigned, reads


@pytest.mark.parametrize("nesting", [1, 2, 3, 4])
def test_no_dead_code(nesting):
    rng = make_rng(5, nesting)
    for _ in range(1500):
        s = generate(GenConfig(3, nesting), rng)
        assigned, reads = _assigned_and_read(s.code)
        for name in assigned:
            assert reads[name] >= 1, s.code


@pytest.mark.parametrize("nesting", [1, 2, 3, 4])
def test_loops_are_flat_and_bounded(nesting):
    rng = make_rng(6, nesting)
    for _ in range(1500):
        code = generate(GenConfig(2, nesting), rng).code
        lines = code.split("\n")
        fors = [i for i, line in enumerate(lines) if line.startswith("for ")]
        assert len(fors) <= nesting
        for i in fors:
            body = lines[i + 1]
            assert re.fullmatch(r"  [a-j][+-]=.*", body)
            assert "for " not in body


@pytest.mark.parametrize("length", [1, 2, 4])
def test_literal_magnitudes(length):
    rng = make_rng(7, length)
    for _ in range(2000):
        code = generate(GenConfig(length, 3), rng).code
        for r in re.findall(r"range\((\d+)\)", code):
            assert 1 <= int(r) <= 4 * length
        for m in re.finditer(r"\*", code):
            left = re.search(r"\((\d+)$", code[: m.start()])
            right = re.match(r"(\d+)\)", code[m.end() :])
            small = [int(g.group(1)) for g in (left, right) if g and int(g.group(1)) <= 4 * length]
            assert small, code
        for lit in re.findall(r"\d+", code):
            assert 1 <= int(lit) <= 10**length


def test_print_is_last_and_marker_terminates():
    rng = make_rng(8)
    for _ in range(500):
        code = generate(GenConfig(3, 3), rng).code
        assert code.endswith(").")
        assert code.count("print(") == 1
        assert code.split("\n")[-1].startswith("print(")


def test_seed_reproducible():
    a = [generate(GenConfig(4, 2, seed=s)) for s in range(50)]
    b = [generate(GenConfig(4, 2, seed=s)) for s in range(50)]
    assert a == b


def test_fnv1a_reference_vectors():
    assert fnv1a_64(b"") == 0xCBF29CE484222325
    assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a_64(b"foobar") == 0x85944171F73967E8


def test_split_deterministic_and_exclusive():
    code = "print((5997-738))."
    assert assign_split(code) == assign_split(code)
    assert assign_split(code) in progsynth.SPLITS
    with pytest.raises(ValueError):
        assign_split("")


def test_split_fractions():
    rng = make_rng(9)
    codes = set()
    while len(codes) < 30_000:
        codes.add(generate(GenConfig(4, 2), rng).code)
    counts = Counter(assign_split(c) for c in codes)
    for split in progsynth.SPLITS:
        assert 0.30 <= counts[split] / len(codes) <= 0.37


def test_scramble_identity_and_roundtrip():
    identity = {c: c for c in INPUT_ALPHABET}
    perm = progsynth.demo_permutation(3)
    inverse = progsynth.invert(perm)
    rng = make_rng(10)
    for _ in range(1000):
        code = generate(GenConfig(4, 3), rng).code
        assert scramble(code, identity) == code
        scrambled = scramble(code, perm)
        assert len(scrambled) == len(code)
        assert scramble(scrambled, inverse) == code


def test_scramble_changes_text():
    code = "j=8584\nfor x in range(8):\n  j+=920\nb=(1500+j)\nprint((b+7567))."
    assert scramble(code, progsynth.demo_permutation(0)) != code


def test_scramble_rejects_non_bijection():
    perm = {c: c for c in INPUT_ALPHABET}
    perm["a"] = "b"
    with pytest.raises(ValueError):
        scramble("a", perm)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**63 - 1), length=st.integers(1, 6), nesting=st.integers(1, 4))
def test_generated_target_matches_interpreter(seed, length, nesting):
    s = generate(GenConfig(length, nesting, seed=seed))
    assert s.target == f"{interp.run(s.code)}."
    assert s.split == assign_split(s.code)
    assert np.all([c in INPUT_ALPHABET for c in s.code])
