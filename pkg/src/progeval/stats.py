"""Output-character statistics of generated targets.

Position classes, over each target with its end marker removed:

* ``all``          every character
* ``first``        the first character
* ``interior``     characters strictly between the first and the last
* ``pre_terminal`` the character right before the end marker
"""

from collections import Counter
from dataclasses import dataclass, field

from .encode import END, MEMORIZE_OUTPUTS, PROGRAM_OUTPUTS

POSITION_CLASSES = ("all", "first", "interior", "pre_terminal")


@dataclass
class CharDistribution:
    counts: dict = field(default_factory=lambda: {k: Counter() for k in POSITION_CLASSES})
    total_samples: int = 0

    def merge(self, other: "CharDistribution") -> "CharDistribution":
        out = CharDistribution(total_samples=self.total_samples + other.total_samples)
        for k in POSITION_CLASSES:
            out.counts[k] = self.counts[k] + other.counts[k]
        return out

    def frequency(self, position, char):
        total = sum(self.counts[position].values())
        return self.counts[position][char] / total if total else 0.0

    def frequencies(self, position):
        total = sum(self.counts[position].values())
        return {c: n / total for c, n in sorted(self.counts[position].items())} if total else {}

    def top(self, position, k=3):
        total = sum(self.counts[position].values())
        return [(c, n / total) for c, n in self.counts[position].most_common(k)]


def analyze(samples) -> CharDistribution:
    dist = CharDistribution()
    for s in samples:
        body = s.target[:-1] if s.target.endswith(END) else s.target
        if not body:
            continue
        dist.total_samples += 1
        dist.counts["all"].update(body)
        dist.counts["first"][body[0]] += 1
        dist.counts["pre_terminal"][body[-1]] += 1
        dist.counts["interior"].update(body[1:-1])
    if dist.total_samples == 0:
        raise ValueError("no targets to analyze")
    return dist


def guess_baselines():
    """Accuracy of a uniform guess over the program and memorization output symbols."""
    return {"program": 1 / len(PROGRAM_OUTPUTS), "memorize": 1 / len(MEMORIZE_OUTPUTS)}


def format_report(dist: CharDistribution) -> str:
    lines = [f"samples: {dist.total_samples}"]
    for position in POSITION_CLASSES:
        top = ", ".join(f"{c!r} {p:.3f}" for c, p in dist.top(position))
        lines.append(f"{position:>12}: {top}")
    base = guess_baselines()
    lines.append(f"uniform guess: 1/12 = {base['program']:.4f}, 1/11 = {base['memorize']:.4f}")
    return "\n".join(lines)


def to_rows(dist: CharDistribution):
    """``(position, char, count, frequency)`` rows for CSV export."""
    rows = []
    for position in POSITION_CLASSES:
        total = sum(dist.counts[position].values())
        for char, n in sorted(dist.counts[position].items()):
            rows.append((position, char, n, n / total))
    return rows
