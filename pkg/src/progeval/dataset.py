"""Line-delimited JSON datasets: one record per sample."""

import json

from .progsynth import Sample
from .seeding import derive_seed, make_rng
from .taskgen import make_sample

FIELDS = ("task", "code", "target", "length", "nesting", "split", "seed")


def record(sample: Sample, seed: int):
    return {
        "task": sample.task,
        "code": sample.code,
        "target": sample.target,
        "length": sample.length,
        "nesting": sample.nesting,
        "split": sample.split,
        "seed": seed,
    }


def generate_records(task, length, nesting, count, seed, reverse=False, double=False):
    """Sample ``i`` is drawn from its own stream seeded by ``derive_seed(seed, i)``."""
    for i in range(count):
        sample_seed = derive_seed(seed, i)
        sample = make_sample(task, length, nesting, make_rng(sample_seed), reverse, double)
        yield record(sample, sample_seed)


def write_jsonl(path, records):
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
            n += 1
    return n


def read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: {exc.msg}") from None


def to_sample(rec) -> Sample:
    return Sample(rec["code"], rec["target"], rec["length"], rec["nesting"], rec["split"], rec.get("task", "program"))
