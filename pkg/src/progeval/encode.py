"""Character vocabulary, target rendering, input transforms and window packing.

A training stream is the concatenation ``code + target`` of consecutive
samples.  The network reads one character per step and, at every position
whose *next* character belongs to a target, is scored on predicting it.  The
code always ends with the end marker, so the first target character is
predicted after reading ``'.'`` and later ones after reading the previous
(correct) target character.
"""

from dataclasses import dataclass
import string

import numpy as np

END = "."
SEPARATOR = ";"

INPUT_ALPHABET = string.digits + string.ascii_lowercase + "+-*=()<>:, \n;" + END
PROGRAM_OUTPUTS = string.digits + "-" + END
MEMORIZE_OUTPUTS = string.digits + END


class EncodingError(ValueError):
    pass


class Vocabulary:
    """Bijection between characters and token ids.

    Input ids cover ``input_alphabet`` plus one padding id (the last).
    Output ids index ``output_alphabet``, the symbols the readout predicts.
    """

    def __init__(self, output_alphabet=PROGRAM_OUTPUTS, input_alphabet=INPUT_ALPHABET):
        if len(set(input_alphabet)) != len(input_alphabet):
            raise ValueError("input alphabet has duplicate characters")
        if len(set(output_alphabet)) != len(output_alphabet):
            raise ValueError("output alphabet has duplicate characters")
        missing = set(output_alphabet) - set(input_alphabet)
        if missing:
            # teacher forcing feeds target characters back in as inputs
            raise ValueError(f"output symbols {sorted(missing)!r} are not input characters")
        self.input_alphabet = input_alphabet
        self.output_alphabet = output_alphabet
        self.char_to_id = {c: i for i, c in enumerate(input_alphabet)}
        self.id_to_char = dict(enumerate(input_alphabet))
        self.out_to_id = {c: i for i, c in enumerate(output_alphabet)}
        self.pad_id = len(input_alphabet)

    @classmethod
    def for_task(cls, task):
        return cls(MEMORIZE_OUTPUTS if task == "memorize" else PROGRAM_OUTPUTS)

    @property
    def n_in(self):
        return len(self.input_alphabet) + 1

    @property
    def n_out(self):
        return len(self.output_alphabet)

    def encode(self, text):
        try:
            return [self.char_to_id[c] for c in text]
        except KeyError as exc:
            raise EncodingError(f"character {exc.args[0]!r} is not in the vocabulary") from None

    def decode(self, ids):
        return "".join(self.id_to_char[int(i)] for i in ids if int(i) != self.pad_id)

    def encode_target(self, text):
        try:
            return [self.out_to_id[c] for c in text]
        except KeyError as exc:
            raise EncodingError(f"target character {exc.args[0]!r} is not an output symbol") from None


def render_target(value: int) -> str:
    return f"{int(value)}{END}"


def _split_marker(code):
    if code.endswith(END):
        return code[:-1], END
    return code, ""


def reverse_input(code: str) -> str:
    """Reverse the payload; a trailing end marker stays at the end."""
    payload, marker = _split_marker(code)
    return payload[::-1] + marker


def double_input(code: str) -> str:
    payload, marker = _split_marker(code)
    return payload + SEPARATOR + payload + marker


def transform_input(code, reverse=False, double=False):
    """Apply doubling, then reversal, in that fixed order."""
    if double:
        code = double_input(code)
    if reverse:
        code = reverse_input(code)
    return code


def sample_arrays(sample, vocab):
    """Token ids of ``code + target`` and the per-character target flags."""
    ids = vocab.encode(sample.code + sample.target)
    vocab.encode_target(sample.target)
    is_target = np.zeros(len(ids), dtype=bool)
    is_target[len(sample.code):] = True
    return np.asarray(ids, dtype=np.int64), is_target


@dataclass
class PackedStream:
    """One unroll window: ``lanes x window`` inputs with next-character labels.

    ``labels`` holds output ids where ``loss_mask`` is true and 0 elsewhere.
    ``resets`` marks the first character of each sample, where the network
    state is zeroed; ``None`` means no resets.
    """

    token_ids: np.ndarray
    labels: np.ndarray
    loss_mask: np.ndarray
    resets: np.ndarray | None = None

    @property
    def lane_count(self):
        return self.token_ids.shape[0]

    @property
    def window(self):
        return self.token_ids.shape[1]


def _labels_for(ids, is_target, vocab):
    """Labels aligned to inputs: position t is scored on character t+1."""
    out_of = np.full(vocab.n_in, -1, dtype=np.int64)
    for c, j in vocab.out_to_id.items():
        out_of[vocab.char_to_id[c]] = j
    nxt = ids[1:]
    mask = is_target[1:].copy()
    labels = np.where(mask, out_of[nxt], 0)
    return labels, mask


def pack(samples, vocab, lanes, window):
    """Pack samples into consecutive windows, sample ``i`` going to lane ``i % lanes``.

    A lane is scored on every character after its first, so a lane stream of
    ``N`` characters contributes ``N - 1`` input positions.  Lane tails are
    filled with the padding id and a false mask.
    """
    if lanes < 1 or window < 1:
        raise ValueError("lanes and window must be positive")
    per_lane = [[] for _ in range(lanes)]
    for i, sample in enumerate(samples):
        per_lane[i % lanes].append(sample_arrays(sample, vocab))

    rows = []
    for parts in per_lane:
        if parts:
            ids = np.concatenate([p[0] for p in parts])
            flags = np.concatenate([p[1] for p in parts])
        else:
            ids = np.zeros(0, dtype=np.int64)
            flags = np.zeros(0, dtype=bool)
        if len(ids) > 1:
            labels, mask = _labels_for(ids, flags, vocab)
            rows.append((ids[:-1], labels, mask, _starts(flags)[:-1]))
        else:
            empty = np.zeros(0, dtype=bool)
            rows.append((ids[:0], np.zeros(0, dtype=np.int64), empty, empty))

    longest = max(len(r[0]) for r in rows)
    n_windows = max(1, -(-longest // window))
    total = n_windows * window
    tokens = np.full((lanes, total), vocab.pad_id, dtype=np.int64)
    labels = np.zeros((lanes, total), dtype=np.int64)
    mask = np.zeros((lanes, total), dtype=bool)
    resets = np.zeros((lanes, total), dtype=bool)
    for k, (x, y, m, r) in enumerate(rows):
        tokens[k, : len(x)] = x
        labels[k, : len(y)] = y
        mask[k, : len(m)] = m
        resets[k, : len(r)] = r
    return [
        PackedStream(
            tokens[:, s : s + window],
            labels[:, s : s + window],
            mask[:, s : s + window],
            resets[:, s : s + window],
        )
        for s in range(0, total, window)
    ]


def _starts(is_target):
    """True at the first character of each sample in a concatenated lane."""
    starts = np.zeros(len(is_target), dtype=bool)
    if len(is_target):
        starts[0] = True
        starts[1:] = is_target[:-1] & ~is_target[1:]
    return starts


def unpack(windows, vocab):
    """Inverse of :func:`pack` per lane: ``(input ids, labels, mask)`` with padding stripped."""
    tokens = np.concatenate([w.token_ids for w in windows], axis=1)
    labels = np.concatenate([w.labels for w in windows], axis=1)
    mask = np.concatenate([w.loss_mask for w in windows], axis=1)
    lanes = []
    for k in range(tokens.shape[0]):
        keep = tokens[k] != vocab.pad_id
        lanes.append((tokens[k][keep], labels[k][keep], mask[k][keep]))
    return lanes


class LaneStream:
    """Endless packing for training: each lane pulls a new sample when it runs dry.

    ``source()`` returns the next sample or ``None`` once the data budget is
    spent; exhausted lanes are padded.  Windows carry on exactly where the
    previous one stopped, so the hidden state can be carried across them.
    """

    def __init__(self, source, vocab, lanes, window):
        self.source = source
        self.vocab = vocab
        self.lanes = lanes
        self.window = window
        self._ids = [np.zeros(0, dtype=np.int64) for _ in range(lanes)]
        self._flags = [np.zeros(0, dtype=bool) for _ in range(lanes)]
        self._starts = [np.zeros(0, dtype=bool) for _ in range(lanes)]
        self.exhausted = False
        self.samples_drawn = 0

    def _fill(self, k):
        need = self.window + 1
        ids_parts, flag_parts, start_parts = [self._ids[k]], [self._flags[k]], [self._starts[k]]
        have = len(self._ids[k])
        while have < need and not self.exhausted:
            sample = self.source()
            if sample is None:
                self.exhausted = True
                break
            self.samples_drawn += 1
            ids, flags = sample_arrays(sample, self.vocab)
            ids_parts.append(ids)
            flag_parts.append(flags)
            start_parts.append(_starts(flags))
            have += len(ids)
        self._ids[k] = np.concatenate(ids_parts)
        self._flags[k] = np.concatenate(flag_parts)
        self._starts[k] = np.concatenate(start_parts)

    def next_window(self):
        """The next :class:`PackedStream`, or ``None`` when every lane is drained."""
        w = self.window
        tokens = np.full((self.lanes, w), self.vocab.pad_id, dtype=np.int64)
        labels = np.zeros((self.lanes, w), dtype=np.int64)
        mask = np.zeros((self.lanes, w), dtype=bool)
        resets = np.zeros((self.lanes, w), dtype=bool)
        any_input = False
        for k in range(self.lanes):
            self._fill(k)
            ids, flags = self._ids[k], self._flags[k]
            if len(ids) < 2:
                continue
            n = min(w, len(ids) - 1)
            y, m = _labels_for(ids[: n + 1], flags[: n + 1], self.vocab)
            tokens[k, :n] = ids[:n]
            labels[k, :n] = y
            mask[k, :n] = m
            resets[k, :n] = self._starts[k][:n]
            self._ids[k] = ids[n:]
            self._starts[k] = self._starts[k][n:]
            self._flags[k] = flags[n:]
            any_input = True
        if not any_input:
            return None
        return PackedStream(tokens, labels, mask, resets)


def format_window(window, vocab):
    """Aligned text dump of one window: input row, then target row (``_`` where unscored)."""
    lines = []
    for k in range(window.lane_count):
        src = "".join(
            "⏎" if vocab.id_to_char.get(int(t)) == "\n" else vocab.id_to_char.get(int(t), "~")
            for t in window.token_ids[k]
        )
        tgt = "".join(
            vocab.output_alphabet[int(y)] if m else "_"
            for y, m in zip(window.labels[k], window.loss_mask[k])
        )
        lines.append(f"lane {k:3d} in : {src}")
        lines.append(f"         out: {tgt}")
    return "\n".join(lines)
