"""Synthetic sequence-classification tasks and TSV ingestion.

Token id conventions: 0 = padding, 1 = unknown, 2 = segment separator,
content ids start at 3.  Examples are stored as padded id matrices with
explicit valid lengths; train/dev splits are disjoint by construction.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, InputError
from .rng import Rng

PAD_ID = 0
UNK_ID = 1
SEP_ID = 2
FIRST_CONTENT_ID = 3


@dataclass(frozen=True)
class TaskSpec:
    name: str
    kind: str                      # "single_sentence" | "sentence_pair"
    metric: str                    # "accuracy" | "f1" | "mcc" | "spearman"
    vocab_size: int
    max_seq_len: int
    num_classes: int = 2

    def __post_init__(self):
        if self.kind not in ("single_sentence", "sentence_pair"):
            raise ContractError(f"unknown task kind {self.kind!r}")
        if self.metric not in ("accuracy", "f1", "mcc", "spearman"):
            raise ContractError(f"unknown metric {self.metric!r}")


@dataclass
class Split:
    token_ids: np.ndarray     # [n, seq] int64, padded with PAD_ID
    segment_ids: np.ndarray   # [n, seq] int64
    lengths: np.ndarray       # [n] int64
    labels: np.ndarray        # [n] int64

    def __len__(self):
        return self.token_ids.shape[0]

    def subset(self, idx) -> "Split":
        idx = np.asarray(idx)
        return Split(self.token_ids[idx], self.segment_ids[idx],
                     self.lengths[idx], self.labels[idx])

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for arr in (self.token_ids, self.segment_ids, self.lengths, self.labels):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


@dataclass
class Dataset:
    spec: TaskSpec
    train: Split
    dev: Split
    vocab: dict = field(default_factory=dict)


@dataclass
class Batch:
    token_ids: np.ndarray
    segment_ids: np.ndarray
    lengths: np.ndarray
    labels: np.ndarray


def epoch_batches(split: Split, batch_size: int, rng: Rng | None = None):
    """Batches covering the split once; shuffled when an rng is given."""
    n = len(split)
    order = rng.permutation(n) if rng is not None else np.arange(n)
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        yield Batch(split.token_ids[idx], split.segment_ids[idx],
                    split.lengths[idx], split.labels[idx])


# -- parity --------------------------------------------------------------


def _parity_length_budget(total: int, seq_len: int) -> list:
    """Spread `total` examples over lengths 1..seq_len, as evenly as the
    2**length capacity of the short lengths allows."""
    capacity = [min(2 ** l, total) for l in range(1, seq_len + 1)]
    if total > sum(capacity):
        raise ContractError(
            f"cannot draw {total} distinct sequences of length <= {seq_len}"
        )
    counts = [0] * seq_len
    remaining = total
    open_lengths = list(range(seq_len))
    while remaining > 0:
        quota = max(1, remaining // max(1, len(open_lengths)))
        progressed = False
        for i in list(open_lengths):
            take = min(quota, capacity[i] - counts[i], remaining)
            if take > 0:
                counts[i] += take
                remaining -= take
                progressed = True
            if counts[i] == capacity[i]:
                open_lengths.remove(i)
            if remaining == 0:
                break
        if not progressed:
            break
    return counts


def gen_parity(n_train: int, n_dev: int, seq_len: int, seed: int) -> Dataset:
    """Binary sequences of mixed lengths 1..seq_len labeled by the XOR of
    their bits.

    Lengths are stratified (short sequences are deliberately present:
    they anchor the parity circuit, which plain fixed-length training
    fails to find).  Within each length, distinct bit patterns are drawn
    without replacement and split between train and dev, so the splits
    cannot overlap.
    """
    total = n_train + n_dev
    if seq_len > 16:
        raise ContractError(f"parity generator supports seq_len <= 16, got {seq_len}")
    rng = Rng(seed, stream=0)
    counts = _parity_length_budget(total, seq_len)
    dev_frac = n_dev / total

    tr_rows, dev_rows = [], []
    for length_idx, count in enumerate(counts):
        if count == 0:
            continue
        length = length_idx + 1
        codes = rng.permutation(2 ** length)[:count]
        n_dev_here = int(round(count * dev_frac))
        for j, code in enumerate(codes):
            bits = (int(code) >> np.arange(length)) & 1
            row = np.full(seq_len, PAD_ID, dtype=np.int64)
            row[:length] = bits + FIRST_CONTENT_ID
            target = dev_rows if j < n_dev_here else tr_rows
            target.append((row, length, int(bits.sum() % 2)))

    # rebalance rounding drift between the splits
    while len(dev_rows) > n_dev:
        tr_rows.append(dev_rows.pop())
    while len(dev_rows) < n_dev:
        dev_rows.append(tr_rows.pop())

    def pack(rows):
        ids = np.stack([r[0] for r in rows])
        lengths = np.array([r[1] for r in rows], dtype=np.int64)
        labels = np.array([r[2] for r in rows], dtype=np.int64)
        return Split(ids, np.zeros_like(ids), lengths, labels)

    spec = TaskSpec(name="parity", kind="single_sentence", metric="accuracy",
                    vocab_size=FIRST_CONTENT_ID + 2, max_seq_len=seq_len)
    return Dataset(spec=spec, train=pack(tr_rows), dev=pack(dev_rows))


# -- sentence-pair multiset matching --------------------------------------


def gen_pair_match(n_train: int, n_dev: int, vocab: int, seed: int,
                   seg_len: int = 5, negatives: str = "substitute") -> Dataset:
    """Pairs (A, B) labeled 1 iff B is a shuffled copy of A (same
    multiset).  Negatives break the multiset: "substitute" replaces one
    token of the shuffle (hard negatives), "resample" draws B fresh and
    rejects accidental matches (easier).  Classes are balanced to within
    one example."""
    if vocab < 8:
        raise ContractError(f"pair matching needs vocab >= 8, got {vocab}")
    if negatives not in ("substitute", "resample"):
        raise ContractError(f"unknown negative mode {negatives!r}")
    total = n_train + n_dev
    rng = Rng(seed, stream=0)
    seq_len = 2 * seg_len + 1
    seen = set()
    rows, segs, labels = [], [], []
    while len(rows) < total:
        label = len(rows) % 2
        a = FIRST_CONTENT_ID + rng.integers(seg_len, vocab)
        b = a[rng.permutation(seg_len)]
        if label == 0:
            if negatives == "resample":
                b = FIRST_CONTENT_ID + rng.integers(seg_len, vocab)
                if sorted(b) == sorted(a):
                    continue
            else:
                pos = int(rng.integers(1, seg_len)[0])
                old = b[pos]
                choices = [c for c in range(FIRST_CONTENT_ID,
                                            FIRST_CONTENT_ID + vocab)
                           if c != old]
                b = b.copy()
                b[pos] = choices[int(rng.integers(1, len(choices))[0])]
        row = np.concatenate([a, [SEP_ID], b])
        key = row.tobytes()
        if key in seen:
            continue
        seen.add(key)
        rows.append(row)
        segs.append([0] * (seg_len + 1) + [1] * seg_len)
        labels.append(label)

    token_ids = np.array(rows, dtype=np.int64)
    seg = np.array(segs, dtype=np.int64)
    labels = np.array(labels, dtype=np.int64)
    lengths = np.full(total, seq_len, dtype=np.int64)
    spec = TaskSpec(name="pair_match", kind="sentence_pair", metric="f1",
                    vocab_size=FIRST_CONTENT_ID + vocab, max_seq_len=seq_len)
    return Dataset(
        spec=spec,
        train=Split(token_ids[:n_train], seg[:n_train],
                    lengths[:n_train], labels[:n_train]),
        dev=Split(token_ids[n_train:], seg[n_train:],
                  lengths[n_train:], labels[n_train:]),
    )


# -- TSV ingestion ---------------------------------------------------------


@dataclass(frozen=True)
class TsvSchema:
    sentence: str
    label: str
    sentence2: str | None = None
    vocab_size: int = 256
    max_seq_len: int = 32


def build_vocab(token_lists, cap: int) -> dict:
    """Frequency-descending, ties lexicographic; ids start after the
    reserved range."""
    counts = {}
    for tokens in token_lists:
        for tok in tokens:
            counts[tok] = counts.get(tok, 0) + 1
    ranked = sorted(counts, key=lambda t: (-counts[t], t))
    room = cap - FIRST_CONTENT_ID
    return {tok: FIRST_CONTENT_ID + i for i, tok in enumerate(ranked[:room])}


def _parse_tsv(path, schema: TsvSchema):
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise InputError(f"{path}: empty file")
    header = lines[0].split("\t")
    try:
        col_s = header.index(schema.sentence)
        col_l = header.index(schema.label)
        col_s2 = header.index(schema.sentence2) if schema.sentence2 else None
    except ValueError as exc:
        raise InputError(f"{path}: missing column ({exc})") from None
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != len(header):
            raise InputError(
                f"{path}:{lineno}: expected {len(header)} columns, got {len(parts)}"
            )
        first = parts[col_s].split()
        second = parts[col_s2].split() if col_s2 is not None else None
        rows.append((first, second, parts[col_l]))
    if not rows:
        raise InputError(f"{path}: no data rows")
    return rows


def load_tsv(path, schema: TsvSchema, vocab: dict | None = None,
             name: str = "tsv", metric: str = "accuracy"):
    """One TSV file -> (Split, TaskSpec, vocab).

    Tokenization is whitespace against a frequency-built vocab capped at
    schema.vocab_size; out-of-vocab tokens map to the reserved unknown
    id.  Pass the training split's vocab when loading dev/test."""
    rows = _parse_tsv(path, schema)
    if vocab is None:
        token_lists = [r[0] + (r[1] or []) for r in rows]
        vocab = build_vocab(token_lists, schema.vocab_size)

    label_names = sorted({r[2] for r in rows})
    label_map = {name_: i for i, name_ in enumerate(label_names)}

    def encode(tokens):
        return [vocab.get(t, UNK_ID) for t in tokens]

    encoded = []
    for first, second, label in rows:
        ids = encode(first)
        seg = [0] * len(ids)
        if second is not None:
            ids = ids + [SEP_ID] + encode(second)
            seg = seg + [0] + [1] * len(second)
        ids = ids[:schema.max_seq_len]
        seg = seg[:schema.max_seq_len]
        encoded.append((ids, seg, label_map[label]))

    seq = max(len(ids) for ids, _, _ in encoded)
    n = len(encoded)
    token_ids = np.full((n, seq), PAD_ID, dtype=np.int64)
    seg_ids = np.zeros((n, seq), dtype=np.int64)
    lengths = np.zeros(n, dtype=np.int64)
    labels = np.zeros(n, dtype=np.int64)
    for i, (ids, seg, lab) in enumerate(encoded):
        token_ids[i, :len(ids)] = ids
        seg_ids[i, :len(seg)] = seg
        lengths[i] = len(ids)
        labels[i] = lab

    spec = TaskSpec(name=name, kind="sentence_pair" if schema.sentence2
                    else "single_sentence", metric=metric,
                    vocab_size=schema.vocab_size, max_seq_len=seq,
                    num_classes=len(label_names))
    return Split(token_ids, seg_ids, lengths, labels), spec, vocab
