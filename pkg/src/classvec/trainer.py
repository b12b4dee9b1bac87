"""Class-conditioned CBOW fine-tuning of pretrained word embeddings.

Every document's class label owns one trainable vector, shared by all
documents of that class. At each center position the class vector is
averaged together with the in-window context word vectors, and the mean
predicts the center word through a negative-sampling objective trained
by SGD. Multilabel documents are presented once per label.

Gradients are applied word2vec-style: the full context-side update is
added to the class vector and to each (trainable) context word vector,
and output vectors exist only for corpus tokens, so rows of the merged
matrix that never occur in the corpus come out bit-identical.

All training arithmetic runs in 64-bit; the exported matrix is cast back
to 32-bit floats.
"""
from __future__ import annotations

import logging
import threading
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .corpus import Document, LabeledCorpus
from .embedding_io import EmbeddingSet
from .vocab import MergedModel, Vocabulary, build_vocab

logger = logging.getLogger(__name__)

# attempts to draw a noise word different from the center before giving up
NS_RESAMPLE_ATTEMPTS = 8

# rng stream label for the per-epoch document shuffle, kept separate from
# the update stream so `shuffle=False` runs are unaffected by its existence
_SHUFFLE_STREAM = 0x5F


@dataclass(frozen=True)
class FinetuneConfig:
    """Hyperparameters of the fine-tuning run.

    ``export_class_vectors`` is a path consumed by the command-line
    driver (the trained class vectors are written there as a word2vec
    text file keyed by class name); :func:`finetune` itself always
    returns them and performs no I/O.
    """

    epochs: int = 10
    window: int = 5
    negative: int = 5
    alpha0: float = 0.025
    alpha_min: float = 0.0001
    seed: int = 1
    threads: int = 1
    subsample_threshold: float | None = None
    shuffle: bool = False
    export_class_vectors: str | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.negative < 1:
            raise ValueError("negative must be >= 1")
        if not (self.alpha0 > self.alpha_min > 0):
            raise ValueError("need alpha0 > alpha_min > 0")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.subsample_threshold is not None and self.subsample_threshold <= 0:
            raise ValueError("subsample_threshold must be positive when set")


@dataclass(frozen=True)
class ClassVectors:
    """One trained vector per class, in corpus class order."""

    classes: tuple[str, ...]
    matrix: np.ndarray  # |C| x m, float32

    def __post_init__(self):
        if self.matrix.shape[0] != len(self.classes):
            raise ValueError("one vector per class required")
        if not np.isfinite(self.matrix).all():
            raise ValueError("class vectors contain non-finite values")

    def vector(self, name: str) -> np.ndarray:
        return self.matrix[self.classes.index(name)]


@dataclass
class TrainState:
    """Mutable state shared by every update of one fine-tuning run.

    ``input_matrix``/``class_vectors`` are 64-bit working copies;
    ``output_matrix`` has one row per corpus token only, and
    ``noise_table`` is the cumulative unigram^0.75 distribution over
    those same rows. ``trainable`` masks which input rows updates may
    touch. ``alpha`` tracks the last learning rate used.
    """

    cfg: FinetuneConfig
    input_matrix: np.ndarray   # |V ∪ V_T| x m, float64
    output_matrix: np.ndarray  # |V_T| x m, float64
    class_vectors: np.ndarray  # |C| x m, float64
    noise_table: np.ndarray    # |V_T| cumulative probabilities
    alpha: float
    rng: np.random.Generator
    trainable: np.ndarray      # bool per input row
    classes: tuple[str, ...]
    class_index: dict[str, int]
    input_index: dict[str, int]
    output_index: dict[str, int]
    keep_prob: np.ndarray | None  # per-output-row keep probability, or None
    positions_done: int = 0
    total_positions: int = 0


def build_noise_table(vocab: Vocabulary) -> np.ndarray:
    """Cumulative noise distribution over corpus tokens, P ∝ freq^0.75.

    Entry ``i`` holds the probability mass of vocabulary rows ``0..i``;
    the final entry is 1 within 1e-9.
    """
    freqs = np.zeros(len(vocab), dtype=np.float64)
    for idx, freq in vocab.entries.values():
        freqs[idx] = freq
    probs = freqs ** 0.75
    probs /= probs.sum()
    return np.cumsum(probs)


def lr_schedule(cfg: FinetuneConfig, progress: float) -> float:
    """Linearly decayed learning rate, floored at ``alpha_min``."""
    if not 0.0 <= progress <= 1.0:
        raise ValueError(f"progress must be in [0, 1], got {progress}")
    return max(cfg.alpha_min, cfg.alpha0 * (1.0 - progress))


def ns_loss_and_grads(
    context_mean: np.ndarray,
    center: int,
    negatives: list[int],
    state: TrainState,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Negative-sampling loss and gradients at one position.

    L = -log sigma(u_c . h) - sum_j log sigma(-u_j . h) with h the
    context mean, u_c the center's output vector and u_j the negatives'.
    Returns ``(loss, dL/dh, dL/du)`` where the gradient rows of ``dL/du``
    align with ``[center, *negatives]``.
    """
    rows = np.empty(1 + len(negatives), dtype=np.int64)
    rows[0] = center
    rows[1:] = negatives
    u = state.output_matrix[rows]
    z = u @ context_mean
    # -log sigma(z) = log(1 + exp(-z)), stable in both tails
    loss = float(np.logaddexp(0.0, -z[0]) + np.logaddexp(0.0, z[1:]).sum())
    err = expit(z)
    err[0] -= 1.0  # dL/dz_i: sigma - 1 for the center, sigma for negatives
    grad_h = err @ u
    grad_u = np.outer(err, context_mean)
    return loss, grad_h, grad_u


def _sample_negatives(
    state: TrainState, center: int, rng: np.random.Generator
) -> list[int]:
    table = state.noise_table
    last = len(table) - 1
    negatives = []
    for _ in range(state.cfg.negative):
        for _ in range(NS_RESAMPLE_ATTEMPTS):
            j = min(int(np.searchsorted(table, rng.random(), side="right")), last)
            if j != center:
                negatives.append(j)
                break
    return negatives


def _train_label_pass(
    state: TrainState,
    in_idx: np.ndarray,
    out_idx: np.ndarray,
    label_id: int,
    rng: np.random.Generator,
) -> None:
    """One pass over a document's positions under one class vector."""
    cfg = state.cfg
    if state.keep_prob is not None:
        keep = rng.random(len(in_idx)) < state.keep_prob[out_idx]
        # discarded positions still advance the lr schedule
        state.positions_done += int(len(in_idx) - keep.sum())
        in_idx, out_idx = in_idx[keep], out_idx[keep]
    inp = state.input_matrix
    cls = state.class_vectors
    trainable = state.trainable
    total = state.total_positions
    for p in range(len(in_idx)):
        alpha = lr_schedule(cfg, state.positions_done / total)
        state.positions_done += 1
        state.alpha = alpha
        lo = max(0, p - cfg.window)
        hi = min(len(in_idx), p + cfg.window + 1)
        ctx = np.concatenate([in_idx[lo:p], in_idx[p + 1:hi]])
        h = (cls[label_id] + inp[ctx].sum(axis=0)) / (1 + len(ctx))
        center = int(out_idx[p])
        negatives = _sample_negatives(state, center, rng)
        _, grad_h, grad_u = ns_loss_and_grads(h, center, negatives, state)
        rows = np.empty(1 + len(negatives), dtype=np.int64)
        rows[0] = center
        rows[1:] = negatives
        np.subtract.at(state.output_matrix, rows, alpha * grad_u)
        # word2vec convention: the full context-side step goes to the class
        # vector and to every trainable context word vector
        neu1e = -alpha * grad_h
        cls[label_id] += neu1e
        for ci in ctx:
            if trainable[ci]:
                inp[ci] += neu1e


def _doc_arrays(
    state: TrainState, doc: Document
) -> tuple[np.ndarray, np.ndarray, list[int]]:
    try:
        in_idx = np.fromiter(
            (state.input_index[t] for t in doc.tokens), np.int64, len(doc.tokens)
        )
    except KeyError as e:
        raise ValueError(
            f"corpus token {e.args[0]!r} is missing from the model; "
            "merge() must precede finetune()"
        ) from None
    out_idx = np.fromiter(
        (state.output_index[t] for t in doc.tokens), np.int64, len(doc.tokens)
    )
    return in_idx, out_idx, [state.class_index[l] for l in doc.labels]


def train_document(state: TrainState, doc: Document) -> TrainState:
    """Apply one document's updates (one pass per label) to ``state``."""
    in_idx, out_idx, label_ids = _doc_arrays(state, doc)
    for li in label_ids:
        _train_label_pass(state, in_idx, out_idx, li, state.rng)
    return state


def init_state(
    model: MergedModel, corpus: LabeledCorpus, cfg: FinetuneConfig
) -> TrainState:
    """Build the initial training state for ``finetune``.

    Consumes the head of the seeded rng stream for the class-vector
    initialization (uniform [-0.5/m, +0.5/m), the same scheme used for
    unseen words).
    """
    vocab = build_vocab(corpus)
    emb = model.embedding
    missing = [t for t in vocab.entries if t not in emb.index]
    if missing:
        raise ValueError(
            f"corpus tokens missing from the model (merge() must precede "
            f"finetune()): {missing[:5]!r}"
        )
    m = emb.dim
    rng = np.random.default_rng(cfg.seed)
    classes = tuple(corpus.classes)
    class_vectors = (rng.random((len(classes), m)) - 0.5) / m
    keep_prob = None
    if cfg.subsample_threshold is not None:
        # word2vec-style downsampling of frequent tokens
        t = cfg.subsample_threshold
        freqs = np.zeros(len(vocab), dtype=np.float64)
        for idx, freq in vocab.entries.values():
            freqs[idx] = freq
        rel = freqs / vocab.total_tokens
        keep_prob = np.minimum(1.0, np.sqrt(t / rel) + t / rel)
    total = cfg.epochs * sum(
        len(d.tokens) * len(d.labels) for d in corpus.docs
    )
    return TrainState(
        cfg=cfg,
        input_matrix=emb.matrix.astype(np.float64),
        output_matrix=np.zeros((len(vocab), m), dtype=np.float64),
        class_vectors=class_vectors,
        noise_table=build_noise_table(vocab),
        alpha=cfg.alpha0,
        rng=rng,
        trainable=model.trainable_mask,
        classes=classes,
        class_index={c: i for i, c in enumerate(classes)},
        input_index=emb.index,
        output_index={t: idx for t, (idx, _) in vocab.entries.items()},
        keep_prob=keep_prob,
        positions_done=0,
        total_positions=total,
    )


def _check_finite(state: TrainState, epoch: int) -> None:
    if not (
        np.isfinite(state.input_matrix).all()
        and np.isfinite(state.output_matrix).all()
        and np.isfinite(state.class_vectors).all()
    ):
        raise FloatingPointError(f"non-finite values after epoch {epoch}")


def finetune(
    model: MergedModel, corpus: LabeledCorpus, cfg: FinetuneConfig = FinetuneConfig()
) -> tuple[EmbeddingSet, ClassVectors]:
    """Run the full fine-tuning loop and export the tuned embeddings.

    Returns the tuned input matrix as an :class:`EmbeddingSet` over the
    merged vocabulary (class vectors are excluded from it) together with
    the per-class vectors. Deterministic and bit-reproducible for
    ``threads=1`` and a fixed seed; with ``threads > 1`` workers update
    the shared matrices without locking, so results are run-to-run
    nondeterministic while every other invariant still holds.
    """
    state = init_state(model, corpus, cfg)
    docs = [_doc_arrays(state, d) for d in corpus.docs]
    shuffle_rng = np.random.default_rng((cfg.seed, _SHUFFLE_STREAM))
    order = np.arange(len(docs))
    for epoch in range(cfg.epochs):
        if cfg.shuffle:
            shuffle_rng.shuffle(order)
        if cfg.threads == 1:
            for di in order:
                in_idx, out_idx, label_ids = docs[di]
                for li in label_ids:
                    _train_label_pass(state, in_idx, out_idx, li, state.rng)
        else:
            workers = [
                threading.Thread(
                    target=_worker_pass,
                    args=(state, docs, order[w::cfg.threads],
                          np.random.default_rng((cfg.seed, epoch, w))),
                )
                for w in range(cfg.threads)
            ]
            for t in workers:
                t.start()
            for t in workers:
                t.join()
        _check_finite(state, epoch)
        logger.info(
            "epoch %d/%d done: %d/%d positions, alpha %.6f",
            epoch + 1, cfg.epochs, state.positions_done,
            state.total_positions, state.alpha,
        )
    tuned = EmbeddingSet(
        model.embedding.words, state.input_matrix.astype(np.float32)
    )
    class_vectors = ClassVectors(
        state.classes, state.class_vectors.astype(np.float32)
    )
    return tuned, class_vectors


def _worker_pass(
    state: TrainState,
    docs: list[tuple[np.ndarray, np.ndarray, list[int]]],
    doc_ids: np.ndarray,
    rng: np.random.Generator,
) -> None:
    for di in doc_ids:
        in_idx, out_idx, label_ids = docs[di]
        for li in label_ids:
            _train_label_pass(state, in_idx, out_idx, li, rng)
