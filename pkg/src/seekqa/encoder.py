"""Contextual token encodings: a deterministic stub plus a file interchange.

The scorer consumes per-token context vectors and a sequence summary for each
question-candidate pair. Real encoders live outside this package and hand
their output over as JSON lines; the stub here fills the same contract with
hash-seeded unit vectors so the pipeline runs self-contained. One record per
pair: {"id", "d_h", "tokens", "H", "h0"} with H row-major, one row per token.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

from .errors import DataError
from .text import tokenize

SEPARATOR_TOKEN = "[SEP]"


@dataclass
class ContextualEncoding:
    """Token-level context vectors for one question-candidate pair."""

    id: str
    tokens: list[str]
    vectors: np.ndarray  # (num_tokens, d_h)
    summary: np.ndarray  # (d_h,)

    @property
    def d_h(self) -> int:
        return int(self.summary.shape[0])

    def span_rep(self, span: tuple[int, int]) -> np.ndarray:
        """Mean context vector over an inclusive token span."""
        lo, hi = span
        if not (0 <= lo <= hi < len(self.tokens)):
            raise ValueError(f"span {span} outside {len(self.tokens)} tokens")
        return self.vectors[lo:hi + 1].mean(axis=0)


def _token_vector(token: str, d_h: int, seed: int) -> np.ndarray:
    digest = hashlib.sha256(f"{seed}|{token}".encode("utf-8")).digest()
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest[:8], "little")))
    v = rng.standard_normal(d_h)
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else v


def stub_encode(pair_id: str, question: str, answer: str, d_h: int, seed: int = 0) -> ContextualEncoding:
    """Deterministic stand-in encoder.

    Token layout is question tokens, a separator, answer tokens, so grounded
    question spans index the sequence directly and answer spans index it
    after an offset of len(question tokens) + 1. Each token's vector depends
    only on (seed, token) and has unit norm; the summary is the token mean.
    """
    if d_h < 1:
        raise ValueError("d_h must be positive")
    tokens = tokenize(question) + [SEPARATOR_TOKEN] + tokenize(answer)
    vectors = np.stack([_token_vector(t, d_h, seed) for t in tokens])
    return ContextualEncoding(
        id=pair_id,
        tokens=tokens,
        vectors=vectors,
        summary=vectors.mean(axis=0),
    )


def save_encodings(encodings: Iterable[ContextualEncoding], out: IO[str]) -> None:
    for enc in encodings:
        rec = {
            "id": enc.id,
            "d_h": enc.d_h,
            "tokens": enc.tokens,
            "H": [[float(x) for x in row] for row in enc.vectors],
            "h0": [float(x) for x in enc.summary],
        }
        out.write(json.dumps(rec) + "\n")


def load_encodings(reader: Iterable[str]) -> dict[str, ContextualEncoding]:
    """Parse encoding records keyed by pair id; malformed records name the id."""
    out: dict[str, ContextualEncoding] = {}
    for lineno, line in enumerate(reader, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"encodings line {lineno}: invalid JSON: {exc}") from None
        try:
            rec_id = str(rec["id"])
            d_h = int(rec["d_h"])
            tokens = [str(t) for t in rec["tokens"]]
            rows = rec["H"]
            summary = np.asarray(rec["h0"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"encodings line {lineno}: missing or bad field: {exc}") from None
        if d_h < 1:
            raise DataError(f"record {rec_id}: d_h must be positive")
        if len(rows) != len(tokens):
            raise DataError(
                f"record {rec_id}: {len(rows)} vector rows for {len(tokens)} tokens"
            )
        if any(len(row) != d_h for row in rows):
            raise DataError(f"record {rec_id}: ragged vector rows (want width {d_h})")
        if summary.shape != (d_h,):
            raise DataError(f"record {rec_id}: summary width {summary.shape} != {d_h}")
        vectors = np.asarray(rows, dtype=np.float64) if rows else np.zeros((0, d_h))
        if rec_id in out:
            raise DataError(f"record {rec_id}: duplicate id")
        out[rec_id] = ContextualEncoding(rec_id, tokens, vectors, summary)
    return out
