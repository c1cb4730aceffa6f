"""Embedding-based retrieval over knowledge items.

Vectors are L2-normalized at index time so cosine equals dot product.
The scan is exact brute force; knowledge bases here are repo-sized.
Items that embed to the zero vector are stored as zeros and never
retrieved.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from .errors import EmbedderUnavailable
from .kb import CodeKnowledgeBase

DENSE_FILE_NAME = "dense.vec"
FORMAT_VERSION = 1
_MAGIC = b"CRDV"


class EmbedderClient(Protocol):
    """Deterministic text encoder; all vectors share one dimension."""

    def embed(self, text: str) -> list[float]: ...

    def dimension(self) -> int: ...


@dataclass
class DenseIndex:
    item_ids: list[str]
    vectors: np.ndarray  # float32, shape (len(item_ids), dim), rows unit or zero
    dim: int

    def __post_init__(self) -> None:
        norms = np.linalg.norm(self.vectors.astype(np.float64), axis=1)
        self._active = norms > 0.0
        if not np.all((np.abs(norms - 1.0) <= 1e-6) | ~self._active):
            raise ValueError("stored vectors must be unit-normalized or zero")


def _normalize(raw: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(raw))
    if norm == 0.0:
        return np.zeros_like(raw, dtype=np.float32)
    return (raw / norm).astype(np.float32)


def build_dense_index(kb: CodeKnowledgeBase, embedder: EmbedderClient) -> DenseIndex:
    """Embed every item's text (functions at function level, variables at
    their line level — both are exactly the item's text slice).

    An embedder failure aborts the build; the raised error carries how far
    the build got in ``items_embedded``.
    """
    dim = embedder.dimension()
    rows = np.zeros((len(kb.items), dim), dtype=np.float32)
    for pos, item in enumerate(kb.items):
        try:
            raw = np.asarray(embedder.embed(item.text), dtype=np.float64)
        except EmbedderUnavailable as exc:
            exc.items_embedded = pos  # type: ignore[attr-defined]
            exc.total_items = len(kb.items)  # type: ignore[attr-defined]
            raise
        if raw.shape != (dim,):
            raise ValueError(
                f"embedder returned shape {raw.shape} for item {item.id}, expected ({dim},)"
            )
        rows[pos] = _normalize(raw)
    return DenseIndex(item_ids=[item.id for item in kb.items], vectors=rows, dim=dim)


def dense_retrieve(
    index: DenseIndex, query_text: str, embedder: EmbedderClient, j: int
) -> list[tuple[str, float]]:
    """Top-j items by cosine (dot of unit vectors); no score floor is applied.

    Ties break by ascending item id.  A query that embeds to the zero
    vector has no direction and retrieves nothing.
    """
    if j < 1:
        raise ValueError("j must be >= 1")
    raw = np.asarray(embedder.embed(query_text), dtype=np.float64)
    q = _normalize(raw).astype(np.float64)
    if not q.any():
        return []
    scores = index.vectors.astype(np.float64) @ q
    scored = [
        (index.item_ids[pos], float(scores[pos]))
        for pos in range(len(index.item_ids))
        if index._active[pos]
    ]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:j]


def save_dense_index(index: DenseIndex, out_dir: str | Path) -> None:
    """Binary layout: magic, u32 header (dim, count, version), row-major
    float32 LE matrix, u32 id-table length, JSON id table (UTF-8)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    matrix = np.ascontiguousarray(index.vectors, dtype="<f4")
    id_table = json.dumps(index.item_ids, ensure_ascii=False).encode("utf-8")
    with open(out / DENSE_FILE_NAME, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", index.dim, len(index.item_ids), FORMAT_VERSION))
        fh.write(matrix.tobytes())
        fh.write(struct.pack("<I", len(id_table)))
        fh.write(id_table)


def load_dense_index(kb_dir: str | Path) -> DenseIndex:
    blob = (Path(kb_dir) / DENSE_FILE_NAME).read_bytes()
    if blob[:4] != _MAGIC:
        raise ValueError("not a dense vector file")
    dim, count, version = struct.unpack_from("<III", blob, 4)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported dense index version {version}")
    offset = 4 + 12
    matrix_bytes = count * dim * 4
    vectors = np.frombuffer(blob, dtype="<f4", count=count * dim, offset=offset)
    vectors = vectors.reshape(count, dim).copy()
    offset += matrix_bytes
    (table_len,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    item_ids = json.loads(blob[offset : offset + table_len].decode("utf-8"))
    return DenseIndex(item_ids=item_ids, vectors=vectors, dim=dim)
