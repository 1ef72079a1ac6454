"""Embedding tables, cosine similarity, and max-abs feature scaling."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from chronorec import binio
from chronorec.errors import DataError

log = logging.getLogger(__name__)

_TABLE_MAGIC = b"CREMB1\n"

SPACES = ("content", "node")


@dataclass
class EmbeddingTable:
    """id -> dense vector, all of one dimension, tagged by vector space."""

    dim: int
    space: str
    vectors: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.space not in SPACES:
            raise DataError(f"unknown embedding space {self.space!r}")

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, key: str) -> bool:
        return key in self.vectors

    def __getitem__(self, key: str) -> np.ndarray:
        return self.vectors[key]

    def get(self, key: str) -> np.ndarray | None:
        return self.vectors.get(key)

    def put(self, key: str, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise DataError(
                f"vector for {key!r} has shape {vec.shape}, expected ({self.dim},)"
            )
        if not np.all(np.isfinite(vec)):
            raise DataError(f"vector for {key!r} has non-finite entries")
        self.vectors[key] = vec

    def matrix(self, ids: list[str]) -> np.ndarray:
        """Stack vectors for the given ids into an (n, dim) array."""
        return np.stack([self.vectors[i] for i in ids]) if ids else np.zeros((0, self.dim))

    def save(self, path: str | Path) -> None:
        with Path(path).open("wb") as fh:
            fh.write(_TABLE_MAGIC)
            binio.write_str(fh, self.space)
            binio.write_u64(fh, self.dim)
            binio.write_u64(fh, len(self.vectors))
            for key, vec in self.vectors.items():
                binio.write_str(fh, key)
                fh.write(vec.astype("<f8").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingTable":
        with Path(path).open("rb") as fh:
            binio.expect_magic(fh, _TABLE_MAGIC, "embedding table")
            space = binio.read_str(fh)
            dim = binio.read_u64(fh)
            count = binio.read_u64(fh)
            table = cls(dim=dim, space=space)
            for _ in range(count):
                key = binio.read_str(fh)
                data = fh.read(8 * dim)
                if len(data) != 8 * dim:
                    raise DataError(f"truncated vector record for {key!r}")
                table.vectors[key] = np.frombuffer(data, dtype="<f8").copy()
        return table

    def export_text(self, path: str | Path) -> None:
        """One line per id: the id followed by ``dim`` floats."""
        with Path(path).open("w", encoding="utf-8") as fh:
            fh.write(f"#space={self.space} dim={self.dim}\n")
            for key, vec in self.vectors.items():
                fh.write(key + " " + " ".join(f"{v:.17g}" for v in vec) + "\n")

    @classmethod
    def import_text(cls, path: str | Path, space: str | None = None) -> "EmbeddingTable":
        table: EmbeddingTable | None = None
        header_space = "content"
        with Path(path).open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                if line.startswith("#"):
                    for part in line[1:].split():
                        if part.startswith("space="):
                            header_space = part.split("=", 1)[1]
                    continue
                parts = line.split()
                vec = np.array([float(v) for v in parts[1:]], dtype=np.float64)
                if table is None:
                    table = cls(dim=len(vec), space=space or header_space)
                table.put(parts[0], vec)
        if table is None:
            raise DataError(f"no vectors found in {path}")
        return table


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors, in [-1, 1].

    A zero vector on either side yields 0.0 (flagged in the log) instead of
    raising, so ranking loops never abort on a degenerate embedding.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DataError(f"cosine of mismatched shapes {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        log.debug("cosine_similarity: zero vector, returning 0.0")
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def cosine_against_matrix(query: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Cosine of ``query`` against every row of ``matrix``; zero rows score 0."""
    query = np.asarray(query, dtype=np.float64)
    nq = float(np.linalg.norm(query))
    if matrix.size == 0 or nq == 0.0:
        return np.zeros(matrix.shape[0] if matrix.ndim == 2 else 0)
    norms = np.linalg.norm(matrix, axis=1)
    out = np.zeros(matrix.shape[0])
    nz = norms > 0.0
    out[nz] = (matrix[nz] @ query) / (norms[nz] * nq)
    return out


@dataclass(frozen=True)
class MaxAbsScaler:
    """Per-feature division by the maximum absolute value seen at fit time.

    Features whose fitted maximum is zero pass through unchanged. Vectors
    outside the fit set may land outside [-1, 1]; that is expected.
    """

    scale: np.ndarray

    def apply(self, vec: np.ndarray) -> np.ndarray:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != self.scale.shape:
            raise DataError(
                f"scaler of dim {self.scale.shape[0]} applied to shape {vec.shape}"
            )
        out = vec.copy()
        nz = self.scale > 0.0
        out[nz] = vec[nz] / self.scale[nz]
        return out

    def apply_matrix(self, matrix: np.ndarray) -> np.ndarray:
        out = np.array(matrix, dtype=np.float64, copy=True)
        nz = self.scale > 0.0
        out[:, nz] = out[:, nz] / self.scale[nz]
        return out


def fit_max_abs_scaler(vectors: np.ndarray | list[np.ndarray]) -> MaxAbsScaler:
    matrix = np.asarray(vectors, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise DataError("scaler fit set must be a non-empty 2d collection")
    return MaxAbsScaler(scale=np.max(np.abs(matrix), axis=0))
