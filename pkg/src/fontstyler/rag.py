"""Retrieval-augmented style references: per-style exact L2 indexes over
content-encoder embeddings.

Embeddings are L2-normalized before indexing, so exact flat L2 ordering and
cosine-similarity ordering coincide. Ties break by ascending charcode.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import DatasetManifest, GlyphImage
from .errors import EmptyIndex, EmptyInput, MissingReferenceImage, ShapeError, UnknownStyle

_MAGIC = b"FSIX"
_FORMAT_VERSION = 1


@dataclass
class StyleEmbedding:
    vector: np.ndarray
    charcode: int
    style_id: str
    normalized: bool


def embed_glyph(image: GlyphImage, model) -> StyleEmbedding:
    """Concatenate all content-encoder tokens (CLS first, then raster-order
    patches) into one unit-norm vector."""
    tokens = model.encode_content(image)
    vec = np.asarray(tokens.detach().cpu().reshape(-1), dtype=np.float32)
    expected = model.cfg.hidden_size * (model.cfg.patch_num + 1)
    if vec.shape[0] != expected:
        raise ShapeError(f"embedding length {vec.shape[0]}, expected {expected}")
    norm = float(np.linalg.norm(vec))
    if norm <= 0:
        raise ShapeError("degenerate all-zero embedding")
    return StyleEmbedding(
        vector=(vec / norm).astype(np.float32),
        charcode=image.charcode,
        style_id=image.style_id,
        normalized=True,
    )


class StyleIndex:
    """Immutable exact flat-L2 index over one style's glyph embeddings."""

    def __init__(self, style_id: str, vectors: np.ndarray, charcodes: np.ndarray, normalized: bool = True):
        vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        charcodes = np.ascontiguousarray(charcodes, dtype=np.int64)
        if vectors.ndim != 2 or vectors.shape[0] != charcodes.shape[0]:
            raise ShapeError(f"vectors {vectors.shape} do not align with charcodes {charcodes.shape}")
        self.style_id = style_id
        self.vectors = vectors
        self.charcodes = charcodes
        self.normalized = normalized

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def search(self, query: np.ndarray, k: int) -> list[tuple[int, float]]:
        """k nearest entries by exact L2 distance, ties by ascending charcode."""
        if len(self) == 0:
            raise EmptyIndex(f"index for style {self.style_id!r} is empty")
        if k < 1:
            raise ValueError("k must be >= 1")
        q = np.asarray(query, dtype=np.float32).reshape(-1)
        if q.shape[0] != self.dim:
            raise ShapeError(f"query dim {q.shape[0]} != index dim {self.dim}")
        d2 = np.sum((self.vectors - q[None, :]) ** 2, axis=1)
        order = np.lexsort((self.charcodes, d2))[: min(k, len(self))]
        return [(int(self.charcodes[i]), float(np.sqrt(d2[i]))) for i in order]

    def save(self, path: str | Path) -> Path:
        """Binary layout: header, contiguous little-endian float32 vectors,
        then the charcode table. Written atomically."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        sid = self.style_id.encode("utf-8")
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, "wb") as f:
            f.write(_MAGIC)
            f.write(struct.pack("<IH", _FORMAT_VERSION, len(sid)))
            f.write(sid)
            f.write(struct.pack("<IIB", self.dim, len(self), int(self.normalized)))
            f.write(self.vectors.astype("<f4").tobytes(order="C"))
            f.write(self.charcodes.astype("<i8").tobytes(order="C"))
        os.replace(tmp, path)
        return path

    @classmethod
    def load(cls, path: str | Path) -> "StyleIndex":
        with open(path, "rb") as f:
            blob = f.read()
        if blob[:4] != _MAGIC:
            raise ValueError(f"{path} is not a style index file")
        version, sid_len = struct.unpack_from("<IH", blob, 4)
        if version != _FORMAT_VERSION:
            raise ValueError(f"unsupported index format version {version}")
        off = 10
        style_id = blob[off : off + sid_len].decode("utf-8")
        off += sid_len
        dim, count, normalized = struct.unpack_from("<IIB", blob, off)
        off += 9
        vectors = np.frombuffer(blob, dtype="<f4", count=count * dim, offset=off).reshape(count, dim)
        off += count * dim * 4
        charcodes = np.frombuffer(blob, dtype="<i8", count=count, offset=off)
        return cls(style_id, vectors.copy(), charcodes.copy(), bool(normalized))


def build_index(style_id: str, glyphs: list[GlyphImage], model) -> StyleIndex:
    """Embed every glyph of one style into an exact search index."""
    if not glyphs:
        raise EmptyInput(f"no glyphs supplied for style {style_id!r}")
    embs = [embed_glyph(g, model) for g in glyphs]
    vectors = np.stack([e.vector for e in embs])
    charcodes = np.array([g.charcode for g in glyphs], dtype=np.int64)
    return StyleIndex(style_id, vectors, charcodes, normalized=True)


def retrieve_reference(query, index: StyleIndex, k: int, model=None) -> list[tuple[int, float]]:
    """Ranked (charcode, L2 distance) list for a glyph or embedding query."""
    if isinstance(query, StyleEmbedding):
        vec = query.vector
    elif isinstance(query, np.ndarray):
        vec = query
    else:
        if model is None:
            raise ValueError("retrieving by image requires the model for embedding")
        vec = embed_glyph(query, model).vector
    return index.search(vec, k)


def manifest_reference_loader(manifest: DatasetManifest, store):
    """Loader resolving (style_id, charcode) to a stored glyph image."""
    lookup = {(e.style_id, e.charcode): e for e in manifest.entries}

    def load(style_id: str, charcode: int) -> GlyphImage:
        entry = lookup.get((style_id, charcode))
        if entry is None:
            raise MissingReferenceImage(
                f"no stored glyph for style {style_id!r} charcode U+{charcode:04X}"
            )
        return store(entry)

    return load


def generate_with_rag(
    content_img: GlyphImage,
    style_id: str,
    model,
    indexes: dict[str, StyleIndex],
    reference_loader,
) -> tuple[GlyphImage, int]:
    """Retrieve the best style reference for the content, then generate.

    Returns the output glyph and the charcode of the chosen reference.
    """
    index = indexes.get(style_id)
    if index is None:
        raise UnknownStyle(f"no index for style {style_id!r}")
    ranked = retrieve_reference(content_img, index, k=1, model=model)
    charcode = ranked[0][0]
    reference = reference_loader(style_id, charcode)
    output = model.generate(content_img, reference)
    return output, charcode
