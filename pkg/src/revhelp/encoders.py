"""Text encoders mapping a review to a fixed-size contextual vector.

Two interchangeable backends sit behind the same interface:

* ``hash`` (the test backend): a deterministic bag-of-subwords encoder.
  Token embeddings are a fixed hash-derived table, mean-pooled and passed
  through a trainable projection with tanh.  No external weights, stable
  across runs and platforms, fast enough to train in CI.
* ``pretrained``: a bidirectional transformer (via ``transformers``),
  taking the final-layer vector at the sequence-start token through the
  same trainable projection + tanh.

Both expose the token-embedding sequence separately from the pooled
forward pass so attribution can integrate gradients along embedding paths.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

PAD_ID = 0
START_ID = 1
END_ID = 2
N_SPECIAL = 3

PAD_TOKEN = "<pad>"
START_TOKEN = "<s>"
END_TOKEN = "</s>"

SPECIAL_TOKENS = {PAD_TOKEN, START_TOKEN, END_TOKEN}

#: Continuation pieces of a split word carry this prefix, matching the
#: common wordpiece convention so piece merging works for both backends.
PIECE_PREFIX = "##"

DEFAULT_MAX_LEN = 512

_WORD_RE = re.compile(r"[0-9a-z']+")


@dataclass
class TokenizedReview:
    """Bounded token-id sequence with aligned surface pieces.

    The first id is the start marker and the last retained id the end
    marker; over-long input is cut to ``max_len`` with the end marker kept.
    """

    token_ids: list[int]
    pieces: list[str]
    degenerate: bool = False
    truncated: bool = False

    def __post_init__(self):
        if len(self.token_ids) != len(self.pieces):
            raise ValueError("token ids and surface pieces must align one-to-one")

    @property
    def length(self) -> int:
        return len(self.token_ids)


@dataclass
class TextEmbedding:
    """Fixed-size review vector plus the identity of the encoder that made it."""

    vector: np.ndarray
    source: str

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=np.float64)
        if self.vector.ndim != 1:
            raise ValueError(f"text embedding must be a vector, got shape {self.vector.shape}")
        if not np.isfinite(self.vector).all():
            raise ValueError("text embedding contains non-finite entries")


def hash_token_id(piece: str, vocab_size: int) -> int:
    """Stable token id for a surface piece: blake2b bucket above the specials."""
    digest = hashlib.blake2b(piece.encode("utf-8"), digest_size=8).digest()
    return N_SPECIAL + int.from_bytes(digest, "big") % (vocab_size - N_SPECIAL)


def hash_embedding_row(token_id: int, embed_dim: int) -> np.ndarray:
    """Fixed embedding for one token id, in [-1, 1).

    Component ``j`` comes from the ``j``-th big-endian uint32 of the
    blake2b digests of ``"{token_id}:{block}"`` (64-byte digests, 16 words
    per block).  Purely a function of the id, so any independent
    implementation of this recipe reproduces the table bit-for-bit.
    """
    words: list[int] = []
    for block in range(math.ceil(embed_dim / 16)):
        digest = hashlib.blake2b(f"{token_id}:{block}".encode(), digest_size=64).digest()
        words.extend(int.from_bytes(digest[i * 4 : (i + 1) * 4], "big") for i in range(16))
    values = np.array(words[:embed_dim], dtype=np.float64)
    return values / 2.0**32 * 2.0 - 1.0


_TABLE_CACHE: dict[tuple[int, int], np.ndarray] = {}


def hash_embedding_table(vocab_size: int, embed_dim: int) -> np.ndarray:
    key = (vocab_size, embed_dim)
    if key not in _TABLE_CACHE:
        table = np.empty((vocab_size, embed_dim), dtype=np.float64)
        for token_id in range(vocab_size):
            table[token_id] = hash_embedding_row(token_id, embed_dim)
        _TABLE_CACHE[key] = table
    return _TABLE_CACHE[key]


class HashTokenizer:
    """Lowercasing word tokenizer with hash ids and wordpiece-style chunks.

    Words are maximal runs of ``[0-9a-z']``; anything longer than
    ``piece_len`` characters is split into chunks, continuations prefixed
    with ``##``.  Ids are hash buckets, so there is no out-of-vocabulary
    token and no vocabulary file to ship beyond (vocab_size, piece_len).
    """

    def __init__(self, vocab_size: int = 32768, piece_len: int = 8):
        if vocab_size <= N_SPECIAL:
            raise ValueError(f"vocab_size must exceed {N_SPECIAL}, got {vocab_size}")
        if piece_len < 1:
            raise ValueError(f"piece_len must be >= 1, got {piece_len}")
        self.vocab_size = vocab_size
        self.piece_len = piece_len

    def pieces_of(self, text: str) -> list[str]:
        pieces: list[str] = []
        for word in _WORD_RE.findall(text.lower()):
            for start in range(0, len(word), self.piece_len):
                chunk = word[start : start + self.piece_len]
                pieces.append(chunk if start == 0 else PIECE_PREFIX + chunk)
        return pieces

    def tokenize(self, text: str, max_len: int = DEFAULT_MAX_LEN) -> TokenizedReview:
        if max_len < 2:
            raise ValueError(f"max_len must allow both sequence markers, got {max_len}")
        pieces = self.pieces_of(text)
        ids = [START_ID] + [hash_token_id(p, self.vocab_size) for p in pieces]
        surfaces = [START_TOKEN] + pieces
        truncated = False
        if len(ids) >= max_len:
            ids = ids[: max_len - 1]
            surfaces = surfaces[: max_len - 1]
            truncated = True
        ids.append(END_ID)
        surfaces.append(END_TOKEN)
        return TokenizedReview(
            token_ids=ids,
            pieces=surfaces,
            degenerate=not pieces,
            truncated=truncated,
        )


class TextEncoder(nn.Module):
    """Interface both backends implement."""

    backend: str = ""
    out_dim: int
    max_len: int
    pad_id: int = PAD_ID

    def tokenize(self, text: str, max_len: int | None = None) -> TokenizedReview:
        raise NotImplementedError

    def embed_tokens(self, token_ids: torch.Tensor) -> torch.Tensor:
        """Token-embedding sequence for (…, L) ids, shape (…, L, D)."""
        raise NotImplementedError

    def forward_from_embeddings(self, embeddings: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        """Pooled review vectors, (B, L, D) + (B, L) mask -> (B, out_dim)."""
        raise NotImplementedError

    def forward(self, token_ids: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        return self.forward_from_embeddings(self.embed_tokens(token_ids), mask)

    def encode(self, tokens: TokenizedReview) -> TextEmbedding:
        """Inference-mode vector for a single tokenized review."""
        ids = torch.tensor([tokens.token_ids], dtype=torch.long)
        mask = torch.ones_like(ids, dtype=self.dtype())
        with torch.no_grad():
            vector = self.forward(ids, mask)[0]
        embedding = TextEmbedding(vector=vector.detach().cpu().numpy(), source=self.backend)
        if embedding.vector.shape[0] != self.out_dim:
            raise ValueError(
                f"encoder produced dimension {embedding.vector.shape[0]}, expected {self.out_dim}"
            )
        return embedding

    def dtype(self) -> torch.dtype:
        return next(self.parameters()).dtype

    def identity(self) -> dict:
        """Serializable description sufficient to rebuild the encoder."""
        raise NotImplementedError


class HashEncoder(TextEncoder):
    """Deterministic bag-of-subwords encoder over fixed hash embeddings."""

    backend = "hash"

    def __init__(
        self,
        vocab_size: int = 32768,
        embed_dim: int = 32,
        out_dim: int = 128,
        max_len: int = DEFAULT_MAX_LEN,
        piece_len: int = 8,
    ):
        super().__init__()
        self.tokenizer = HashTokenizer(vocab_size=vocab_size, piece_len=piece_len)
        self.vocab_size = vocab_size
        self.embed_dim = embed_dim
        self.out_dim = out_dim
        self.max_len = max_len
        table = torch.from_numpy(hash_embedding_table(vocab_size, embed_dim).copy())
        self.register_buffer("embedding_table", table)
        self.projection = nn.Linear(embed_dim, out_dim, dtype=torch.float64)

    def tokenize(self, text: str, max_len: int | None = None) -> TokenizedReview:
        return self.tokenizer.tokenize(text, max_len or self.max_len)

    def embed_tokens(self, token_ids: torch.Tensor) -> torch.Tensor:
        if token_ids.numel() and int(token_ids.max()) >= self.vocab_size:
            raise LookupError(
                f"token id {int(token_ids.max())} outside vocabulary of size {self.vocab_size}; "
                "tokenizer and encoder configurations disagree"
            )
        if token_ids.numel() and int(token_ids.min()) < 0:
            raise LookupError(f"negative token id {int(token_ids.min())}")
        return self.embedding_table[token_ids]

    def forward_from_embeddings(self, embeddings: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        mask = mask.to(embeddings.dtype)
        counts = mask.sum(dim=-1, keepdim=True).clamp(min=1.0)
        pooled = (embeddings * mask.unsqueeze(-1)).sum(dim=-2) / counts
        return torch.tanh(self.projection(pooled))

    @property
    def pad_embedding(self) -> torch.Tensor:
        return self.embedding_table[PAD_ID]

    def identity(self) -> dict:
        return {
            "backend": self.backend,
            "vocab_size": self.vocab_size,
            "embed_dim": self.embed_dim,
            "out_dim": self.out_dim,
            "max_len": self.max_len,
            "piece_len": self.tokenizer.piece_len,
        }


class TransformerEncoder(TextEncoder):
    """Pretrained bidirectional transformer behind the shared interface.

    Fine-tunes the whole backbone by default; ``freeze`` leaves only the
    projection trainable.  Requires the optional ``transformers``
    dependency and locally available weights.
    """

    backend = "pretrained"

    def __init__(
        self,
        model_name: str = "bert-base-uncased",
        out_dim: int = 128,
        max_len: int = DEFAULT_MAX_LEN,
        freeze: bool = False,
        cache_dir: str | None = None,
    ):
        super().__init__()
        try:
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:  # pragma: no cover - optional dependency
            raise ImportError(
                "the pretrained encoder backend needs the 'transformers' package; "
                "install revhelp[pretrained]"
            ) from exc
        self.model_name = model_name
        self.out_dim = out_dim
        self.max_len = max_len
        self.freeze = freeze
        self._tokenizer = AutoTokenizer.from_pretrained(model_name, cache_dir=cache_dir)
        self.backbone = AutoModel.from_pretrained(model_name, cache_dir=cache_dir)
        self.pad_id = self._tokenizer.pad_token_id or 0
        hidden = self.backbone.config.hidden_size
        self.projection = nn.Linear(hidden, out_dim)
        if freeze:
            for param in self.backbone.parameters():
                param.requires_grad_(False)

    def tokenize(self, text: str, max_len: int | None = None) -> TokenizedReview:
        limit = max_len or self.max_len
        encoded = self._tokenizer(
            text, truncation=True, max_length=limit, add_special_tokens=True
        )
        ids = list(encoded["input_ids"])
        pieces = self._tokenizer.convert_ids_to_tokens(ids)
        special_ids = set(self._tokenizer.all_special_ids)
        content = [i for i in ids if i not in special_ids]
        plain = self._tokenizer(text, truncation=False, add_special_tokens=True)["input_ids"]
        return TokenizedReview(
            token_ids=ids,
            pieces=pieces,
            degenerate=not content,
            truncated=len(plain) > len(ids),
        )

    def embed_tokens(self, token_ids: torch.Tensor) -> torch.Tensor:
        return self.backbone.get_input_embeddings()(token_ids)

    def forward_from_embeddings(self, embeddings: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        outputs = self.backbone(inputs_embeds=embeddings, attention_mask=mask)
        first = outputs.last_hidden_state[:, 0]
        return torch.tanh(self.projection(first))

    def forward(self, token_ids: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        outputs = self.backbone(input_ids=token_ids, attention_mask=mask)
        first = outputs.last_hidden_state[:, 0]
        return torch.tanh(self.projection(first))

    @property
    def pad_embedding(self) -> torch.Tensor:
        weight = self.backbone.get_input_embeddings().weight
        return weight[self.pad_id].detach()

    def identity(self) -> dict:
        return {
            "backend": self.backend,
            "model_name": self.model_name,
            "out_dim": self.out_dim,
            "max_len": self.max_len,
            "freeze": self.freeze,
        }


@dataclass
class EncoderConfig:
    backend: str = "hash"
    out_dim: int = 128
    max_len: int = DEFAULT_MAX_LEN
    vocab_size: int = 32768
    embed_dim: int = 32
    piece_len: int = 8
    model_name: str = "bert-base-uncased"
    freeze: bool = False
    cache_dir: str | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


def build_encoder(config: EncoderConfig) -> TextEncoder:
    if config.backend in ("hash", "test"):
        return HashEncoder(
            vocab_size=config.vocab_size,
            embed_dim=config.embed_dim,
            out_dim=config.out_dim,
            max_len=config.max_len,
            piece_len=config.piece_len,
        )
    if config.backend == "pretrained":
        return TransformerEncoder(
            model_name=config.model_name,
            out_dim=config.out_dim,
            max_len=config.max_len,
            freeze=config.freeze,
            cache_dir=config.cache_dir,
        )
    raise ValueError(f"unknown encoder backend {config.backend!r}")


def encoder_from_identity(identity: dict) -> TextEncoder:
    """Rebuild an encoder from the description stored in a checkpoint."""
    backend = identity.get("backend")
    if backend == "hash":
        return HashEncoder(
            vocab_size=identity["vocab_size"],
            embed_dim=identity["embed_dim"],
            out_dim=identity["out_dim"],
            max_len=identity["max_len"],
            piece_len=identity.get("piece_len", 8),
        )
    if backend == "pretrained":
        return TransformerEncoder(
            model_name=identity["model_name"],
            out_dim=identity["out_dim"],
            max_len=identity["max_len"],
            freeze=identity.get("freeze", False),
        )
    raise ValueError(f"unknown encoder backend {backend!r} in checkpoint")
