"""Hand-crafted token features encoded as short trainable vectors.

Six feature families are computed from the token surface; every distinct
feature value owns a short random vector of the family's dimensionality,
and a token's feature representation is the concatenation of its six
sub-vectors, 146 coordinates in total:

    case pattern            8
    digit/punct make-up     8
    length bucket          10
    3-char prefix          40
    3-char suffix          40
    coarse token class     40

The vectors are model parameters: values seen when the encoder is built
get table rows that training updates; values first seen later fall back
to a deterministic per-(family, value, seed) random vector.  All families
except the case pattern are case-insensitive, so surfaces differing only
in capitalization differ only in the case sub-vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .embeddings import hashed_uniform

TOTAL_DIM = 146


def case_pattern(surface: str) -> str:
    letters = [ch for ch in surface if ch.isalpha()]
    if not letters:
        return "no-letters"
    if all(ch.islower() for ch in letters):
        return "lower"
    if all(ch.isupper() for ch in letters):
        return "upper"
    if surface[0].isupper() and all(ch.islower() for ch in letters[1:]):
        return "capitalized"
    return "mixed-case"


def digit_punct(surface: str) -> str:
    has_digit = any(ch.isdigit() for ch in surface)
    has_punct = any(not ch.isalnum() for ch in surface)
    has_alpha = any(ch.isalpha() for ch in surface)
    return f"d{int(has_digit)}p{int(has_punct)}a{int(has_alpha)}"


def length_bucket(surface: str) -> str:
    return f"len{min(len(surface), 10)}"


def prefix3(surface: str) -> str:
    return surface.lower()[:3]


def suffix3(surface: str) -> str:
    return surface.lower()[-3:]


def token_class(surface: str) -> str:
    # Coarse class plus surface-level flags; deliberately case-insensitive.
    s = surface.lower()
    has_alpha = any(ch.isalpha() for ch in s)
    has_digit = any(ch.isdigit() for ch in s)
    if has_alpha and "." in s:
        cls = "abbrev"
    elif has_alpha and has_digit:
        cls = "mixed"
    elif has_digit:
        cls = "number"
    elif has_alpha:
        cls = "word"
    else:
        cls = "symbol"
    if "-" in s:
        cls += "+hyphen"
    return cls


FAMILY_SPECS: tuple[tuple[str, int, Callable[[str], str]], ...] = (
    ("case", 8, case_pattern),
    ("digit-punct", 8, digit_punct),
    ("length", 10, length_bucket),
    ("prefix3", 40, prefix3),
    ("suffix3", 40, suffix3),
    ("token-class", 40, token_class),
)


@dataclass
class FeatureFamily:
    """One feature family: its value table and trainable vectors."""

    name: str
    dim: int
    fn: Callable[[str], str]
    values: list[str]
    index: dict[str, int]
    table: np.ndarray  # (len(values), dim)

    def row_for(self, surface: str) -> int | None:
        return self.index.get(self.fn(surface))


@dataclass
class FeatureEncoder:
    """All six families plus the seed for unseen-value fallbacks."""

    families: list[FeatureFamily]
    seed: int

    @property
    def total_dim(self) -> int:
        return sum(f.dim for f in self.families)

    def __post_init__(self):
        if self.total_dim != TOTAL_DIM:
            raise ValueError(f"feature families must total {TOTAL_DIM} dims, got {self.total_dim}")

    def vector(self, family: FeatureFamily, surface: str) -> np.ndarray:
        row = family.row_for(surface)
        if row is not None:
            return family.table[row]
        return hashed_uniform(("feature", family.name, family.fn(surface)), self.seed, family.dim)


def build_feature_encoder(surfaces: Iterable[str], seed: int) -> FeatureEncoder:
    """Create an encoder whose tables cover every value seen in ``surfaces``.

    Table vectors are initialized uniformly in [-1, 1] from the same
    per-value generator that serves unseen values later, so building the
    encoder from a superset of surfaces never changes existing vectors.
    """
    surfaces = list(surfaces)
    families = []
    for name, dim, fn in FAMILY_SPECS:
        values = list(dict.fromkeys(fn(s) for s in surfaces))
        table = np.stack(
            [hashed_uniform(("feature", name, v), seed, dim) for v in values]
        ) if values else np.zeros((0, dim))
        families.append(FeatureFamily(name, dim, fn, values, {v: i for i, v in enumerate(values)}, table))
    return FeatureEncoder(families, seed)


def encode_surface(surface: str, encoder: FeatureEncoder) -> np.ndarray:
    """Concatenated 146-D feature vector for one token surface."""
    return np.concatenate([encoder.vector(f, surface) for f in encoder.families])


def encode_features(sentence, position: int, encoder: FeatureEncoder) -> np.ndarray:
    """Feature vector for the token at ``position``.

    All families are pure functions of the surface, so tokens with equal
    surfaces get equal vectors regardless of position.
    """
    return encode_surface(sentence.tokens[position].surface, encoder)
