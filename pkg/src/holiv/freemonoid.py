"""Words in a free monoid over opaque generator symbols.

A word is stored as a tuple of ``(generator, exponent)`` factors with
adjacent generators distinct and exponents positive. The empty tuple is the
identity. Words render as ``"g3^2.g1.g7^4"``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterable, Mapping


@dataclass(frozen=True, order=True)
class FreeWord:
    factors: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "factors", _normalize(self.factors))

    @classmethod
    def gen(cls, g: str, k: int = 1) -> "FreeWord":
        return cls(((g, k),))

    @classmethod
    def from_letters(cls, letters: Iterable[str]) -> "FreeWord":
        return cls(tuple((g, 1) for g in letters))

    @classmethod
    def parse(cls, text: str) -> "FreeWord":
        text = text.strip()
        if text in ("", "1"):
            return cls()
        out = []
        for part in text.split("."):
            g, _, k = part.partition("^")
            out.append((g, int(k) if k else 1))
        return cls(tuple(out))

    def __str__(self) -> str:
        if not self.factors:
            return "1"
        return ".".join(g if k == 1 else f"{g}^{k}" for g, k in self.factors)

    def __mul__(self, other: "FreeWord") -> "FreeWord":
        return concat(self, other)

    def __len__(self) -> int:
        return sum(k for _, k in self.factors)

    def letters(self) -> list[str]:
        return [g for g, k in self.factors for _ in range(k)]

    def generators(self) -> set[str]:
        return {g for g, _ in self.factors}

    def power(self, n: int) -> "FreeWord":
        if n < 0:
            raise ValueError("free monoid has no inverses")
        out = FreeWord()
        for _ in range(n):
            out = concat(out, self)
        return out

    def rotations(self) -> list["FreeWord"]:
        lets = self.letters()
        return [FreeWord.from_letters(lets[i:] + lets[:i]) for i in range(max(1, len(lets)))]


def _normalize(factors) -> tuple[tuple[str, int], ...]:
    out: list[list] = []
    for g, k in factors:
        g = str(g)
        k = int(k)
        if k < 0:
            raise ValueError(f"negative exponent {k} for {g}")
        if k == 0:
            continue
        if any(c in g for c in ".^") or not g:
            raise ValueError(f"invalid generator id {g!r}")
        if out and out[-1][0] == g:
            out[-1][1] += k
        else:
            out.append([g, k])
    return tuple((g, k) for g, k in out)


IDENTITY = FreeWord()


def concat(a: FreeWord, b: FreeWord) -> FreeWord:
    return FreeWord(a.factors + b.factors)


def words_of_length(gens: Iterable[str], n: int) -> list[FreeWord]:
    """All words with exactly ``n`` letters, in lexicographic order of letters."""
    gs = sorted(set(gens))
    return [FreeWord.from_letters(t) for t in product(gs, repeat=n)]


def build_G0(gens: Iterable[FreeWord]) -> set[FreeWord]:
    gs = list(gens)
    out = set(gs)
    for a in gs:
        for b in gs:
            ab = concat(a, b)
            out.add(ab)
            for c in gs:
                out.add(concat(ab, c))
    return out


def build_G0_prime(G0: set[FreeWord], gens: Iterable[FreeWord]) -> set[FreeWord]:
    gs = list(gens)
    return {g for g in G0 if all(concat(h, g) in G0 for h in gs)}


class CharTable(dict):
    """Mapping FreeWord -> complex trace."""

    def __init__(self, values: Mapping[FreeWord, complex] | None = None, dim: int | None = None):
        super().__init__()
        self.dim = dim
        for w, v in (values or {}).items():
            self[w] = v

    def __setitem__(self, w: FreeWord, v: complex) -> None:
        if not isinstance(w, FreeWord):
            raise TypeError("keys must be FreeWord")
        v = complex(v)
        if not w.factors and self.dim is not None and abs(v - self.dim) > 1e-9:
            raise ValueError("character of the empty word must equal the dimension")
        super().__setitem__(w, v)
