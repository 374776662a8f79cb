"""Words in left and right variables.

Indices are 0-based throughout the Python API.  ``Letter("L", i)`` stands for
left multiplication by the i-th left matrix, ``Letter("R", j)`` for right
multiplication by the j-th right matrix.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence


class Letter(NamedTuple):
    side: str
    index: int


def left(i: int) -> Letter:
    return Letter("L", i)


def right(j: int) -> Letter:
    return Letter("R", j)


LRWord = tuple  # tuple[Letter, ...]


def check_lr_word(word: Sequence[Letter], n: int, m: int) -> tuple[Letter, ...]:
    word = tuple(Letter(*t) for t in word)
    if not word:
        raise ValueError("an LR word needs at least one letter")
    for side, idx in word:
        if side == "L":
            bound = n
        elif side == "R":
            bound = m
        else:
            raise ValueError(f"unknown side {side!r}")
        if not 0 <= idx < bound:
            raise IndexError(f"letter {side}{idx} out of range for (n, m) = ({n}, {m})")
    return word


@dataclass(frozen=True, order=True)
class ReducedWord:
    """All left letters followed by all right letters: ``X_{i1}..X_{ip} Y_{j1}..Y_{jq}``."""

    left: tuple[int, ...] = ()
    right: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "left", tuple(int(i) for i in self.left))
        object.__setattr__(self, "right", tuple(int(j) for j in self.right))
        if not self.left and not self.right:
            raise ValueError("reduced word must have p + q >= 1")
        if any(i < 0 for i in self.left + self.right):
            raise ValueError("indices must be non-negative")

    @property
    def degree(self) -> int:
        return len(self.left) + len(self.right)

    def flatten(self, n: int) -> tuple[int, ...]:
        """Letter sequence of the tracial model, right indices reversed and shifted by ``n``."""
        return self.left + tuple(n + j for j in reversed(self.right))

    def as_lr_word(self) -> tuple[Letter, ...]:
        return tuple(left(i) for i in self.left) + tuple(right(j) for j in self.right)

    def check(self, n: int, m: int) -> None:
        if any(i >= n for i in self.left) or any(j >= m for j in self.right):
            raise IndexError(f"word {self} out of range for (n, m) = ({n}, {m})")

    def __str__(self) -> str:
        xs = "".join(f"X{i + 1}" for i in self.left)
        ys = "".join(f"Y{j + 1}" for j in self.right)
        return f"{xs}|{ys}"


def reduce_lr_word(word: Sequence[Letter]) -> ReducedWord:
    """Move every right letter past the left letters, keeping each side's order."""
    word = tuple(Letter(*t) for t in word)
    return ReducedWord(
        tuple(i for s, i in word if s == "L"),
        tuple(j for s, j in word if s == "R"),
    )


def reduced_words(n: int, m: int, max_degree: int) -> list[ReducedWord]:
    """Every reduced word with ``1 <= p + q <= max_degree``, ordered by degree."""
    out = []
    for deg in range(1, max_degree + 1):
        for p in range(deg, -1, -1):
            q = deg - p
            if (p and not n) or (q and not m):
                continue
            for li in itertools.product(range(n), repeat=p):
                for rj in itertools.product(range(m), repeat=q):
                    out.append(ReducedWord(li, rj))
    return out


def interleaved_words(k: int, max_degree: int) -> Iterator[tuple[int, ...]]:
    """Every word over ``k`` letters of length ``1..max_degree``."""
    for deg in range(1, max_degree + 1):
        yield from itertools.product(range(k), repeat=deg)


def parse_reduced_word(text: str) -> ReducedWord:
    """Inverse of ``str(ReducedWord)``, e.g. ``"X1X2|Y1"``."""
    lhs, _, rhs = text.partition("|")

    def indices(part: str, letter: str) -> tuple[int, ...]:
        if not part:
            return ()
        chunks = part.split(letter)
        if chunks[0] != "":
            raise ValueError(f"malformed word {text!r}")
        return tuple(int(c) - 1 for c in chunks[1:])

    return ReducedWord(indices(lhs, "X"), indices(rhs, "Y"))
