"""Finite probability vectors over named discrete domains."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainMismatch, IndexOutOfRange

PROB_TOL = 1e-9


@dataclass(frozen=True)
class Distribution:
    """A probability vector over an ordered list of category labels.

    Outcomes may be any hashable labels (ints, strings, tuples). Probabilities
    must be nonnegative and sum to 1 within 1e-9.
    """

    outcomes: tuple
    probs: tuple = field(repr=False)

    def __post_init__(self):
        outcomes = tuple(self.outcomes)
        probs = tuple(float(p) for p in self.probs)
        if len(outcomes) != len(probs) or len(outcomes) < 1:
            raise ValueError("outcomes and probs must have equal length >= 1")
        if any(p < 0.0 for p in probs):
            raise ValueError("probabilities must be nonnegative")
        if abs(sum(probs) - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {sum(probs)!r}, not 1")
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "probs", probs)

    def __len__(self) -> int:
        return len(self.outcomes)

    def prob_of(self, index: int) -> float:
        if not 0 <= index < len(self.probs):
            raise IndexOutOfRange(f"outcome index {index} out of range")
        return self.probs[index]

    def index_of(self, outcome) -> int:
        try:
            return self.outcomes.index(outcome)
        except ValueError:
            raise IndexOutOfRange(f"unknown outcome {outcome!r}") from None

    def check_same_domain(self, other: "Distribution") -> None:
        if self.outcomes != other.outcomes:
            raise DomainMismatch("distributions are over different outcome lists")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)

    def sample_indices(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.choice(len(self.probs), size=size, p=self.as_array())

    def to_json(self) -> dict:
        return {"outcomes": list(self.outcomes), "probs": list(self.probs)}

    @classmethod
    def from_json(cls, data: dict) -> "Distribution":
        return cls(tuple(data["outcomes"]), tuple(data["probs"]))

    @classmethod
    def from_probs(cls, probs: Sequence[float]) -> "Distribution":
        """Distribution over integer labels 0..k-1."""
        return cls(tuple(range(len(probs))), tuple(probs))

    @classmethod
    def uniform(cls, k: int) -> "Distribution":
        return cls.from_probs([1.0 / k] * k)
