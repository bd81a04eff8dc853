"""Counter-based, splittable random streams.

Every run is addressed by (seed, replica). Peeling events, pocket sizes, and
each pocket's interior filling get disjoint Philox streams so that trace-only
runs and map-materializing runs of the same (seed, replica) consume identical
event randomness regardless of how much extra randomness the materialization
needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

_EVENTS = 0
_SIZES = 1
_POCKETS = 2
_EXTRA = 3


@dataclass(frozen=True)
class RunStreams:
    seed: int
    replica: int = 0

    def _gen(self, *key: int) -> Generator:
        return Generator(Philox(SeedSequence(self.seed, spawn_key=(self.replica, *key))))

    def events(self) -> Generator:
        """Peeling event decisions; identical across trace and map runs."""
        return self._gen(_EVENTS)

    def sizes(self) -> Generator:
        """Swallowed-pocket size draws (trace-only runs)."""
        return self._gen(_SIZES)

    def pocket(self, index: int) -> Generator:
        """Interior filling of the index-th swallowed pocket (map runs)."""
        return self._gen(_POCKETS, index)

    def extra(self, tag: int) -> Generator:
        """Auxiliary stream for module-specific needs."""
        return self._gen(_EXTRA, tag)


def coerce_streams(rng, replica: int = 0) -> RunStreams:
    """Accept an int seed, a SeedSequence, or RunStreams."""
    if isinstance(rng, RunStreams):
        return rng
    if isinstance(rng, SeedSequence):
        ent = rng.entropy if isinstance(rng.entropy, int) else int(np.asarray(rng.entropy).ravel()[0])
        return RunStreams(ent, replica)
    if isinstance(rng, (int, np.integer)):
        return RunStreams(int(rng), replica)
    raise TypeError(
        "expected an int seed, numpy SeedSequence, or RunStreams; "
        f"got {type(rng).__name__} (plain Generators cannot be split deterministically)"
    )
