"""The simplex category at finite truncation.

Objects are the finite ordinals [n] = {0, ..., n}; morphisms are weakly
increasing maps.  Everything downstream is built on top of the hom-set
enumeration, the unique epi-mono factorisation, and the slice categories
with their post-composition functoriality.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache


class CompositionError(ValueError):
    """Endpoints of the maps being composed do not line up."""


@dataclass(frozen=True, order=True)
class MonotoneMap:
    """A weakly increasing function [source] -> [target].

    ``values[i]`` is the image of i; the tuple has length ``source + 1``
    and every entry lies in ``0 .. target``.
    """

    source: int
    target: int
    values: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.source < 0 or self.target < 0:
            raise ValueError("ordinal indices must be non-negative")
        if len(self.values) != self.source + 1:
            raise ValueError("value tuple must have length source + 1")
        if any(v < 0 or v > self.target for v in self.values):
            raise ValueError("values must lie in 0..target")
        if any(a > b for a, b in zip(self.values, self.values[1:])):
            raise ValueError("values must be weakly increasing")

    def __call__(self, i: int) -> int:
        return self.values[i]

    @property
    def label(self) -> str:
        return ",".join(str(v) for v in self.values)

    def is_identity(self) -> bool:
        return self.source == self.target and self.values == tuple(range(self.source + 1))

    def is_injective(self) -> bool:
        return all(a < b for a, b in zip(self.values, self.values[1:]))

    def is_surjective(self) -> bool:
        return set(self.values) == set(range(self.target + 1))

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"MonotoneMap([{self.source}]->[{self.target}]: {self.label})"


def identity(n: int) -> MonotoneMap:
    return MonotoneMap(n, n, tuple(range(n + 1)))


def constant(n: int, target: int, value: int) -> MonotoneMap:
    """The constant map [n] -> [target] at ``value``."""
    return MonotoneMap(n, target, (value,) * (n + 1))


def compose(f: MonotoneMap, g: MonotoneMap) -> MonotoneMap:
    """Pointwise composite f after g."""
    if g.target != f.source:
        raise CompositionError(
            f"cannot compose [{g.source}]->[{g.target}] into [{f.source}]->[{f.target}]"
        )
    return MonotoneMap(g.source, f.target, tuple(f.values[v] for v in g.values))


@lru_cache(maxsize=None)
def enumerate_monotone(n: int, m: int) -> tuple[MonotoneMap, ...]:
    """All weakly increasing maps [n] -> [m] in lexicographic order."""
    if n < 0 or m < 0:
        raise ValueError("ordinal indices must be non-negative")
    return tuple(
        MonotoneMap(n, m, values)
        for values in itertools.combinations_with_replacement(range(m + 1), n + 1)
    )


@lru_cache(maxsize=None)
def enumerate_surjections(n: int, m: int) -> tuple[MonotoneMap, ...]:
    return tuple(f for f in enumerate_monotone(n, m) if f.is_surjective())


def epi_mono_factor(f: MonotoneMap) -> tuple[MonotoneMap, MonotoneMap]:
    """The unique factorisation f = injection . surjection through the image."""
    image = sorted(set(f.values))
    k = len(image) - 1
    rank = {v: i for i, v in enumerate(image)}
    surjection = MonotoneMap(f.source, k, tuple(rank[v] for v in f.values))
    injection = MonotoneMap(k, f.target, tuple(image))
    return surjection, injection


def coface(n: int, i: int) -> MonotoneMap:
    """The injection [n-1] -> [n] that omits i."""
    if n < 1 or not 0 <= i <= n:
        raise ValueError(f"no coface ({n}, {i})")
    return MonotoneMap(n - 1, n, tuple(v if v < i else v + 1 for v in range(n)))


def codegeneracy(n: int, i: int) -> MonotoneMap:
    """The surjection [n+1] -> [n] that repeats i."""
    if n < 0 or not 0 <= i <= n:
        raise ValueError(f"no codegeneracy ({n}, {i})")
    return MonotoneMap(n + 1, n, tuple(v if v <= i else v - 1 for v in range(n + 2)))


@lru_cache(maxsize=None)
def generator_chain(f: MonotoneMap) -> tuple[MonotoneMap, ...]:
    """A canonical factorisation of f into cofaces and codegeneracies.

    Returns the factors outermost first, so ``f`` equals the left-to-right
    composite ``chain[0] . chain[1] . ... . chain[-1]``.  Identities return
    the empty chain.
    """
    surjection, injection = epi_mono_factor(f)
    chain: list[MonotoneMap] = []
    mu = injection
    while not mu.is_identity():
        missed = max(v for v in range(mu.target + 1) if v not in set(mu.values))
        chain.append(coface(mu.target, missed))
        mu = MonotoneMap(
            mu.source, mu.target - 1, tuple(v if v < missed else v - 1 for v in mu.values)
        )
    sigma = surjection
    tail: list[MonotoneMap] = []
    while not sigma.is_identity():
        j = next(x for x in range(sigma.source) if sigma.values[x] == sigma.values[x + 1])
        tail.append(codegeneracy(sigma.source - 1, j))
        sigma = MonotoneMap(
            sigma.source - 1,
            sigma.target,
            sigma.values[: j + 1] + sigma.values[j + 2 :],
        )
    # tail was produced innermost-first; the chain convention is outermost-first
    return tuple(chain) + tuple(reversed(tail))


@dataclass(frozen=True, order=True)
class SliceObject:
    """An object of the slice category over [p]: a map [n] -> [p]."""

    anchor: MonotoneMap

    @property
    def level(self) -> int:
        return self.anchor.source

    @property
    def over(self) -> int:
        return self.anchor.target


@dataclass(frozen=True)
class SliceMorphism:
    """A commuting triangle: mediator delta with from.anchor = to.anchor . delta."""

    mediator: MonotoneMap
    from_obj: SliceObject
    to_obj: SliceObject

    def __post_init__(self) -> None:
        if self.from_obj.over != self.to_obj.over:
            raise CompositionError("slice morphism must stay over a fixed ordinal")
        if compose(self.to_obj.anchor, self.mediator) != self.from_obj.anchor:
            raise CompositionError("slice triangle does not commute")


def slice_objects(p: int, level_bound: int) -> tuple[SliceObject, ...]:
    return tuple(
        SliceObject(f)
        for n in range(level_bound + 1)
        for f in enumerate_monotone(n, p)
    )


def slice_generators(p: int, level_bound: int) -> tuple[SliceMorphism, ...]:
    """All slice morphisms whose mediator is a coface or codegeneracy."""
    out: list[SliceMorphism] = []
    for obj in slice_objects(p, level_bound):
        n = obj.level
        for i in range(n + 1):
            if n >= 1:
                delta = coface(n, i)
                out.append(SliceMorphism(delta, SliceObject(compose(obj.anchor, delta)), obj))
            if n + 1 <= level_bound:
                delta = codegeneracy(n, i)
                out.append(SliceMorphism(delta, SliceObject(compose(obj.anchor, delta)), obj))
    return tuple(out)


def slice_category(p: int, level_bound: int) -> tuple[tuple[SliceObject, ...], tuple[SliceMorphism, ...]]:
    """Objects and generating morphisms of the slice over [p] up to level_bound."""
    if p < 0 or level_bound < 0:
        raise ValueError("bounds must be non-negative")
    return slice_objects(p, level_bound), slice_generators(p, level_bound)


def postcompose(delta: MonotoneMap):
    """The functor between slice categories induced by post-composition with delta.

    Sends an anchor f over the source ordinal to delta . f over the target;
    mediators are untouched.
    """

    def on_object(obj: SliceObject) -> SliceObject:
        return SliceObject(compose(delta, obj.anchor))

    def on_morphism(mor: SliceMorphism) -> SliceMorphism:
        return SliceMorphism(mor.mediator, on_object(mor.from_obj), on_object(mor.to_obj))

    on_object.on_morphism = on_morphism  # type: ignore[attr-defined]
    return on_object
