"""Finite truncated presheaves in one, two, or three simplicial directions.

A presheaf stores its level sets as tuples of opaque string labels and its
contravariant actions for the generating cofaces and codegeneracies of each
direction.  Arbitrary monotone maps act through the canonical epi-mono
factorisation; derived actions are memoised per value.

Index convention for arity 3: tuples are (k, n, l) with k the fibration
direction, n the base simplicial direction and l the space direction.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Mapping

from .simplex import (
    MonotoneMap,
    coface,
    codegeneracy,
    compose,
    enumerate_monotone,
    generator_chain,
    identity,
)

AXIS_FIB = 0
AXIS_BASE = 1
AXIS_SPACE = 2

REPRESENTABLE_AXES = {"phi": AXIS_FIB, "F": AXIS_BASE, "Delta": AXIS_SPACE}


class ArityMismatchError(ValueError):
    """Operands do not have the same number of simplicial directions."""


class BoundMismatchError(ValueError):
    """Operands have incompatible truncation bounds."""


class StructureError(ValueError):
    """A level or action table is malformed."""


class NaturalityError(ValueError):
    """A map's components fail to commute with a generator action."""


@dataclass(frozen=True)
class Violation:
    """A located failure of a simplicial identity."""

    kind: str
    index: tuple[int, ...]
    detail: str

    def __str__(self) -> str:
        return f"{self.kind} at {self.index}: {self.detail}"


def level_indices(bounds: tuple[int, ...]) -> tuple[tuple[int, ...], ...]:
    return tuple(itertools.product(*(range(b + 1) for b in bounds)))


def _replace(idx: tuple[int, ...], axis: int, value: int) -> tuple[int, ...]:
    out = list(idx)
    out[axis] = value
    return tuple(out)


def _axis_generators(level: int, bound: int) -> tuple[MonotoneMap, ...]:
    """Generating maps acting on a level of the given height within the bound."""
    gens: list[MonotoneMap] = []
    if level >= 1:
        gens.extend(coface(level, i) for i in range(level + 1))
    if level + 1 <= bound:
        gens.extend(codegeneracy(level, i) for i in range(level + 1))
    return tuple(gens)


class TruncatedPresheaf:
    """A finite multi-index presheaf given by level sets and generator actions."""

    __slots__ = ("arity", "bounds", "levels", "actions", "_derived", "_hash")

    def __init__(
        self,
        arity: int,
        bounds: tuple[int, ...],
        levels: Mapping[tuple[int, ...], Iterable[str]],
        actions: Mapping[tuple[int, MonotoneMap, tuple[int, ...]], Mapping[str, str]],
    ) -> None:
        if arity not in (1, 2, 3):
            raise ArityMismatchError("arity must be 1, 2 or 3")
        bounds = tuple(bounds)
        if len(bounds) != arity or any(b < 0 for b in bounds):
            raise BoundMismatchError(f"bad bounds {bounds} for arity {arity}")
        object.__setattr__(self, "arity", arity)
        object.__setattr__(self, "bounds", bounds)
        stored_levels: dict[tuple[int, ...], tuple[str, ...]] = {}
        for idx in level_indices(bounds):
            if idx not in levels:
                raise StructureError(f"missing level {idx}")
            labels = tuple(sorted(levels[idx]))
            if len(set(labels)) != len(labels):
                raise StructureError(f"duplicate labels at level {idx}")
            stored_levels[idx] = labels
        object.__setattr__(self, "levels", stored_levels)

        stored_actions: dict[tuple[int, MonotoneMap, tuple[int, ...]], dict[str, str]] = {}
        for idx in level_indices(bounds):
            for axis in range(arity):
                for gen in _axis_generators(idx[axis], bounds[axis]):
                    key = (axis, gen, idx)
                    if key not in actions:
                        raise StructureError(f"missing action {axis} {gen.label} at {idx}")
                    table = dict(actions[key])
                    source_labels = stored_levels[idx]
                    target_labels = stored_levels[_replace(idx, axis, gen.source)]
                    if set(table) != set(source_labels):
                        raise StructureError(f"action domain mismatch {axis} {gen.label} at {idx}")
                    if any(v not in target_labels for v in table.values()):
                        raise StructureError(f"action value escapes level {axis} {gen.label} at {idx}")
                    stored_actions[key] = table
        object.__setattr__(self, "actions", stored_actions)
        object.__setattr__(self, "_derived", {})
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):  # values are immutable once built
        raise AttributeError("TruncatedPresheaf is immutable")

    def level(self, idx: tuple[int, ...]) -> tuple[str, ...]:
        return self.levels[idx]

    def action(self, axis: int, f: MonotoneMap, idx: tuple[int, ...]) -> dict[str, str]:
        """The action of an arbitrary monotone map f at the level idx.

        Requires idx[axis] == f.target; the result maps level idx to the
        level with the axis entry replaced by f.source.
        """
        if idx[axis] != f.target:
            raise BoundMismatchError(f"map {f.label} does not act at {idx} on axis {axis}")
        if f.source > self.bounds[axis]:
            raise BoundMismatchError(f"map {f.label} leaves the truncation")
        key = (axis, f, idx)
        if key in self.actions:
            return self.actions[key]
        cached = self._derived.get(key)
        if cached is not None:
            return cached
        table = {x: x for x in self.levels[idx]}
        here = idx
        for factor in generator_chain(f):
            step = self.actions[(axis, factor, here)]
            table = {x: step[y] for x, y in table.items()}
            here = _replace(here, axis, factor.source)
        self._derived[key] = table
        return table

    def apply(self, axis: int, f: MonotoneMap, idx: tuple[int, ...], label: str) -> str:
        return self.action(axis, f, idx)[label]

    def _encode(self):
        return (
            self.arity,
            self.bounds,
            tuple(sorted(self.levels.items())),
            tuple(sorted((a, g, i, tuple(sorted(t.items()))) for (a, g, i), t in self.actions.items())),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, TruncatedPresheaf):
            return NotImplemented
        return self._encode() == other._encode()

    def __hash__(self) -> int:
        if self._hash is None:
            object.__setattr__(self, "_hash", hash(self._encode()))
        return self._hash

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        sizes = {idx: len(v) for idx, v in sorted(self.levels.items())}
        return f"TruncatedPresheaf(arity={self.arity}, bounds={self.bounds}, sizes={sizes})"

    def is_empty(self) -> bool:
        return all(not v for v in self.levels.values())


def validate(x: TruncatedPresheaf) -> Violation | None:
    """Check every simplicial identity among generator actions within bounds.

    Returns None when the presheaf is a genuine functor on the truncated
    index category, otherwise the first violated identity in a fixed
    deterministic order.
    """
    for idx in level_indices(x.bounds):
        for axis in range(x.arity):
            for outer in _axis_generators(idx[axis], x.bounds[axis]):
                mid = _replace(idx, axis, outer.source)
                for inner in _axis_generators(mid[axis], x.bounds[axis]):
                    composite = compose(outer, inner)
                    if composite.source > x.bounds[axis]:
                        continue
                    via_chain = x.action(axis, composite, idx)
                    outer_table = x.actions[(axis, outer, idx)]
                    inner_table = x.actions[(axis, inner, mid)]
                    for label in x.levels[idx]:
                        stepped = inner_table[outer_table[label]]
                        if stepped != via_chain[label]:
                            return Violation(
                                "composite",
                                idx,
                                f"axis {axis}: {inner.label} after {outer.label} on '{label}' "
                                f"gives '{stepped}' but the composite {composite.label} gives "
                                f"'{via_chain[label]}'",
                            )
        for a1 in range(x.arity):
            for a2 in range(a1 + 1, x.arity):
                for g1 in _axis_generators(idx[a1], x.bounds[a1]):
                    idx_mid = _replace(idx, a1, g1.source)
                    for g2 in _axis_generators(idx[a2], x.bounds[a2]):
                        first = x.actions[(a1, g1, idx)]
                        then = x.actions[(a2, g2, idx_mid)]
                        other_first = x.actions[(a2, g2, idx)]
                        other_then = x.actions[(a1, g1, _replace(idx, a2, g2.source))]
                        for label in x.levels[idx]:
                            if then[first[label]] != other_then[other_first[label]]:
                                return Violation(
                                    "commute",
                                    idx,
                                    f"axes {a1}/{a2}: {g1.label} and {g2.label} disagree on '{label}'",
                                )
    return None


class PresheafMap:
    """A natural transformation between presheaves of equal arity and bounds."""

    __slots__ = ("domain", "codomain", "components")

    def __init__(
        self,
        domain: TruncatedPresheaf,
        codomain: TruncatedPresheaf,
        components: Mapping[tuple[int, ...], Mapping[str, str]],
        check_natural: bool = True,
    ) -> None:
        if domain.arity != codomain.arity:
            raise ArityMismatchError("map endpoints must share arity")
        if domain.bounds != codomain.bounds:
            raise BoundMismatchError("map endpoints must share bounds")
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "codomain", codomain)
        stored: dict[tuple[int, ...], dict[str, str]] = {}
        for idx in level_indices(domain.bounds):
            if idx not in components:
                raise StructureError(f"missing component at {idx}")
            table = dict(components[idx])
            if set(table) != set(domain.levels[idx]):
                raise StructureError(f"component domain mismatch at {idx}")
            if any(v not in codomain.levels[idx] for v in table.values()):
                raise StructureError(f"component value escapes level at {idx}")
            stored[idx] = table
        object.__setattr__(self, "components", stored)
        if check_natural:
            bad = self.naturality_violation()
            if bad is not None:
                raise NaturalityError(str(bad))

    def __setattr__(self, name, value):
        raise AttributeError("PresheafMap is immutable")

    def naturality_violation(self) -> Violation | None:
        for (axis, gen, idx), table in sorted(self.domain.actions.items(), key=lambda kv: (kv[0][2], kv[0][0], kv[0][1])):
            target_idx = _replace(idx, axis, gen.source)
            cod_table = self.codomain.actions[(axis, gen, idx)]
            for label in self.domain.levels[idx]:
                if self.components[target_idx][table[label]] != cod_table[self.components[idx][label]]:
                    return Violation(
                        "naturality",
                        idx,
                        f"axis {axis} generator {gen.label} on '{label}'",
                    )
        return None

    def __call__(self, idx: tuple[int, ...], label: str) -> str:
        return self.components[idx][label]

    def _encode(self):
        return (
            self.domain._encode(),
            self.codomain._encode(),
            tuple(sorted((i, tuple(sorted(t.items()))) for i, t in self.components.items())),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, PresheafMap):
            return NotImplemented
        return self._encode() == other._encode()

    def __hash__(self) -> int:
        return hash(self._encode())

    def is_bijective(self) -> bool:
        return all(
            len(set(t.values())) == len(t) == len(self.codomain.levels[idx])
            for idx, t in self.components.items()
        )


def identity_map(x: TruncatedPresheaf) -> PresheafMap:
    return PresheafMap(
        x, x, {idx: {l: l for l in x.levels[idx]} for idx in x.levels}, check_natural=False
    )


def compose_maps(f: PresheafMap, g: PresheafMap) -> PresheafMap:
    """The composite f after g."""
    if g.codomain != f.domain:
        raise BoundMismatchError("maps are not composable")
    return PresheafMap(
        g.domain,
        f.codomain,
        {idx: {l: f.components[idx][v] for l, v in t.items()} for idx, t in g.components.items()},
        check_natural=False,
    )


def terminal(arity: int, bounds: tuple[int, ...]) -> TruncatedPresheaf:
    idxs = level_indices(tuple(bounds))
    levels = {idx: ("*",) for idx in idxs}
    actions = {}
    for idx in idxs:
        for axis in range(arity):
            for gen in _axis_generators(idx[axis], bounds[axis]):
                actions[(axis, gen, idx)] = {"*": "*"}
    return TruncatedPresheaf(arity, tuple(bounds), levels, actions)


def empty_presheaf(arity: int, bounds: tuple[int, ...]) -> TruncatedPresheaf:
    idxs = level_indices(tuple(bounds))
    levels = {idx: () for idx in idxs}
    actions = {}
    for idx in idxs:
        for axis in range(arity):
            for gen in _axis_generators(idx[axis], bounds[axis]):
                actions[(axis, gen, idx)] = {}
    return TruncatedPresheaf(arity, tuple(bounds), levels, actions)


def terminal_map(x: TruncatedPresheaf) -> PresheafMap:
    point = terminal(x.arity, x.bounds)
    return PresheafMap(
        x, point, {idx: {l: "*" for l in x.levels[idx]} for idx in x.levels}, check_natural=False
    )


def representable(kind: str, r: int, bounds: tuple[int, ...]) -> TruncatedPresheaf:
    """The free arity-3 presheaf on [r] in the named direction.

    kind "phi" is free in the fibration direction, "F" in the base
    direction, "Delta" in the space direction; the two remaining
    directions act trivially.
    """
    if kind not in REPRESENTABLE_AXES:
        raise ValueError(f"unknown representable kind {kind!r}")
    if r < 0:
        raise ValueError("r must be non-negative")
    axis = REPRESENTABLE_AXES[kind]
    bounds = tuple(bounds)
    if len(bounds) != 3:
        raise BoundMismatchError("representables are arity-3")
    levels = {}
    actions = {}
    for idx in level_indices(bounds):
        homs = enumerate_monotone(idx[axis], r)
        levels[idx] = tuple(f.label for f in homs)
        for a in range(3):
            for gen in _axis_generators(idx[a], bounds[a]):
                if a == axis:
                    actions[(a, gen, idx)] = {f.label: compose(f, gen).label for f in homs}
                else:
                    actions[(a, gen, idx)] = {f.label: f.label for f in homs}
    return TruncatedPresheaf(3, bounds, levels, actions)


def pair_label(a: str, b: str) -> str:
    return f"({a}|{b})"


def product(x: TruncatedPresheaf, y: TruncatedPresheaf) -> TruncatedPresheaf:
    """Level-wise cartesian product with component-wise actions."""
    if x.arity != y.arity:
        raise ArityMismatchError("product operands must share arity")
    if x.bounds != y.bounds:
        raise BoundMismatchError("product operands must share bounds")
    levels = {
        idx: tuple(pair_label(a, b) for a in x.levels[idx] for b in y.levels[idx])
        for idx in level_indices(x.bounds)
    }
    actions = {}
    for (axis, gen, idx), tx in x.actions.items():
        ty = y.actions[(axis, gen, idx)]
        actions[(axis, gen, idx)] = {
            pair_label(a, b): pair_label(tx[a], ty[b])
            for a in x.levels[idx]
            for b in y.levels[idx]
        }
    return TruncatedPresheaf(x.arity, x.bounds, levels, actions)


def product_projections(x: TruncatedPresheaf, y: TruncatedPresheaf) -> tuple[TruncatedPresheaf, PresheafMap, PresheafMap]:
    p = product(x, y)
    first = {
        idx: {pair_label(a, b): a for a in x.levels[idx] for b in y.levels[idx]}
        for idx in level_indices(x.bounds)
    }
    second = {
        idx: {pair_label(a, b): b for a in x.levels[idx] for b in y.levels[idx]}
        for idx in level_indices(x.bounds)
    }
    return p, PresheafMap(p, x, first, check_natural=False), PresheafMap(p, y, second, check_natural=False)


def pullback(f: PresheafMap, g: PresheafMap) -> tuple[TruncatedPresheaf, PresheafMap, PresheafMap]:
    """The level-wise fibered product of f and g over their common codomain."""
    if f.codomain != g.codomain:
        raise BoundMismatchError("pullback legs must share a codomain")
    x, y = f.domain, g.domain
    levels = {}
    for idx in level_indices(x.bounds):
        levels[idx] = tuple(
            pair_label(a, b)
            for a in x.levels[idx]
            for b in y.levels[idx]
            if f.components[idx][a] == g.components[idx][b]
        )
    actions = {}
    for (axis, gen, idx), tx in x.actions.items():
        ty = y.actions[(axis, gen, idx)]
        actions[(axis, gen, idx)] = {
            label: pair_label(tx[a], ty[b])
            for label, (a, b) in _pullback_pairs(levels[idx], x.levels[idx], y.levels[idx])
        }
    p = TruncatedPresheaf(x.arity, x.bounds, levels, actions)
    proj1 = {
        idx: {label: a for label, (a, b) in _pullback_pairs(levels[idx], x.levels[idx], y.levels[idx])}
        for idx in level_indices(x.bounds)
    }
    proj2 = {
        idx: {label: b for label, (a, b) in _pullback_pairs(levels[idx], x.levels[idx], y.levels[idx])}
        for idx in level_indices(x.bounds)
    }
    return p, PresheafMap(p, x, proj1, check_natural=False), PresheafMap(p, y, proj2, check_natural=False)


def _pullback_pairs(labels, x_labels, y_labels):
    decode = {}
    for a in x_labels:
        for b in y_labels:
            decode[pair_label(a, b)] = (a, b)
    return [(label, decode[label]) for label in labels]


def standard_embed(x: TruncatedPresheaf, k_bound: int) -> TruncatedPresheaf:
    """Regard an arity-2 presheaf as arity-3, constant in the fibration direction."""
    if x.arity != 2:
        raise ArityMismatchError("standard_embed expects an arity-2 presheaf")
    if k_bound < 0:
        raise BoundMismatchError("k bound must be non-negative")
    bounds = (k_bound,) + x.bounds
    levels = {}
    actions = {}
    for idx in level_indices(bounds):
        k, n, l = idx
        labels = x.levels[(n, l)]
        levels[idx] = labels
        for gen in _axis_generators(k, k_bound):
            actions[(AXIS_FIB, gen, idx)] = {a: a for a in labels}
        for gen in _axis_generators(n, x.bounds[0]):
            actions[(AXIS_BASE, gen, idx)] = dict(x.actions[(0, gen, (n, l))])
        for gen in _axis_generators(l, x.bounds[1]):
            actions[(AXIS_SPACE, gen, idx)] = dict(x.actions[(1, gen, (n, l))])
    return TruncatedPresheaf(3, bounds, levels, actions)


def delta_diag(x: TruncatedPresheaf) -> TruncatedPresheaf:
    """Merge the fibration and base directions of an arity-3 presheaf diagonally."""
    if x.arity != 3:
        raise ArityMismatchError("delta_diag expects an arity-3 presheaf")
    if x.bounds[AXIS_FIB] != x.bounds[AXIS_BASE]:
        raise BoundMismatchError("diagonal needs equal bounds in the merged directions")
    bounds = (x.bounds[AXIS_BASE], x.bounds[AXIS_SPACE])
    levels = {}
    actions = {}
    for n in range(bounds[0] + 1):
        for l in range(bounds[1] + 1):
            levels[(n, l)] = x.levels[(n, n, l)]
            for gen in _axis_generators(n, bounds[0]):
                first = x.actions[(AXIS_FIB, gen, (n, n, l))]
                then = x.actions[(AXIS_BASE, gen, (gen.source, n, l))]
                actions[(0, gen, (n, l))] = {a: then[first[a]] for a in levels[(n, l)]}
            for gen in _axis_generators(l, bounds[1]):
                actions[(1, gen, (n, l))] = dict(x.actions[(AXIS_SPACE, gen, (n, n, l))])
    return TruncatedPresheaf(2, bounds, levels, actions)


def fiber_labels(x: PresheafMap, idx: tuple[int, ...], base_label: str) -> tuple[str, ...]:
    """Labels of the strict fiber of x over one base element at one level."""
    return tuple(l for l in x.domain.levels[idx] if x.components[idx][l] == base_label)


def hom_over(base: TruncatedPresheaf, a: PresheafMap, x: PresheafMap) -> tuple[PresheafMap, ...]:
    """All presheaf maps from a.domain to x.domain commuting with the anchors.

    Solved as a finite constraint problem: assignments propagate through
    every generator action, so the search only branches on elements whose
    image is not yet forced.
    """
    if a.codomain != base or x.codomain != base:
        raise BoundMismatchError("both legs must land in the given base")
    dom, cod = a.domain, x.domain
    elements = [(idx, label) for idx in level_indices(dom.bounds) for label in dom.levels[idx]]
    solutions: list[PresheafMap] = []

    def propagate(assign: dict, idx, label) -> bool:
        queue = [(idx, label)]
        while queue:
            i, l = queue.pop()
            v = assign[(i, l)]
            if x.components[i][v] != a.components[i][l]:
                return False
            for axis in range(dom.arity):
                for gen in _axis_generators(i[axis], dom.bounds[axis]):
                    ti = _replace(i, axis, gen.source)
                    tl = dom.actions[(axis, gen, i)][l]
                    tv = cod.actions[(axis, gen, i)][v]
                    seen = assign.get((ti, tl))
                    if seen is None:
                        assign[(ti, tl)] = tv
                        queue.append((ti, tl))
                    elif seen != tv:
                        return False
        return True

    def search(assign: dict, pos: int) -> None:
        while pos < len(elements) and elements[pos] in assign:
            pos += 1
        if pos == len(elements):
            comps: dict[tuple[int, ...], dict[str, str]] = {i: {} for i in level_indices(dom.bounds)}
            for (i, l), v in assign.items():
                comps[i][l] = v
            solutions.append(PresheafMap(dom, cod, comps, check_natural=False))
            return
        idx, label = elements[pos]
        for v in cod.levels[idx]:
            if x.components[idx][v] != a.components[idx][label]:
                continue
            trial = dict(assign)
            trial[(idx, label)] = v
            if propagate(trial, idx, label):
                search(trial, pos + 1)

    search({}, 0)
    solutions.sort(key=lambda m: tuple(sorted((i, tuple(sorted(t.items()))) for i, t in m.components.items())))
    return tuple(solutions)


def presheaf_to_dict(x: TruncatedPresheaf) -> dict:
    return {
        "arity": x.arity,
        "bounds": list(x.bounds),
        "levels": {",".join(map(str, idx)): list(labels) for idx, labels in x.levels.items()},
        "actions": {
            f"{axis}|{gen.label}|{','.join(map(str, idx))}": dict(sorted(table.items()))
            for (axis, gen, idx), table in x.actions.items()
        },
    }


def presheaf_from_dict(data: dict) -> TruncatedPresheaf:
    arity = data["arity"]
    bounds = tuple(data["bounds"])
    levels = {
        tuple(int(v) for v in key.split(",")): tuple(labels)
        for key, labels in data["levels"].items()
    }
    actions = {}
    for key, table in data["actions"].items():
        axis_str, gen_str, idx_str = key.split("|")
        axis = int(axis_str)
        values = tuple(int(v) for v in gen_str.split(","))
        idx = tuple(int(v) for v in idx_str.split(","))
        gen = MonotoneMap(len(values) - 1, idx[axis], values)
        actions[(axis, gen, idx)] = dict(table)
    return TruncatedPresheaf(arity, bounds, levels, actions)


def map_to_dict(m: PresheafMap) -> dict:
    return {
        "domain": presheaf_to_dict(m.domain),
        "codomain": presheaf_to_dict(m.codomain),
        "components": {
            ",".join(map(str, idx)): dict(sorted(t.items())) for idx, t in m.components.items()
        },
    }


def map_from_dict(data: dict) -> PresheafMap:
    return PresheafMap(
        presheaf_from_dict(data["domain"]),
        presheaf_from_dict(data["codomain"]),
        {
            tuple(int(v) for v in key.split(",")): dict(t)
            for key, t in data["components"].items()
        },
    )


def dumps(obj: dict) -> str:
    """Canonical JSON serialisation; byte-identical across runs."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))
