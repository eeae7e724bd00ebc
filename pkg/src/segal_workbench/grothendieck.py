"""The dictionary between fibrations over a product base and indexed functors.

An IndexedFunctor assigns a truncated space (arity-1 presheaf in the
fibration direction) to every pair of anchors (f1 into [p], f2 into [q])
and carries contravariant actions along the generating slice morphisms.
The sum construction glues the values into one arity-3 presheaf over the
product of the base representables, with elements tagged by their anchor;
the fiber construction inverts it strictly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .simplex import MonotoneMap, compose, enumerate_monotone, generator_chain, identity
from .presheaf import (
    AXIS_BASE,
    AXIS_FIB,
    AXIS_SPACE,
    BoundMismatchError,
    PresheafMap,
    StructureError,
    TruncatedPresheaf,
    Violation,
    _axis_generators,
    level_indices,
    pair_label,
    product,
    representable,
    validate,
)

SLICE_P = 0
SLICE_Q = 1


def base_presheaf(p: int, q: int, bounds: tuple[int, int, int]) -> TruncatedPresheaf:
    """The arity-3 base object: the product of the two base representables."""
    return product(representable("F", p, bounds), representable("Delta", q, bounds))


def anchor_pairs(p: int, q: int, n_bound: int, l_bound: int) -> tuple[tuple[MonotoneMap, MonotoneMap], ...]:
    return tuple(
        (f1, f2)
        for n in range(n_bound + 1)
        for f1 in enumerate_monotone(n, p)
        for l in range(l_bound + 1)
        for f2 in enumerate_monotone(l, q)
    )


def tag_label(f1: MonotoneMap, f2: MonotoneMap, x: str) -> str:
    return f"{f1.label};{f2.label}|{x}"


class IndexedFunctor:
    """A functor from the doubled slice category into truncated spaces."""

    __slots__ = ("p", "q", "k_bound", "n_bound", "l_bound", "values", "actions", "_derived", "_hash")

    def __init__(
        self,
        p: int,
        q: int,
        k_bound: int,
        n_bound: int,
        l_bound: int,
        values: Mapping[tuple[MonotoneMap, MonotoneMap], TruncatedPresheaf],
        actions: Mapping[tuple[int, MonotoneMap, tuple[MonotoneMap, MonotoneMap]], PresheafMap],
    ) -> None:
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "k_bound", k_bound)
        object.__setattr__(self, "n_bound", n_bound)
        object.__setattr__(self, "l_bound", l_bound)
        pairs = anchor_pairs(p, q, n_bound, l_bound)
        stored_values = {}
        for pair in pairs:
            if pair not in values:
                raise StructureError(f"missing value at anchor {pair[0].label};{pair[1].label}")
            space = values[pair]
            if space.arity != 1 or space.bounds != (k_bound,):
                raise StructureError("values must be truncated spaces at the fibration bound")
            stored_values[pair] = space
        object.__setattr__(self, "values", stored_values)
        stored_actions = {}
        for f1, f2 in pairs:
            for axis, anchor, bound in ((SLICE_P, f1, n_bound), (SLICE_Q, f2, l_bound)):
                for mediator in _axis_generators(anchor.source, bound):
                    key = (axis, mediator, (f1, f2))
                    if key not in actions:
                        raise StructureError(
                            f"missing action {axis}/{mediator.label} at {f1.label};{f2.label}"
                        )
                    arrow = actions[key]
                    expected_target = self._moved(f1, f2, axis, mediator)
                    if arrow.domain != stored_values[(f1, f2)] or arrow.codomain != stored_values[expected_target]:
                        raise StructureError(
                            f"action endpoints wrong at {f1.label};{f2.label} ({axis}/{mediator.label})"
                        )
                    stored_actions[key] = arrow
        object.__setattr__(self, "actions", stored_actions)
        object.__setattr__(self, "_derived", {})
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("IndexedFunctor is immutable")

    @staticmethod
    def _moved(f1: MonotoneMap, f2: MonotoneMap, axis: int, mediator: MonotoneMap):
        if axis == SLICE_P:
            return (compose(f1, mediator), f2)
        return (f1, compose(f2, mediator))

    @property
    def bounds(self) -> tuple[int, int, int]:
        return (self.k_bound, self.n_bound, self.l_bound)

    def anchors(self) -> tuple[tuple[MonotoneMap, MonotoneMap], ...]:
        return anchor_pairs(self.p, self.q, self.n_bound, self.l_bound)

    def value(self, f1: MonotoneMap, f2: MonotoneMap) -> TruncatedPresheaf:
        return self.values[(f1, f2)]

    def action(self, axis: int, mediator: MonotoneMap, f1: MonotoneMap, f2: MonotoneMap) -> PresheafMap:
        """The action along an arbitrary slice mediator, derived from generators."""
        anchor = f1 if axis == SLICE_P else f2
        if mediator.target != anchor.source:
            raise BoundMismatchError("mediator does not compose with the anchor")
        key = (axis, mediator, (f1, f2))
        if key in self.actions:
            return self.actions[key]
        cached = self._derived.get(key)
        if cached is not None:
            return cached
        result = None
        here = (f1, f2)
        for factor in generator_chain(mediator):
            step = self.actions[(axis, factor, here)]
            result = step if result is None else _compose_value_maps(step, result)
            here = self._moved(here[0], here[1], axis, factor)
        if result is None:
            from .presheaf import identity_map

            result = identity_map(self.values[(f1, f2)])
        self._derived[key] = result
        return result

    def _encode(self):
        return (
            self.p,
            self.q,
            self.bounds,
            tuple(sorted((f1, f2, sp._encode()) for (f1, f2), sp in self.values.items())),
            tuple(
                sorted(
                    (axis, med, f1, f2, tuple(sorted((i, tuple(sorted(t.items()))) for i, t in arrow.components.items())))
                    for (axis, med, (f1, f2)), arrow in self.actions.items()
                )
            ),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, IndexedFunctor):
            return NotImplemented
        return self._encode() == other._encode()

    def __hash__(self) -> int:
        if self._hash is None:
            object.__setattr__(self, "_hash", hash(self._encode()))
        return self._hash

    def __repr__(self) -> str:  # pragma: no cover
        sizes = {
            f"{f1.label};{f2.label}": len(sp.levels[(0,)]) for (f1, f2), sp in sorted(self.values.items())
        }
        return f"IndexedFunctor(p={self.p}, q={self.q}, sizes={sizes})"

    def validate(self) -> Violation | None:
        """Functoriality: generator composites agree and the two slice axes commute."""
        for (f1, f2) in self.anchors():
            for v in (validate(self.values[(f1, f2)]),):
                if v is not None:
                    return Violation("value", (f1.source, f2.source), f"{f1.label};{f2.label}: {v}")
            for axis, anchor, bound in ((SLICE_P, f1, self.n_bound), (SLICE_Q, f2, self.l_bound)):
                for outer in _axis_generators(anchor.source, bound):
                    mid = self._moved(f1, f2, axis, outer)
                    mid_anchor = mid[0] if axis == SLICE_P else mid[1]
                    for inner in _axis_generators(mid_anchor.source, bound):
                        composite = compose(outer, inner)
                        direct = self.action(axis, composite, f1, f2)
                        step1 = self.actions[(axis, outer, (f1, f2))]
                        step2 = self.actions[(axis, inner, mid)]
                        for k_idx in level_indices((self.k_bound,)):
                            for x in self.values[(f1, f2)].levels[k_idx]:
                                if step2.components[k_idx][step1.components[k_idx][x]] != direct.components[k_idx][x]:
                                    return Violation(
                                        "slice-composite",
                                        (f1.source, f2.source),
                                        f"axis {axis} {inner.label} after {outer.label} at {f1.label};{f2.label} on '{x}'",
                                    )
            for med1 in _axis_generators(f1.source, self.n_bound):
                mid = self._moved(f1, f2, SLICE_P, med1)
                for med2 in _axis_generators(f2.source, self.l_bound):
                    one = _compose_value_maps(
                        self.actions[(SLICE_Q, med2, mid)], self.actions[(SLICE_P, med1, (f1, f2))]
                    )
                    other_mid = self._moved(f1, f2, SLICE_Q, med2)
                    two = _compose_value_maps(
                        self.actions[(SLICE_P, med1, other_mid)], self.actions[(SLICE_Q, med2, (f1, f2))]
                    )
                    if one != two:
                        return Violation(
                            "slice-commute",
                            (f1.source, f2.source),
                            f"{med1.label} and {med2.label} disagree at {f1.label};{f2.label}",
                        )
        return None


def _compose_value_maps(f: PresheafMap, g: PresheafMap) -> PresheafMap:
    from .presheaf import compose_maps

    return compose_maps(f, g)


@dataclass(frozen=True)
class PointedIndexedFunctor:
    """An indexed functor with a chosen basepoint in its identity-anchor value."""

    base: IndexedFunctor
    point_level: int
    basepoint: str

    def __post_init__(self) -> None:
        G = self.base
        if not 0 <= self.point_level <= G.k_bound:
            raise BoundMismatchError("point level exceeds the fibration bound")
        cell = _identity_anchor(G)
        if self.basepoint not in G.values[cell].levels[(self.point_level,)]:
            raise StructureError("basepoint is not a member of the named level set")


def _identity_anchor(G: IndexedFunctor) -> tuple[MonotoneMap, MonotoneMap]:
    if G.n_bound < G.p or G.l_bound < G.q:
        raise BoundMismatchError("identity anchors lie outside the slice truncation")
    return (identity(G.p), identity(G.q))


def terminal_functor(p: int, q: int, k_bound: int, n_bound: int, l_bound: int) -> IndexedFunctor:
    from .presheaf import identity_map, terminal

    point = terminal(1, (k_bound,))
    values = {pair: point for pair in anchor_pairs(p, q, n_bound, l_bound)}
    actions = {}
    for f1, f2 in anchor_pairs(p, q, n_bound, l_bound):
        for axis, anchor, bound in ((SLICE_P, f1, n_bound), (SLICE_Q, f2, l_bound)):
            for mediator in _axis_generators(anchor.source, bound):
                actions[(axis, mediator, (f1, f2))] = identity_map(point)
    return IndexedFunctor(p, q, k_bound, n_bound, l_bound, values, actions)


def sum_construction(G: IndexedFunctor) -> PresheafMap:
    """Glue an indexed functor into one presheaf over the product base.

    Level (k, n, l) is the disjoint union over anchors of the value's
    k-level, with every element tagged by its anchor; the tag is the
    structure map to the base.
    """
    bounds = G.bounds
    base = base_presheaf(G.p, G.q, bounds)
    levels: dict[tuple[int, ...], tuple[str, ...]] = {}
    alpha_comp: dict[tuple[int, ...], dict[str, str]] = {}
    anchors_at: dict[tuple[int, int], list[tuple[MonotoneMap, MonotoneMap]]] = {}
    for n in range(G.n_bound + 1):
        for l in range(G.l_bound + 1):
            anchors_at[(n, l)] = [
                (f1, f2) for f1 in enumerate_monotone(n, G.p) for f2 in enumerate_monotone(l, G.q)
            ]
    for idx in level_indices(bounds):
        k, n, l = idx
        labels = []
        comp = {}
        for f1, f2 in anchors_at[(n, l)]:
            for x in G.values[(f1, f2)].levels[(k,)]:
                t = tag_label(f1, f2, x)
                labels.append(t)
                comp[t] = pair_label(f1.label, f2.label)
        levels[idx] = tuple(labels)
        alpha_comp[idx] = comp

    actions: dict[tuple[int, MonotoneMap, tuple[int, ...]], dict[str, str]] = {}
    for idx in level_indices(bounds):
        k, n, l = idx
        for gen in _axis_generators(k, bounds[0]):
            table = {}
            for f1, f2 in anchors_at[(n, l)]:
                inner = G.values[(f1, f2)].actions[(0, gen, (k,))]
                for x, y in inner.items():
                    table[tag_label(f1, f2, x)] = tag_label(f1, f2, y)
            actions[(AXIS_FIB, gen, idx)] = table
        for gen in _axis_generators(n, bounds[1]):
            table = {}
            for f1, f2 in anchors_at[(n, l)]:
                arrow = G.actions[(SLICE_P, gen, (f1, f2))]
                moved = compose(f1, gen)
                for x in G.values[(f1, f2)].levels[(k,)]:
                    table[tag_label(f1, f2, x)] = tag_label(moved, f2, arrow.components[(k,)][x])
            actions[(AXIS_BASE, gen, idx)] = table
        for gen in _axis_generators(l, bounds[2]):
            table = {}
            for f1, f2 in anchors_at[(n, l)]:
                arrow = G.actions[(SLICE_Q, gen, (f1, f2))]
                moved = compose(f2, gen)
                for x in G.values[(f1, f2)].levels[(k,)]:
                    table[tag_label(f1, f2, x)] = tag_label(f1, moved, arrow.components[(k,)][x])
            actions[(AXIS_SPACE, gen, idx)] = table

    total = TruncatedPresheaf(3, bounds, levels, actions)
    return PresheafMap(total, base, alpha_comp, check_natural=False)


def _strip_rule(prefix: str, towers: dict[tuple[int, ...], tuple[str, ...]]):
    """Strip an anchor tag from every fiber label when safe to do so.

    All labels must carry the prefix and the stripped labels must stay
    distinct per level; otherwise labels are kept as found.
    """
    all_labels = [x for labels in towers.values() for x in labels]
    if not all_labels:
        return lambda x: x
    if all(x.startswith(prefix) for x in all_labels):
        stripped = {idx: tuple(x[len(prefix):] for x in labels) for idx, labels in towers.items()}
        if all(len(set(s)) == len(s) for s in stripped.values()):
            return lambda x: x[len(prefix):]
    return lambda x: x


def fiber_construction(alpha: PresheafMap, p: int, q: int) -> IndexedFunctor:
    """Recover an indexed functor from a map into the product base.

    The value at an anchor pair is the strict fiber of the corresponding
    level over the anchor's point of the base; slice actions restrict the
    total space's actions to fibers.
    """
    x = alpha.domain
    bounds = x.bounds
    if alpha.codomain != base_presheaf(p, q, bounds):
        raise StructureError("codomain is not the product base for the stated (p, q)")
    k_bound, n_bound, l_bound = bounds

    fibers: dict[tuple[MonotoneMap, MonotoneMap], dict[tuple[int, ...], tuple[str, ...]]] = {}
    renames: dict[tuple[MonotoneMap, MonotoneMap], object] = {}
    for f1, f2 in anchor_pairs(p, q, n_bound, l_bound):
        target = pair_label(f1.label, f2.label)
        towers = {
            (k,): tuple(
                lbl
                for lbl in x.levels[(k, f1.source, f2.source)]
                if alpha.components[(k, f1.source, f2.source)][lbl] == target
            )
            for k in range(k_bound + 1)
        }
        rename = _strip_rule(f"{f1.label};{f2.label}|", towers)
        fibers[(f1, f2)] = {idx: tuple(rename(l) for l in labels) for idx, labels in towers.items()}
        renames[(f1, f2)] = rename

    raw: dict[tuple[MonotoneMap, MonotoneMap], dict[tuple[int, ...], dict[str, str]]] = {}
    for f1, f2 in anchor_pairs(p, q, n_bound, l_bound):
        target = pair_label(f1.label, f2.label)
        raw[(f1, f2)] = {
            (k,): {
                lbl: lbl
                for lbl in x.levels[(k, f1.source, f2.source)]
                if alpha.components[(k, f1.source, f2.source)][lbl] == target
            }
            for k in range(k_bound + 1)
        }

    values = {}
    for pair, towers in fibers.items():
        f1, f2 = pair
        rename = renames[pair]
        val_actions = {}
        for k in range(k_bound + 1):
            for gen in _axis_generators(k, k_bound):
                total_table = x.actions[(AXIS_FIB, gen, (k, f1.source, f2.source))]
                val_actions[(0, gen, (k,))] = {
                    rename(lbl): rename(total_table[lbl]) for lbl in raw[pair][(k,)]
                }
        values[pair] = TruncatedPresheaf(1, (k_bound,), towers, val_actions)

    actions = {}
    for f1, f2 in anchor_pairs(p, q, n_bound, l_bound):
        rename = renames[(f1, f2)]
        for axis, total_axis in ((SLICE_P, AXIS_BASE), (SLICE_Q, AXIS_SPACE)):
            anchor = f1 if axis == SLICE_P else f2
            bound = n_bound if axis == SLICE_P else l_bound
            for mediator in _axis_generators(anchor.source, bound):
                moved = IndexedFunctor._moved(f1, f2, axis, mediator)
                rename_moved = renames[moved]
                comps = {}
                for k in range(k_bound + 1):
                    total_table = x.actions[(total_axis, mediator, (k, f1.source, f2.source))]
                    comps[(k,)] = {
                        rename(lbl): rename_moved(total_table[lbl]) for lbl in raw[(f1, f2)][(k,)]
                    }
                actions[(axis, mediator, (f1, f2))] = PresheafMap(
                    values[(f1, f2)], values[moved], comps, check_natural=False
                )
    return IndexedFunctor(p, q, k_bound, n_bound, l_bound, values, actions)


@dataclass(frozen=True)
class RoundTripReport:
    ok: bool
    detail: str = ""


def roundtrip_check(G: IndexedFunctor) -> RoundTripReport:
    """Assert that the fiber construction undoes the sum construction exactly."""
    back = fiber_construction(sum_construction(G), G.p, G.q)
    if back == G:
        return RoundTripReport(True)
    for pair in G.anchors():
        if back.values[pair] != G.values[pair]:
            return RoundTripReport(
                False, f"value mismatch at {pair[0].label};{pair[1].label}"
            )
    for key in G.actions:
        if back.actions[key] != G.actions[key]:
            axis, med, (f1, f2) = key
            return RoundTripReport(False, f"action mismatch {axis}/{med.label} at {f1.label};{f2.label}")
    return RoundTripReport(False, "tables differ")


def roundtrip_check_map(alpha: PresheafMap, p: int, q: int) -> RoundTripReport:
    """Assert the sum of the fibers is isomorphic to the original map via untagging."""
    x = alpha.domain
    fib = fiber_construction(alpha, p, q)
    rebuilt = sum_construction(fib)
    mapping: dict[tuple[int, ...], dict[str, str]] = {idx: {} for idx in level_indices(x.bounds)}
    for f1, f2 in anchor_pairs(p, q, x.bounds[1], x.bounds[2]):
        target = pair_label(f1.label, f2.label)
        for k in range(x.bounds[0] + 1):
            idx = (k, f1.source, f2.source)
            originals = [
                lbl for lbl in x.levels[idx] if alpha.components[idx][lbl] == target
            ]
            relabeled = fib.values[(f1, f2)].levels[(k,)]
            for orig, fib_label in zip(originals, relabeled):
                mapping[idx][tag_label(f1, f2, fib_label)] = orig
    try:
        iso = PresheafMap(rebuilt.domain, x, mapping, check_natural=True)
    except Exception as exc:  # report, never raise
        return RoundTripReport(False, f"untagging is not natural: {exc}")
    if not iso.is_bijective():
        return RoundTripReport(False, "untagging is not a bijection")
    for idx, table in iso.components.items():
        for tagged, orig in table.items():
            if alpha.components[idx][orig] != rebuilt.components[idx][tagged]:
                return RoundTripReport(False, f"untagging does not commute with the base at {idx}")
    return RoundTripReport(True)


def restrict(G: IndexedFunctor, delta1: MonotoneMap, delta2: MonotoneMap) -> IndexedFunctor:
    """Precompose an indexed functor with post-composition maps of anchors.

    The value at (f1, f2) is G at (delta1 . f1, delta2 . f2); action tables
    are shared with G, so restriction is strictly functorial.
    """
    if delta1.target != G.p or delta2.target != G.q:
        raise BoundMismatchError("restriction maps must land in the functor's base ordinals")
    p1, q1 = delta1.source, delta2.source
    values = {}
    actions = {}
    for f1, f2 in anchor_pairs(p1, q1, G.n_bound, G.l_bound):
        big = (compose(delta1, f1), compose(delta2, f2))
        values[(f1, f2)] = G.values[big]
        for axis, anchor, bound in ((SLICE_P, f1, G.n_bound), (SLICE_Q, f2, G.l_bound)):
            for mediator in _axis_generators(anchor.source, bound):
                actions[(axis, mediator, (f1, f2))] = G.actions[(axis, mediator, big)]
    return IndexedFunctor(p1, q1, G.k_bound, G.n_bound, G.l_bound, values, actions)


def restrict_pointed(P: PointedIndexedFunctor, delta1: MonotoneMap, delta2: MonotoneMap) -> PointedIndexedFunctor:
    """Restrict the underlying functor and transport the basepoint with it."""
    G = P.base
    new_base = restrict(G, delta1, delta2)
    step1 = G.action(SLICE_P, delta1, identity(G.p), identity(G.q))
    step2 = G.action(SLICE_Q, delta2, delta1, identity(G.q))
    moved = step2.components[(P.point_level,)][step1.components[(P.point_level,)][P.basepoint]]
    return PointedIndexedFunctor(new_base, P.point_level, moved)


def repoint(P: PointedIndexedFunctor, theta: MonotoneMap) -> PointedIndexedFunctor:
    """Move the basepoint along a map of point levels (the extra direction)."""
    G = P.base
    if theta.target != P.point_level:
        raise BoundMismatchError("repointing map must target the current point level")
    cell = (identity(G.p), identity(G.q))
    table = G.values[cell].action(0, theta, (P.point_level,))
    return PointedIndexedFunctor(G, theta.source, table[P.basepoint])


def to_pointed(G: IndexedFunctor, r: int, basepoint: str) -> PointedIndexedFunctor:
    """Forward direction of the point bijection."""
    if r > G.k_bound:
        raise BoundMismatchError("point level exceeds the fibration bound")
    return PointedIndexedFunctor(G, r, basepoint)


def from_pointed(P: PointedIndexedFunctor) -> tuple[IndexedFunctor, str]:
    """Backward direction of the point bijection."""
    return (P.base, P.basepoint)


def enumerate_pointed(G: IndexedFunctor, r: int) -> tuple[PointedIndexedFunctor, ...]:
    """All pointed functors over G at the given point level."""
    if r > G.k_bound:
        raise BoundMismatchError("point level exceeds the fibration bound")
    cell = _identity_anchor(G)
    return tuple(
        PointedIndexedFunctor(G, r, x) for x in G.values[cell].levels[(r,)]
    )


def pointed_free_cell(G: IndexedFunctor, r: int, f0: MonotoneMap, f1: MonotoneMap, f2: MonotoneMap) -> tuple[str, ...]:
    """The cell of the pointed-free extension of G at a triple of anchors.

    The extension is constant along the extra slice direction: the cell at
    (f0 into [r], f1, f2) is the value of G at (f1, f2) in level f0.source.
    """
    if f0.target != r:
        raise BoundMismatchError("first anchor must land in [r]")
    return G.values[(f1, f2)].levels[(f0.source,)]
