"""Compact tables for the fibration-direction-constant indexed functors.

Under the strict semantics the fibration-direction comparisons force the
value spaces of every enumerable functor to be discrete, so enumeration
works on "cores": one finite carrier per anchor pair plus action tables
for the generating slice mediators.  Cores are enumerated skeleton-first
(nondegenerate elements plus chosen faces; degeneracies are formal),
deduplicated by canonical form, and expanded to full IndexedFunctors on
demand.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

from .canonical import TableBundle, canonical_form
from .simplex import (
    MonotoneMap,
    coface,
    codegeneracy,
    compose,
    constant,
    enumerate_monotone,
    enumerate_surjections,
    epi_mono_factor,
    generator_chain,
    identity,
)

SLICE_P = 0
SLICE_Q = 1


@dataclass(frozen=True)
class GenOp:
    axis: int
    mediator: MonotoneMap
    src: int
    dst: int


class CellCategory:
    """Cells (anchor pairs) and generating operations for one (p, q) level."""

    def __init__(self, p: int, q: int, slice_n: int, slice_l: int) -> None:
        self.p, self.q = p, q
        self.slice_n, self.slice_l = slice_n, slice_l
        self.anchors1 = tuple(f for n in range(slice_n + 1) for f in enumerate_monotone(n, p))
        self.anchors2 = tuple(f for l in range(slice_l + 1) for f in enumerate_monotone(l, q))
        self._a1_index = {f: i for i, f in enumerate(self.anchors1)}
        self._a2_index = {f: i for i, f in enumerate(self.anchors2)}
        cells = [
            (i1, i2)
            for i1, f1 in enumerate(self.anchors1)
            for i2, f2 in enumerate(self.anchors2)
        ]
        cells.sort(key=lambda c: self._cell_sort_key(c))
        self.cells = tuple(cells)
        self.cell_index = {c: pos for pos, c in enumerate(self.cells)}

        ops: list[GenOp] = []
        for pos, (i1, i2) in enumerate(self.cells):
            f1, f2 = self.anchors1[i1], self.anchors2[i2]
            for med in self._axis_mediators(f1.source, slice_n):
                ops.append(GenOp(SLICE_P, med, pos, self.cell_of(compose(f1, med), f2)))
            for med in self._axis_mediators(f2.source, slice_l):
                ops.append(GenOp(SLICE_Q, med, pos, self.cell_of(f1, compose(f2, med))))
        self.ops = tuple(ops)
        self.ops_from: list[list[int]] = [[] for _ in self.cells]
        for oi, op in enumerate(self.ops):
            self.ops_from[op.src].append(oi)

        # Nontrivial epi-pair factorisations per cell, targeting lower cells.
        self.epis: list[tuple[tuple[MonotoneMap, MonotoneMap, int], ...]] = []
        for i1, i2 in self.cells:
            f1, f2 = self.anchors1[i1], self.anchors2[i2]
            found = []
            for s1, g1 in self._epi_factorisations(f1):
                for s2, g2 in self._epi_factorisations(f2):
                    if s1.is_identity() and s2.is_identity():
                        continue
                    found.append((s1, s2, self.cell_of(g1, g2)))
            self.epis.append(tuple(found))

        # Coface lists per cell and axis, with their target cells.
        self.cofaces: list[dict[int, tuple[tuple[MonotoneMap, int], ...]]] = []
        for i1, i2 in self.cells:
            f1, f2 = self.anchors1[i1], self.anchors2[i2]
            per_axis = {}
            per_axis[SLICE_P] = tuple(
                (coface(f1.source, i), self.cell_of(compose(f1, coface(f1.source, i)), f2))
                for i in range(f1.source + 1)
            ) if f1.source >= 1 else ()
            per_axis[SLICE_Q] = tuple(
                (coface(f2.source, i), self.cell_of(f1, compose(f2, coface(f2.source, i))))
                for i in range(f2.source + 1)
            ) if f2.source >= 1 else ()
            self.cofaces.append(per_axis)

    def _cell_sort_key(self, cell):
        i1, i2 = cell
        f1, f2 = self.anchors1[i1], self.anchors2[i2]
        return (f1.source + f2.source, f1.source, f1.values, f2.values)

    @staticmethod
    def _axis_mediators(level: int, bound: int) -> tuple[MonotoneMap, ...]:
        meds: list[MonotoneMap] = []
        if level >= 1:
            meds.extend(coface(level, i) for i in range(level + 1))
        if level + 1 <= bound:
            meds.extend(codegeneracy(level, i) for i in range(level + 1))
        return tuple(meds)

    def cell_of(self, f1: MonotoneMap, f2: MonotoneMap) -> int:
        return self.cell_index[(self._a1_index[f1], self._a2_index[f2])]

    def anchors_of(self, pos: int) -> tuple[MonotoneMap, MonotoneMap]:
        i1, i2 = self.cells[pos]
        return self.anchors1[i1], self.anchors2[i2]

    @staticmethod
    def _epi_factorisations(f: MonotoneMap):
        """All (epi, residual) with f = residual . epi."""
        out = []
        for target in range(f.source + 1):
            for s in enumerate_surjections(f.source, target):
                section = []
                ok = True
                for y in range(target + 1):
                    pre = next(i for i in range(f.source + 1) if s.values[i] == y)
                    section.append(f.values[pre])
                g = MonotoneMap(target, f.target, tuple(section))
                if compose(g, s) == f:
                    out.append((s, g))
        return out


@lru_cache(maxsize=None)
def cell_category(p: int, q: int, slice_n: int, slice_l: int) -> CellCategory:
    return CellCategory(p, q, slice_n, slice_l)


@dataclass(frozen=True)
class CoreFunctor:
    """Carriers and generator action tables over a cell category."""

    p: int
    q: int
    slice_n: int
    slice_l: int
    sizes: tuple[int, ...]
    tables: tuple[tuple[int, ...], ...]

    @property
    def category(self) -> CellCategory:
        return cell_category(self.p, self.q, self.slice_n, self.slice_l)

    def bundle(self) -> TableBundle:
        cat = self.category
        return TableBundle(
            self.sizes,
            tuple((op.src, op.dst, self.tables[oi]) for oi, op in enumerate(cat.ops)),
        )

    def canonical_key(self):
        key, _ = canonical_form(self.bundle())
        return (self.p, self.q, self.slice_n, self.slice_l) + key


def canonicalize(core: CoreFunctor) -> tuple[CoreFunctor, tuple[tuple[int, ...], ...]]:
    """Return the canonical representative of the core and the relabelling."""
    key, perms = canonical_form(core.bundle())
    sizes, tables = key
    return (
        CoreFunctor(core.p, core.q, core.slice_n, core.slice_l, sizes, tables),
        perms,
    )


def core_restrict(core: CoreFunctor, delta1: MonotoneMap, delta2: MonotoneMap) -> CoreFunctor:
    """Relocate a core along post-composition of anchors, sharing its tables."""
    cat = core.category
    new_cat = cell_category(delta1.source, delta2.source, core.slice_n, core.slice_l)
    cell_map = []
    for pos in range(len(new_cat.cells)):
        f1, f2 = new_cat.anchors_of(pos)
        cell_map.append(cat.cell_of(compose(delta1, f1), compose(delta2, f2)))
    sizes = tuple(core.sizes[cell_map[pos]] for pos in range(len(new_cat.cells)))
    op_lookup = {(op.axis, op.mediator, op.src): oi for oi, op in enumerate(cat.ops)}
    tables = []
    for op in new_cat.ops:
        tables.append(core.tables[op_lookup[(op.axis, op.mediator, cell_map[op.src])]])
    return CoreFunctor(delta1.source, delta2.source, core.slice_n, core.slice_l, sizes, tuple(tables))


def derived_table(core: CoreFunctor, cell: int, axis: int, mediator: MonotoneMap) -> tuple[tuple[int, ...], int]:
    """The action table of an arbitrary mediator out of a cell; returns (table, target cell)."""
    cat = core.category
    table = tuple(range(core.sizes[cell]))
    here = cell
    op_lookup = getattr(core, "_op_lookup", None)
    if op_lookup is None:
        op_lookup = {(op.axis, op.mediator, op.src): oi for oi, op in enumerate(cat.ops)}
        object.__setattr__(core, "_op_lookup", op_lookup)
    for factor in generator_chain(mediator):
        oi = op_lookup[(axis, factor, here)]
        step = core.tables[oi]
        table = tuple(step[v] for v in table)
        here = cat.ops[oi].dst
    return table, here


# ---------------------------------------------------------------------------
# Skeleton enumeration


def enumerate_cores(p: int, q: int, slice_n: int, slice_l: int, max_fiber: int):
    """All functor cores with carriers of size at most max_fiber, canonical form.

    Yields one representative per isomorphism class, in a deterministic
    order (sorted canonical keys).
    """
    cat = cell_category(p, q, slice_n, slice_l)
    ncells = len(cat.cells)
    # state
    nondeg_count = [0] * ncells
    elements: list[list[tuple]] = [[] for _ in range(ncells)]
    positions: list[dict] = [{} for _ in range(ncells)]
    faces: dict[tuple, tuple[int, tuple]] = {}

    id_pairs = [
        (identity(cat.anchors_of(pos)[0].source), identity(cat.anchors_of(pos)[1].source))
        for pos in range(ncells)
    ]

    def act_single(cell: int, elem: tuple, axis: int, gen: MonotoneMap) -> tuple:
        """Apply one generating mediator to an element in normal form."""
        s1, s2, c0, j = elem
        sigma = s1 if axis == SLICE_P else s2
        fused = compose(sigma, gen)
        if fused.is_surjective():
            return (fused, s2, c0, j) if axis == SLICE_P else (s1, fused, c0, j)
        eps, mu = epi_mono_factor(fused)
        face = faces[(c0, j, axis, mu)]
        fc, (t1, t2, cc, jj) = face
        if axis == SLICE_P:
            return (compose(t1, eps), compose(t2, s2), cc, jj)
        return (compose(t1, s1), compose(t2, eps), cc, jj)

    def coherent(cell: int, j: int) -> bool:
        """Two-step face paths with equal composites must agree."""
        f1, f2 = cat.anchors_of(cell)
        paths: dict[tuple, tuple] = {}
        for axis1, firsts in cat.cofaces[cell].items():
            for cf1, mid_cell in firsts:
                mid_elem = faces[(cell, j, axis1, cf1)][1]
                for axis2, seconds in cat.cofaces[mid_cell].items():
                    for cf2, _ in seconds:
                        value = act_single(mid_cell, mid_elem, axis2, cf2)
                        if axis1 == axis2:
                            key_axis = compose(cf1, cf2)
                            key = (axis1, key_axis, None) if axis1 == SLICE_P else (axis1, None, key_axis)
                        else:
                            m1 = cf1 if axis1 == SLICE_P else cf2
                            m2 = cf2 if axis1 == SLICE_P else cf1
                            key = (2, m1, m2)
                        if key in paths:
                            if paths[key] != value:
                                return False
                        else:
                            paths[key] = value
        return True

    results: dict[tuple, CoreFunctor] = {}

    def materialize() -> None:
        sizes = tuple(len(elements[c]) for c in range(ncells))
        tables = []
        for op in cat.ops:
            table = []
            for elem in elements[op.src]:
                out = act_single(op.src, elem, op.axis, op.mediator)
                table.append(positions[op.dst][out])
            tables.append(tuple(table))
        core = CoreFunctor(p, q, slice_n, slice_l, sizes, tuple(tables))
        canon, _ = canonicalize(core)
        results.setdefault(canon.canonical_key(), canon)

    def fill_cell(pos: int) -> None:
        if pos == ncells:
            materialize()
            return
        degenerate = []
        for s1, s2, target in cat.epis[pos]:
            for j in range(nondeg_count[target]):
                degenerate.append((s1, s2, target, j))
        if len(degenerate) > max_fiber:
            return
        budget = max_fiber - len(degenerate)

        face_slots = [
            (axis, cf, target)
            for axis in (SLICE_P, SLICE_Q)
            for cf, target in cat.cofaces[pos][axis]
        ]

        def place_elements(count: int) -> None:
            elements[pos] = degenerate + [(id_pairs[pos][0], id_pairs[pos][1], pos, j) for j in range(count)]
            positions[pos] = {e: i for i, e in enumerate(elements[pos])}
            nondeg_count[pos] = count

        def choose_faces(j: int, count: int, previous) -> None:
            if j == count:
                fill_cell(pos + 1)
                return
            option_lists = [elements[target] for _, _, target in face_slots]
            for assignment in itertools.product(*option_lists):
                if previous is not None and j > 0 and assignment < previous[j - 1]:
                    continue
                for slot, value in zip(face_slots, assignment):
                    axis, cf, _ = slot
                    faces[(pos, j, axis, cf)] = (slot[2], value)
                if coherent(pos, j):
                    if previous is not None:
                        previous[j] = assignment
                    choose_faces(j + 1, count, previous)
                for slot in face_slots:
                    axis, cf, _ = slot
                    faces.pop((pos, j, axis, cf), None)

        for count in range(budget + 1):
            place_elements(count)
            if count == 0:
                fill_cell(pos + 1)
            else:
                choose_faces(0, count, [None] * count)
        place_elements(0)

    fill_cell(0)
    return tuple(results[key] for key in sorted(results))


# ---------------------------------------------------------------------------
# Fast variant predicates on cores


def _vertex_map(j: int) -> MonotoneMap:
    return MonotoneMap(0, 1, (j,))


def core_is_segal(core: CoreFunctor) -> bool:
    """Filler-versus-spine bijections at every anchor of height two or more."""
    cat = core.category
    if core.slice_n < 2:
        raise ValueError("segal check needs slice levels up to 2")
    for pos in range(len(cat.cells)):
        f1, f2 = cat.anchors_of(pos)
        n = f1.source
        if n < 2:
            continue
        edge_tables = []
        for i in range(n):
            e = MonotoneMap(1, n, (i, i + 1))
            table, target = derived_table(core, pos, SLICE_P, e)
            edge_tables.append((table, target))
        starts = {}
        stops = {}
        for _, target in edge_tables:
            if target not in starts:
                starts[target], _ = derived_table(core, target, SLICE_P, _vertex_map(0))
                stops[target], _ = derived_table(core, target, SLICE_P, _vertex_map(1))
        images = []
        for x in range(core.sizes[pos]):
            images.append(tuple(table[x] for table, _ in edge_tables))
        if len(set(images)) != len(images):
            return False
        compatible = 0
        targets = [t for _, t in edge_tables]

        def count_paths(i: int, prev_stop: int | None) -> int:
            if i == n:
                return 1
            total = 0
            t = targets[i]
            for x in range(core.sizes[t]):
                if prev_stop is not None and starts[t][x] != prev_stop:
                    continue
                total += count_paths(i + 1, stops[t][x])
            return total

        compatible = count_paths(0, None)
        if compatible != core.sizes[pos]:
            return False
    return True


def core_is_complete(core: CoreFunctor) -> bool:
    """Collapsed-edges completeness at every vertex, on top of the spine checks."""
    cat = core.category
    if core.slice_n < 3:
        raise ValueError("completeness check needs slice levels up to 3")
    if not core_is_segal(core):
        return False
    for v in range(core.p + 1):
        for i2 in range(len(cat.anchors2)):
            f2 = cat.anchors2[i2]
            c0 = cat.cell_of(constant(0, core.p, v), f2)
            c3 = cat.cell_of(constant(3, core.p, v), f2)
            edge02, e_target = derived_table(core, c3, SLICE_P, MonotoneMap(1, 3, (0, 2)))
            edge13, _ = derived_table(core, c3, SLICE_P, MonotoneMap(1, 3, (1, 3)))
            degen, d_target = derived_table(core, c0, SLICE_P, constant(1, 0, 0))
            assert e_target == d_target
            degen_of: dict[int, list[int]] = {}
            for x in range(core.sizes[c0]):
                degen_of.setdefault(degen[x], []).append(x)
            triple_count = 0
            for sigma in range(core.sizes[c3]):
                triple_count += len(degen_of.get(edge02[sigma], ())) * len(
                    degen_of.get(edge13[sigma], ())
                )
            collapse, _ = derived_table(core, c0, SLICE_P, constant(3, 0, 0))
            images = [(collapse[x], x, x) for x in range(core.sizes[c0])]
            if len(set(images)) != len(images) or triple_count != core.sizes[c0]:
                return False
    return True


def core_is_left(core: CoreFunctor) -> bool:
    """Constant transport along every degenerate anchor tower."""
    cat = core.category
    for v in range(core.p + 1):
        for i2 in range(len(cat.anchors2)):
            f2 = cat.anchors2[i2]
            c0 = cat.cell_of(constant(0, core.p, v), f2)
            for n in range(1, core.slice_n + 1):
                table, target = derived_table(core, c0, SLICE_P, constant(n, 0, 0))
                image = set(table)
                if len(image) != core.sizes[c0] or len(image) != core.sizes[target]:
                    return False
    return True


VARIANTS = ("SSpaces", "Seg", "CSS", "Spaces")

VARIANT_MIN_SLICE_N = {"SSpaces": 1, "Seg": 2, "CSS": 3, "Spaces": 3}


def core_passes_variant(core: CoreFunctor, variant: str) -> bool:
    if variant == "SSpaces":
        return True
    if variant == "Seg":
        return core_is_segal(core)
    if variant == "CSS":
        return core_is_complete(core)
    if variant == "Spaces":
        return core_is_left(core)
    raise ValueError(f"unknown variant {variant!r}")


# ---------------------------------------------------------------------------
# Expansion to IndexedFunctor and extraction back


def expand_core(core: CoreFunctor, k_bound: int):
    """The fibration-direction-constant IndexedFunctor carried by a core."""
    from .presheaf import PresheafMap, TruncatedPresheaf, _axis_generators
    from .grothendieck import IndexedFunctor

    cat = core.category
    value_cache: dict[int, TruncatedPresheaf] = {}

    def value_for(size: int) -> TruncatedPresheaf:
        if size not in value_cache:
            labels = tuple(str(i) for i in range(size))
            levels = {(k,): labels for k in range(k_bound + 1)}
            actions = {}
            for k in range(k_bound + 1):
                for gen in _axis_generators(k, k_bound):
                    actions[(0, gen, (k,))] = {x: x for x in labels}
            value_cache[size] = TruncatedPresheaf(1, (k_bound,), levels, actions)
        return value_cache[size]

    values = {}
    for pos in range(len(cat.cells)):
        values[cat.anchors_of(pos)] = value_for(core.sizes[pos])
    actions = {}
    for oi, op in enumerate(cat.ops):
        table = core.tables[oi]
        comp = {str(i): str(table[i]) for i in range(core.sizes[op.src])}
        arrow = PresheafMap(
            value_for(core.sizes[op.src]),
            value_for(core.sizes[op.dst]),
            {(k,): dict(comp) for k in range(k_bound + 1)},
            check_natural=False,
        )
        actions[(op.axis, op.mediator, cat.anchors_of(op.src))] = arrow
    return IndexedFunctor(core.p, core.q, k_bound, core.slice_n, core.slice_l, values, actions)


class NotDiscreteError(ValueError):
    """The functor's value spaces are not constant in the fibration direction."""


def extract_core(G) -> tuple[CoreFunctor, dict]:
    """Flatten a fibration-direction-constant functor to a core.

    Value towers are normalised along their initial-vertex bijections; the
    returned mapping sends each anchor pair to the list of level-zero
    labels in carrier order.
    """
    cat = cell_category(G.p, G.q, G.n_bound, G.l_bound)
    carriers: dict[int, list[str]] = {}
    towers: dict[int, dict[int, dict[str, str]]] = {}
    for pos in range(len(cat.cells)):
        pair = cat.anchors_of(pos)
        space = G.values[pair]
        base_labels = sorted(space.levels[(0,)])
        carriers[pos] = base_labels
        to_base: dict[int, dict[str, str]] = {0: {x: x for x in base_labels}}
        for k in range(1, G.k_bound + 1):
            init = space.action(0, MonotoneMap(0, k, (0,)), (k,))
            if len(set(init.values())) != len(init) or set(init.values()) != set(base_labels):
                raise NotDiscreteError("initial-vertex maps are not bijections")
            to_base[k] = dict(init)
        towers[pos] = to_base
    index_of = {
        pos: {x: i for i, x in enumerate(carriers[pos])} for pos in range(len(cat.cells))
    }
    tables = []
    for op in cat.ops:
        pair = cat.anchors_of(op.src)
        arrow = G.actions[(op.axis, op.mediator, pair)]
        comp0 = arrow.components[(0,)]
        table = tuple(index_of[op.dst][comp0[x]] for x in carriers[op.src])
        for k in range(1, G.k_bound + 1):
            src_tower = towers[op.src][k]
            dst_tower = towers[op.dst][k]
            compk = arrow.components[(k,)]
            for lbl_k, lbl_0 in src_tower.items():
                if dst_tower[compk[lbl_k]] != comp0[lbl_0]:
                    raise NotDiscreteError("slice actions are not constant across the tower")
        tables.append(table)
    core = CoreFunctor(
        G.p, G.q, G.n_bound, G.l_bound, tuple(len(carriers[c]) for c in range(len(cat.cells))), tuple(tables)
    )
    labels = {cat.anchors_of(pos): carriers[pos] for pos in range(len(cat.cells))}
    return core, labels
