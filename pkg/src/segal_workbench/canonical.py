"""Canonical labelling of finite table bundles.

A bundle is a family of finite carriers (one per structural cell) together
with functions between them (one per structural operation).  Two bundles
are isomorphic when per-cell bijections conjugate one family of tables
into the other; the canonical form is the lexicographically least
conjugate, computed by colour refinement with individualisation on ties.
Cells and operations are structural and never permuted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class TableBundle:
    """Carrier sizes per cell plus function tables per operation.

    ``ops[i] = (src_cell, dst_cell, table)`` where ``table[j]`` is the image
    of element j of the source carrier.
    """

    sizes: tuple[int, ...]
    ops: tuple[tuple[int, int, tuple[int, ...]], ...]


CanonicalKey = tuple


def canonical_form(bundle: TableBundle) -> tuple[CanonicalKey, tuple[tuple[int, ...], ...]]:
    """Return (canonical key, per-cell permutations old-position -> new-position)."""

    ncells = len(bundle.sizes)
    elements = [(c, i) for c in range(ncells) for i in range(bundle.sizes[c])]
    out_ops: list[list[tuple[int, int, tuple[int, ...]]]] = [[] for _ in range(ncells)]
    incoming: dict[tuple[int, int], list[tuple[int, tuple[int, int]]]] = {e: [] for e in elements}
    for oi, (src, dst, table) in enumerate(bundle.ops):
        out_ops[src].append((oi, dst, table))
        for j, v in enumerate(table):
            incoming[(dst, v)].append((oi, (src, j)))

    def refine(colors: dict) -> dict:
        while True:
            signatures = {}
            for e in elements:
                c, i = e
                outward = tuple((oi, colors[(dst, table[i])]) for oi, dst, table in out_ops[c])
                inward = tuple(sorted((oi, colors[src_e]) for oi, src_e in incoming[e]))
                signatures[e] = (colors[e], outward, inward)
            ranks = {s: r for r, s in enumerate(sorted(set(signatures.values())))}
            refreshed = {e: ranks[signatures[e]] for e in elements}
            if refreshed == colors:
                return colors
            colors = refreshed

    best: list = [None]

    def leaf(colors: dict) -> None:
        perms = []
        for c in range(ncells):
            order = sorted(range(bundle.sizes[c]), key=lambda i: colors[(c, i)])
            perm = [0] * bundle.sizes[c]
            for new_i, old_i in enumerate(order):
                perm[old_i] = new_i
            perms.append(tuple(perm))
        tables = []
        for src, dst, table in bundle.ops:
            new_table = [0] * len(table)
            for old_i, old_v in enumerate(table):
                new_table[perms[src][old_i]] = perms[dst][old_v]
            tables.append(tuple(new_table))
        key = (bundle.sizes, tuple(tables))
        if best[0] is None or key < best[0][0]:
            best[0] = (key, tuple(perms))

    def search(colors: dict) -> None:
        colors = refine(colors)
        for c in range(ncells):
            groups: dict[int, list[int]] = {}
            for i in range(bundle.sizes[c]):
                groups.setdefault(colors[(c, i)], []).append(i)
            tied = sorted(g for g, members in groups.items() if len(members) > 1)
            if tied:
                for i in groups[tied[0]]:
                    trial = dict(colors)
                    trial[(c, i)] = -1
                    search(trial)
                return
        leaf(colors)

    if not elements:
        return (bundle.sizes, tuple(t for *_ , t in bundle.ops)), tuple(() for _ in range(ncells))
    search({(c, i): c for c, i in elements})
    return best[0]


def apply_permutations(bundle: TableBundle, perms: Sequence[tuple[int, ...]]) -> TableBundle:
    """Relabel a bundle by per-cell permutations (old-position -> new-position)."""
    tables = []
    for src, dst, table in bundle.ops:
        new_table = [0] * len(table)
        for old_i, old_v in enumerate(table):
            new_table[perms[src][old_i]] = perms[dst][old_v]
        tables.append((src, dst, tuple(new_table)))
    return TableBundle(bundle.sizes, tuple(tables))
