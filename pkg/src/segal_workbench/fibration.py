"""Decision procedures for the four fibration classes, with witnesses.

Everything is decided in the strict discrete semantics: comparison maps
onto strict pullbacks must be level-wise bijections.  Every verdict is
conservative: a passing map satisfies the defining comparisons exactly.
False verdicts carry a witness that can be re-evaluated standalone.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .simplex import MonotoneMap, constant
from .presheaf import (
    AXIS_BASE,
    AXIS_FIB,
    AXIS_SPACE,
    PresheafMap,
    TruncatedPresheaf,
    level_indices,
    pair_label,
)


class BoundShortfallError(ValueError):
    """The truncation is too small for the requested comparison."""


class FibrationClass(Enum):
    REEDY_LEFT = "ReedyLeft"
    SEGAL_COCARTESIAN = "SegalCoCartesian"
    COCARTESIAN = "CoCartesian"
    LEFT = "Left"


# Containment order used when reporting the finest class of a map.
CLASS_ORDER = (
    FibrationClass.LEFT,
    FibrationClass.COCARTESIAN,
    FibrationClass.SEGAL_COCARTESIAN,
    FibrationClass.REEDY_LEFT,
)


@dataclass(frozen=True)
class Witness:
    condition: str
    index: tuple[int, ...]
    lhs_count: int
    rhs_count: int
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "index": list(self.index),
            "lhs_count": self.lhs_count,
            "rhs_count": self.rhs_count,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class Verdict:
    fibration_class: str
    ok: bool
    witness: Witness | None = None

    def to_dict(self) -> dict:
        out = {"class": self.fibration_class, "verdict": "pass" if self.ok else "fail"}
        if self.witness is not None:
            out["witness"] = self.witness.to_dict()
        return out


def _initial_vertex(n: int) -> MonotoneMap:
    return MonotoneMap(0, n, (0,))


def _vertex(j: int) -> MonotoneMap:
    return MonotoneMap(0, 1, (j,))


def _edge(i: int, j: int, n: int) -> MonotoneMap:
    return MonotoneMap(1, n, (i, j))


def _bijection_failure(domain, mapping, codomain) -> tuple[bool, str]:
    """Check that mapping restricted to domain is a bijection onto codomain."""
    image = [mapping[d] for d in domain]
    if len(set(image)) != len(image):
        seen = {}
        for d, v in zip(domain, image):
            if v in seen:
                return False, f"'{seen[v]}' and '{d}' collide"
            seen[v] = d
    missing = set(codomain) - set(image)
    if missing:
        return False, f"no preimage for {sorted(missing)[0]!r}"
    extra = set(image) - set(codomain)
    if extra:
        return False, f"image escapes the pullback at {sorted(extra)[0]!r}"
    return True, ""


def _initial_vertex_counts(p: PresheafMap, axis: int, idx: tuple[int, ...]):
    """Comparison of a level with the strict pullback along the initial vertex."""
    L, X = p.domain, p.codomain
    height = idx[axis]
    init = _initial_vertex(height)
    idx0 = tuple(0 if a == axis else v for a, v in enumerate(idx))
    l_init = L.action(axis, init, idx)
    x_init = X.action(axis, init, idx)
    pullback = [
        (a, b)
        for a in L.levels[idx0]
        for b in X.levels[idx]
        if p.components[idx0][a] == x_init[b]
    ]
    mapping = {xi: (l_init[xi], p.components[idx][xi]) for xi in L.levels[idx]}
    return L.levels[idx], mapping, pullback


def _relative_degeneracy_counts(p: PresheafMap, n: int, k: int, l: int):
    """Comparison of level zero with the base-relative degeneracy pullback."""
    L, X = p.domain, p.codomain
    idx0 = (k, 0, l)
    idxn = (k, n, l)
    collapse = constant(n, 0, 0)
    x_degen = X.action(AXIS_BASE, collapse, idx0)
    l_degen = L.action(AXIS_BASE, collapse, idx0)
    pullback = [
        (chi, xi)
        for chi in X.levels[idx0]
        for xi in L.levels[idxn]
        if x_degen[chi] == p.components[idxn][xi]
    ]
    mapping = {x: (p.components[idx0][x], l_degen[x]) for x in L.levels[idx0]}
    return L.levels[idx0], mapping, pullback


def _spine_tuples(space: TruncatedPresheaf, k: int, n: int, l: int):
    """All composable n-tuples of edges, enumerated by path extension."""
    idx1 = (k, 1, l)
    start = space.action(AXIS_BASE, _vertex(0), idx1)
    stop = space.action(AXIS_BASE, _vertex(1), idx1)
    by_start: dict[str, list[str]] = {}
    for e in space.levels[idx1]:
        by_start.setdefault(start[e], []).append(e)
    tuples: list[tuple[str, ...]] = []

    def extend(path: tuple[str, ...]) -> None:
        if len(path) == n:
            tuples.append(path)
            return
        for e in by_start.get(stop[path[-1]], ()):
            extend(path + (e,))

    for e in space.levels[idx1]:
        extend((e,))
    return tuples


def _spine_counts(p: PresheafMap, k: int, n: int, l: int):
    L = p.domain
    idx = (k, n, l)
    edges = [L.action(AXIS_BASE, _edge(i, i + 1, n), idx) for i in range(n)]
    mapping = {xi: tuple(edge[xi] for edge in edges) for xi in L.levels[idx]}
    return L.levels[idx], mapping, _spine_tuples(L, k, n, l)


def _walking_iso_counts(p: PresheafMap, k: int, l: int):
    """Comparison with triples (3-cell with collapsed 02 and 13 edges, two points)."""
    L = p.domain
    idx3 = (k, 3, l)
    idx0 = (k, 0, l)
    edge02 = L.action(AXIS_BASE, _edge(0, 2, 3), idx3)
    edge13 = L.action(AXIS_BASE, _edge(1, 3, 3), idx3)
    degen = L.action(AXIS_BASE, constant(1, 0, 0), idx0)
    collapse3 = L.action(AXIS_BASE, constant(3, 0, 0), idx0)
    degen_of = {}
    for x in L.levels[idx0]:
        degen_of.setdefault(degen[x], []).append(x)
    triples = [
        (sigma, a, b)
        for sigma in L.levels[idx3]
        for a in degen_of.get(edge02[sigma], ())
        for b in degen_of.get(edge13[sigma], ())
    ]
    mapping = {x: (collapse3[x], x, x) for x in L.levels[idx0]}
    return L.levels[idx0], mapping, triples


def _run_comparison(p, counts, condition, idx) -> Verdict | None:
    domain, mapping, pullback = counts
    ok, detail = _bijection_failure(domain, mapping, pullback)
    if ok:
        return None
    return Witness(condition, idx, len(domain), len(pullback), detail)


def is_left_fibration_ss(p: PresheafMap) -> Verdict:
    """Initial-vertex comparison for a map of arity-2 presheaves."""
    if p.domain.arity != 2:
        raise ValueError("is_left_fibration_ss expects arity-2 presheaves")
    n_bound, l_bound = p.domain.bounds
    for n in range(1, n_bound + 1):
        for l in range(l_bound + 1):
            witness = _run_comparison(
                p, _initial_vertex_counts(p, 0, (n, l)), "initial-vertex", (n, l)
            )
            if witness is not None:
                return Verdict("Left(ss)", False, witness)
    return Verdict("Left(ss)", True)


def is_reedy_left(p: PresheafMap) -> Verdict:
    """Level-wise initial-vertex comparison in the fibration direction."""
    if p.domain.arity != 3:
        raise ValueError("is_reedy_left expects arity-3 presheaves")
    k_bound, n_bound, l_bound = p.domain.bounds
    for n in range(n_bound + 1):
        for k in range(1, k_bound + 1):
            for l in range(l_bound + 1):
                witness = _run_comparison(
                    p,
                    _initial_vertex_counts(p, AXIS_FIB, (k, n, l)),
                    "k-initial-vertex",
                    (k, n, l),
                )
                if witness is not None:
                    return Verdict(FibrationClass.REEDY_LEFT.value, False, witness)
    return Verdict(FibrationClass.REEDY_LEFT.value, True)


def is_segal_cocartesian(p: PresheafMap) -> Verdict:
    """Reedy left plus the spine comparison in the base direction."""
    k_bound, n_bound, l_bound = p.domain.bounds
    if n_bound < 2:
        raise BoundShortfallError("the spine comparison needs base levels up to 2")
    reedy = is_reedy_left(p)
    if not reedy.ok:
        return Verdict(FibrationClass.SEGAL_COCARTESIAN.value, False, reedy.witness)
    for n in range(2, n_bound + 1):
        for k in range(k_bound + 1):
            for l in range(l_bound + 1):
                witness = _run_comparison(p, _spine_counts(p, k, n, l), "spine", (k, n, l))
                if witness is not None:
                    return Verdict(FibrationClass.SEGAL_COCARTESIAN.value, False, witness)
    return Verdict(FibrationClass.SEGAL_COCARTESIAN.value, True)


def is_cocartesian(p: PresheafMap) -> Verdict:
    """Segal coCartesian plus the collapsed-edges completeness comparison."""
    k_bound, n_bound, l_bound = p.domain.bounds
    if n_bound < 3:
        raise BoundShortfallError("the completeness comparison needs base levels up to 3")
    segal = is_segal_cocartesian(p)
    if not segal.ok:
        return Verdict(FibrationClass.COCARTESIAN.value, False, segal.witness)
    for k in range(k_bound + 1):
        for l in range(l_bound + 1):
            witness = _run_comparison(p, _walking_iso_counts(p, k, l), "walking-iso", (k, 0, l))
            if witness is not None:
                return Verdict(FibrationClass.COCARTESIAN.value, False, witness)
    return Verdict(FibrationClass.COCARTESIAN.value, True)


def is_left_fibration_sss(p: PresheafMap) -> Verdict:
    """Reedy left plus base-relative degeneracy comparisons.

    The degeneracy condition is taken relative to the codomain (the
    comparison lands in the strict pullback of the degenerate base cell),
    which is the form that is stable under strict pullback and restricts
    to the plain level-wise bijection over the point.
    """
    k_bound, n_bound, l_bound = p.domain.bounds
    reedy = is_reedy_left(p)
    if not reedy.ok:
        return Verdict(FibrationClass.LEFT.value, False, reedy.witness)
    for n in range(1, n_bound + 1):
        for k in range(k_bound + 1):
            for l in range(l_bound + 1):
                witness = _run_comparison(
                    p,
                    _relative_degeneracy_counts(p, n, k, l),
                    "relative-degeneracy",
                    (k, n, l),
                )
                if witness is not None:
                    return Verdict(FibrationClass.LEFT.value, False, witness)
    return Verdict(FibrationClass.LEFT.value, True)


PREDICATES = {
    FibrationClass.REEDY_LEFT: is_reedy_left,
    FibrationClass.SEGAL_COCARTESIAN: is_segal_cocartesian,
    FibrationClass.COCARTESIAN: is_cocartesian,
    FibrationClass.LEFT: is_left_fibration_sss,
}


def classify_finest(p: PresheafMap) -> tuple[str | None, dict[str, Verdict]]:
    """Run every applicable predicate and name the finest passing class."""
    verdicts: dict[str, Verdict] = {}
    for cls in CLASS_ORDER:
        try:
            verdicts[cls.value] = PREDICATES[cls](p)
        except BoundShortfallError:
            continue
    for cls in CLASS_ORDER:
        v = verdicts.get(cls.value)
        if v is not None and v.ok:
            return cls.value, verdicts
    return None, verdicts


def reevaluate_witness(p: PresheafMap, witness: Witness) -> tuple[int, int]:
    """Recompute the two sides of a failed comparison from its witness data."""
    idx = tuple(witness.index)
    if witness.condition == "initial-vertex":
        domain, _, pullback = _initial_vertex_counts(p, 0, idx)
    elif witness.condition == "k-initial-vertex":
        domain, _, pullback = _initial_vertex_counts(p, AXIS_FIB, idx)
    elif witness.condition == "spine":
        domain, _, pullback = _spine_counts(p, *idx)
    elif witness.condition == "walking-iso":
        domain, _, pullback = _walking_iso_counts(p, idx[0], idx[2])
    elif witness.condition == "relative-degeneracy":
        k, n, l = idx
        domain, _, pullback = _relative_degeneracy_counts(p, n, k, l)
    else:
        raise ValueError(f"unknown witness condition {witness.condition!r}")
    return len(domain), len(pullback)


@dataclass(frozen=True)
class VertexFiberReport:
    vertex: tuple[int, int]
    segal: bool | None
    complete: bool | None
    constant: bool


@dataclass(frozen=True)
class PointFiberReport:
    vertices: tuple[VertexFiberReport, ...]
    global_segal: bool | None
    global_complete: bool | None
    global_constant: bool

    def fibers_all(self, attribute: str) -> bool:
        return all(getattr(v, attribute) for v in self.vertices)

    def agreement(self) -> dict[str, bool | None]:
        """Whether the global verdicts match the conjunction over vertices."""
        out: dict[str, bool | None] = {}
        for attribute, global_value in (
            ("segal", self.global_segal),
            ("complete", self.global_complete),
            ("constant", self.global_constant),
        ):
            if global_value is None or any(getattr(v, attribute) is None for v in self.vertices):
                out[attribute] = None
            else:
                out[attribute] = global_value == self.fibers_all(attribute)
        return out


def strict_vertex_fiber(p: PresheafMap, base_p: int, base_q: int, v: int, u: int) -> TruncatedPresheaf:
    """The strict fiber of a map over the constant-anchor tower of one vertex."""
    L = p.domain
    bounds = L.bounds
    levels = {}
    for idx in level_indices(bounds):
        k, n, l = idx
        target = pair_label(constant(n, base_p, v).label, constant(l, base_q, u).label)
        levels[idx] = tuple(x for x in L.levels[idx] if p.components[idx][x] == target)
    actions = {}
    for (axis, gen, idx), table in L.actions.items():
        actions[(axis, gen, idx)] = {x: table[x] for x in levels[idx]}
    return TruncatedPresheaf(3, bounds, levels, actions)


def fiber_is_constant(fiber: TruncatedPresheaf) -> bool:
    k_bound, n_bound, l_bound = fiber.bounds
    for n in range(1, n_bound + 1):
        for k in range(k_bound + 1):
            for l in range(l_bound + 1):
                degen = fiber.action(AXIS_BASE, constant(n, 0, 0), (k, 0, l))
                image = [degen[x] for x in fiber.levels[(k, 0, l)]]
                if len(set(image)) != len(image) or set(image) != set(fiber.levels[(k, n, l)]):
                    return False
    return True


def fiber_is_segal(fiber: TruncatedPresheaf) -> bool | None:
    from .presheaf import terminal_map

    k_bound, n_bound, l_bound = fiber.bounds
    if n_bound < 2:
        return None
    pm = terminal_map(fiber)
    for n in range(2, n_bound + 1):
        for k in range(k_bound + 1):
            for l in range(l_bound + 1):
                domain, mapping, pullback = _spine_counts(pm, k, n, l)
                ok, _ = _bijection_failure(domain, mapping, pullback)
                if not ok:
                    return False
    return True


def fiber_is_complete(fiber: TruncatedPresheaf) -> bool | None:
    from .presheaf import terminal_map

    k_bound, n_bound, l_bound = fiber.bounds
    if n_bound < 3:
        return None
    pm = terminal_map(fiber)
    if fiber_is_segal(fiber) is False:
        return False
    for k in range(k_bound + 1):
        for l in range(l_bound + 1):
            domain, mapping, pullback = _walking_iso_counts(pm, k, l)
            ok, _ = _bijection_failure(domain, mapping, pullback)
            if not ok:
                return False
    return True


def point_fiber_classification(p: PresheafMap, base_p: int, base_q: int) -> PointFiberReport:
    """Classify every vertex fiber and compare with the global verdicts."""
    reedy = is_reedy_left(p)
    if not reedy.ok:
        raise ValueError("point fiber classification expects a Reedy left map")
    vertices = []
    for v in range(base_p + 1):
        for u in range(base_q + 1):
            fiber = strict_vertex_fiber(p, base_p, base_q, v, u)
            vertices.append(
                VertexFiberReport(
                    (v, u),
                    fiber_is_segal(fiber),
                    fiber_is_complete(fiber),
                    fiber_is_constant(fiber),
                )
            )
    n_bound = p.domain.bounds[1]
    segal = is_segal_cocartesian(p).ok if n_bound >= 2 else None
    complete = is_cocartesian(p).ok if n_bound >= 3 else None
    constant_class = is_left_fibration_sss(p).ok
    return PointFiberReport(tuple(vertices), segal, complete, constant_class)
