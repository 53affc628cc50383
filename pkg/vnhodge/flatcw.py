"""
Finite CW complexes with group-ring incidence data and flat Hilbert bundles over them.

Cells are lifted to the universal cover and deck transformations act on the lifts
from the right, so the boundary of a lifted cell reads

    ∂σ = sum_τ τ · a_στ,    a_στ = sum_k c_k γ_k in Z[Γ].

A flat bundle is a representation R of Γ^op on a Hilbert module M, i.e.
R(γ1 γ2) = R(γ2) R(γ1). The cochain complex (C•, δ) has C^p = M^{#p-cells} and
δ entry (σ, τ) equal to sum_k c_k R(γ_k); this composes to zero exactly when ∂∂ = 0.
"""

import itertools
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import networkx as nx
import numpy as np
import pandas as pd

from vnhodge.enums import GroupKind
from vnhodge.errors import (
    CocycleViolatedError,
    EmptyWindowError,
    NonpositiveDensityError,
    NotInvertibleError,
    RelationViolatedError,
    ShapeMismatchError,
    UnknownGroupElementError,
    UnsupportedDimensionError,
    ValidationFailure,
)
from vnhodge.hcomplex import (
    ChainMap,
    HilbertComplex,
    betti,
    make_complex,
    ns_exponent,
    spectral_density,
    spectrum,
)
from vnhodge.hmodule import (
    HilbertModule,
    ModuleMorphism,
    compose,
    identity_morphism,
    zero_morphism,
)
from vnhodge.mixins import JsonExportMixin, PandasExportMixin
from vnhodge.utils import inform_user
from vnhodge.vna_core import (
    regular_cyclic_algebra,
    sample_frequencies,
    sampled_circle_algebra,
)

logger = logging.getLogger(__name__)

inform = inform_user(lambda info: info)

type Word = tuple[tuple[str, int], ...]

RELATION_TOLERANCE = 1e-10
COCYCLE_TOLERANCE = 1e-10
CONDITION_LIMIT = 1e12


def simplify_word(word: Iterable[tuple[str, int]]) -> Word:
    """Merge adjacent powers of the same generator and drop zero exponents."""
    reduced: list[tuple[str, int]] = []
    for generator, exponent in word:
        if reduced and reduced[-1][0] == generator:
            exponent += reduced.pop()[1]
        if exponent != 0:
            reduced.append((generator, int(exponent)))
    return tuple(reduced)


def invert_word(word: Word) -> Word:
    return tuple((g, -e) for g, e in reversed(word))


@dataclass(frozen=True)
class Term:
    """One summand c * γ of a group-ring element, γ given as a generator word."""

    coef: int
    word: Word = ()


@dataclass(frozen=True)
class Incidence:
    """Group-ring coefficient of the p-cell ``target`` in the boundary of ``source``."""

    source: str
    target: str
    terms: tuple[Term, ...]


@dataclass(frozen=True)
class CwComplexData:
    """
    Cells per dimension (labels) and the group-ring incidences between cells of
    adjacent dimensions.
    """

    cells: tuple[tuple[str, ...], ...]
    incidence: tuple[Incidence, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(tuple(c) for c in self.cells))
        object.__setattr__(self, "incidence", tuple(self.incidence))
        labels = [label for dim_cells in self.cells for label in dim_cells]
        if len(set(labels)) != len(labels):
            raise ValidationFailure("Cell labels must be unique across all dimensions")
        dims = self.cell_dimensions
        for inc in self.incidence:
            if inc.source not in dims or inc.target not in dims:
                missing = inc.source if inc.source not in dims else inc.target
                raise ValidationFailure(
                    f"Incidence refers to unknown cell {missing!r}", cell=missing
                )
            if dims[inc.source] != dims[inc.target] + 1:
                raise ValidationFailure(
                    f"Incidence {inc.source!r} -> {inc.target!r} does not lower the "
                    "dimension by one",
                    source=inc.source,
                    target=inc.target,
                )

    def __repr__(self):
        name = self.__class__.__name__
        counts = tuple(len(c) for c in self.cells)
        return f"{name}(cell_counts={counts}, incidences={len(self.incidence)})"

    @property
    def dimension(self) -> int:
        return len(self.cells) - 1

    @property
    def cell_counts(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.cells)

    @property
    def cell_dimensions(self) -> dict[str, int]:
        return {label: p for p, dim_cells in enumerate(self.cells) for label in dim_cells}

    @property
    def cell_positions(self) -> dict[str, int]:
        return {
            label: k for dim_cells in self.cells for k, label in enumerate(dim_cells)
        }

    def boundary(self, cell: str) -> list[Incidence]:
        return [inc for inc in self.incidence if inc.source == cell]

    def generators(self) -> set[str]:
        return {g for inc in self.incidence for t in inc.terms for g, _ in t.word}

    def incidence_table(self) -> pd.DataFrame:
        """Flat table of incidence terms: from, to, coef, word."""
        rows = [
            (inc.source, inc.target, t.coef, " ".join(f"{g}^{e}" for g, e in t.word))
            for inc in self.incidence
            for t in inc.terms
        ]
        return pd.DataFrame(rows, columns=["from", "to", "coef", "word"])


@dataclass(frozen=True)
class GroupSpec:
    """
    Discrete group a flat bundle is built over.

    Attributes
    ----------
    kind : GroupKind
        cyclic, commuting, table or free.
    generators : tuple[str, ...]
        Generator labels used in incidence words.
    order : int, optional
        Order n of Z_n for ``cyclic``; optional common order of every generator for
        ``commuting``.
    elements : tuple[str, ...]
        Element labels of a ``table`` group.
    table : tuple[tuple[str, ...], ...]
        Multiplication table of a ``table`` group: table[a][b] is the label of a*b.
    identity : str, optional
        Identity element of a ``table`` group.
    """

    kind: GroupKind
    generators: tuple[str, ...]
    order: int | None = None
    elements: tuple[str, ...] = ()
    table: tuple[tuple[str, ...], ...] = ()
    identity: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", GroupKind(self.kind))
        object.__setattr__(self, "generators", tuple(self.generators))
        if len(set(self.generators)) != len(self.generators):
            raise ValidationFailure("Generator labels must be unique")
        match self.kind:
            case GroupKind.CYCLIC:
                if len(self.generators) != 1:
                    raise ValidationFailure("A cyclic group has exactly one generator")
                if self.order is None or self.order < 1:
                    raise ValidationFailure("A cyclic group needs a positive order")
            case GroupKind.TABLE:
                n = len(self.elements)
                if n == 0 or len(self.table) != n or any(len(r) != n for r in self.table):
                    raise ValidationFailure(
                        "A table group needs a square multiplication table over its "
                        "elements"
                    )
                known = set(self.elements)
                if self.identity not in known:
                    raise ValidationFailure("The identity must be one of the elements")
                unknown = [g for g in self.generators if g not in known]
                unknown += [x for row in self.table for x in row if x not in known]
                if unknown:
                    raise UnknownGroupElementError(
                        f"Unknown group elements {sorted(set(unknown))}",
                        elements=sorted(set(unknown)),
                    )

    def multiply(self, a: str, b: str) -> str:
        index = {e: i for i, e in enumerate(self.elements)}
        return self.table[index[a]][index[b]]


def _residual(lhs: ModuleMorphism, rhs: ModuleMorphism) -> float:
    scale = max(1.0, lhs.max_entry(), rhs.max_entry())
    return (lhs - rhs).max_entry() / scale


def _power(f: ModuleMorphism, exponent: int) -> ModuleMorphism:
    return ModuleMorphism(
        f.source,
        f.target,
        tuple(np.linalg.matrix_power(b, exponent) if b.size else b for b in f.blocks),
    )


def _inverse(f: ModuleMorphism) -> ModuleMorphism:
    return ModuleMorphism(
        f.target, f.source, tuple(np.linalg.inv(b) if b.size else b for b in f.blocks)
    )


def condition_number(f: ModuleMorphism) -> float:
    """Largest 2-norm condition number over the blocks of a fiber map."""
    return max((float(np.linalg.cond(b)) for b in f.blocks if b.size), default=1.0)


@dataclass(frozen=True, eq=False)
class FlatBundle:
    """
    Flat Hilbert bundle given by the monodromy representation R of Γ^op on the
    fiber M. Words evaluate contravariantly:
    R(g1^e1 ... gk^ek) = R(gk)^ek ... R(g1)^e1.
    """

    group: GroupSpec
    fiber: HilbertModule
    monodromy: Mapping[str, ModuleMorphism]
    conditions: Mapping[str, float] = field(default_factory=dict)
    relation_residuals: Mapping[str, float] = field(default_factory=dict)
    _inverses: dict = field(default_factory=dict, repr=False)

    @property
    def algebra(self):
        return self.fiber.algebra

    def image(self, generator: str, exponent: int = 1) -> ModuleMorphism:
        if generator not in self.monodromy:
            raise UnknownGroupElementError(
                f"Generator {generator!r} is not part of the bundle's group",
                generator=generator,
            )
        base = self.monodromy[generator]
        if exponent < 0:
            if generator not in self._inverses:
                self._inverses[generator] = _inverse(base)
            base = self._inverses[generator]
        return _power(base, abs(exponent))

    def evaluate(self, word: Word) -> ModuleMorphism:
        result = identity_morphism(self.fiber)
        for generator, exponent in word:
            result = compose(self.image(generator, exponent), result)
        return result

    def group_ring_image(self, terms: Iterable[Term]) -> ModuleMorphism:
        """sum_k c_k R(γ_k)."""
        result = zero_morphism(self.fiber, self.fiber)
        for term in terms:
            result = result + term.coef * self.evaluate(term.word)
        return result


def relation_residuals(
    spec: GroupSpec, images: Mapping[str, ModuleMorphism], fiber: HilbertModule
) -> dict[str, float]:
    """Residual of every defining relation of the group under the given images."""
    residuals = {}
    identity = identity_morphism(fiber)
    match spec.kind:
        case GroupKind.CYCLIC:
            (g,) = spec.generators
            residuals[f"{g}^{spec.order}"] = _residual(_power(images[g], spec.order), identity)
        case GroupKind.COMMUTING:
            for a, b in itertools.combinations(spec.generators, 2):
                residuals[f"[{a},{b}]"] = _residual(
                    compose(images[a], images[b]), compose(images[b], images[a])
                )
            if spec.order is not None:
                for g in spec.generators:
                    residuals[f"{g}^{spec.order}"] = _residual(
                        _power(images[g], spec.order), identity
                    )
        case GroupKind.TABLE:
            residuals.update(_table_residuals(spec, images, identity))
        case GroupKind.FREE:
            pass
    return residuals


def _table_residuals(
    spec: GroupSpec, images: Mapping[str, ModuleMorphism], identity: ModuleMorphism
) -> dict[str, float]:
    # Walk the Cayley graph from the identity with R(g x) = R(x) R(g); every edge
    # closing onto a visited element is a relation to check.
    assigned = {spec.identity: identity}
    residuals = {}
    queue = deque([spec.identity])
    while queue:
        g = queue.popleft()
        for x in spec.generators:
            h = spec.multiply(g, x)
            value = compose(images[x], assigned[g])
            if h in assigned:
                residuals[f"{g}*{x}={h}"] = _residual(value, assigned[h])
            else:
                assigned[h] = value
                queue.append(h)
    return residuals


def make_bundle_from_monodromy(
    spec: GroupSpec, fiber: HilbertModule, images: Mapping[str, ModuleMorphism]
) -> FlatBundle:
    """
    Validate a monodromy representation and wrap it as a flat bundle.

    Parameters
    ----------
    spec : GroupSpec
        The group.
    fiber : HilbertModule
        Fiber module M.
    images : Mapping[str, ModuleMorphism]
        Invertible endomorphism R(g) of M for every generator g.

    Returns
    -------
    FlatBundle
        Bundle with condition numbers and relation residuals recorded.

    Raises
    ------
    NotInvertibleError
        If an image is singular or its condition number exceeds 1e12.
    RelationViolatedError
        If a defining relation fails by more than 1e-10.

    """
    unknown = set(images) - set(spec.generators)
    if unknown:
        raise UnknownGroupElementError(
            f"Monodromy given for unknown generators {sorted(unknown)}",
            generators=sorted(unknown),
        )
    missing = [g for g in spec.generators if g not in images]
    if missing:
        raise ValidationFailure(
            f"Monodromy missing for generators {missing}", generators=missing
        )

    conditions = {}
    for g in spec.generators:
        R = images[g]
        if R.source != fiber or R.target != fiber:
            raise ShapeMismatchError(
                f"Monodromy of {g!r} is not an endomorphism of the fiber", generator=g
            )
        condition = condition_number(R)
        if not np.isfinite(condition) or condition > CONDITION_LIMIT:
            raise NotInvertibleError(g, condition)
        conditions[g] = condition

    residuals = relation_residuals(spec, images, fiber)
    for relation, residual in residuals.items():
        if residual > RELATION_TOLERANCE:
            raise RelationViolatedError(relation, residual)

    return FlatBundle(spec, fiber, dict(images), conditions, residuals)


def trivial_bundle(spec: GroupSpec, fiber: HilbertModule) -> FlatBundle:
    identity = identity_morphism(fiber)
    return make_bundle_from_monodromy(spec, fiber, {g: identity for g in spec.generators})


def regular_cyclic_bundle(
    order: int, generators: Sequence[str] = ("g",)
) -> FlatBundle:
    """
    The regular representation of Z_n in its Fourier picture: fiber l^2(Z_n) over the
    algebra of characters, where a generator acts by e^{2πij/n} on character j.
    With several generators each acts by the same character (a quotient of the free
    group onto Z_n).
    """
    algebra = regular_cyclic_algebra(order)
    fiber = HilbertModule(algebra, (1,) * order)
    phases = np.exp(2j * np.pi * np.arange(order) / order)
    image = ModuleMorphism(fiber, fiber, tuple(np.array([[z]]) for z in phases))
    if len(generators) == 1:
        spec = GroupSpec(GroupKind.CYCLIC, tuple(generators), order=order)
    else:
        spec = GroupSpec(GroupKind.COMMUTING, tuple(generators), order=order)
    return make_bundle_from_monodromy(spec, fiber, {g: image for g in generators})


def sampled_z_bundle(
    fibers: int,
    generators: Sequence[str] = ("g",),
    charges: Sequence[int] | None = None,
    kind: GroupKind | str = GroupKind.COMMUTING,
) -> FlatBundle:
    """
    Sampled direct integral of the regular representation of Z: on the fiber at
    ω_j = (j + 1/2)/N a generator with charge q acts by e^{2πiqω_j}. Several
    generators describe the pull-back of the Z-cover along the homomorphism that
    sends generator k to charges[k] (all ones by default).
    """
    charges = [1] * len(generators) if charges is None else list(charges)
    if len(charges) != len(generators):
        raise ValidationFailure("Need one charge per generator")
    algebra = sampled_circle_algebra(fibers)
    fiber = HilbertModule(algebra, (1,) * fibers)
    omega = sample_frequencies(fibers)
    images = {
        g: ModuleMorphism(
            fiber, fiber, tuple(np.array([[z]]) for z in np.exp(2j * np.pi * q * omega))
        )
        for g, q in zip(generators, charges)
    }
    spec = GroupSpec(GroupKind(kind), tuple(generators))
    return make_bundle_from_monodromy(spec, fiber, images)


@dataclass(frozen=True, eq=False)
class CechCocycle:
    """
    Transition maps g_UV of a flat bundle on a finite cover. Keys are
    (U, V, component): overlaps U ∩ V may have several components, each labelled by
    the nerve edge that represents it. ``triples`` lists the flagged triple overlaps
    as ((U, V, a), (V, W, b), (U, W, c)) key triples.
    """

    fiber: HilbertModule
    patches: tuple[str, ...]
    transitions: Mapping[tuple[str, str, str], ModuleMorphism]
    triples: tuple[tuple[tuple[str, str, str], ...], ...] = ()

    def transition(self, U: str, V: str, component: str) -> ModuleMorphism:
        """g_UV on a component, filled in as the inverse of g_VU when not given."""
        if U == V and (U, V, component) not in self.transitions:
            return identity_morphism(self.fiber)
        if (U, V, component) in self.transitions:
            return self.transitions[(U, V, component)]
        if (V, U, component) in self.transitions:
            return _inverse(self.transitions[(V, U, component)])
        raise ValidationFailure(
            f"No transition map between {U!r} and {V!r} on component {component!r}",
            key=[U, V, component],
        )


def check_cocycle(c: CechCocycle) -> dict[str, float]:
    """
    Residuals of g_UU = 1, g_UV g_VU = 1 and g_UV g_VW = g_UW.

    Raises
    ------
    CocycleViolatedError
        On the first condition failing by more than 1e-10.
    """
    identity = identity_morphism(c.fiber)
    residuals = {}
    for (U, V, k), g in c.transitions.items():
        if U not in c.patches or V not in c.patches:
            raise ValidationFailure(f"Transition ({U}, {V}, {k}) uses an unknown patch")
        if g.source != c.fiber or g.target != c.fiber:
            raise ShapeMismatchError(f"Transition ({U}, {V}, {k}) is not a fiber map")
        if U == V:
            residuals[f"g_{U}{U}[{k}]"] = _residual(g, identity)
        elif (V, U, k) in c.transitions:
            residuals[f"g_{U}{V}·g_{V}{U}[{k}]"] = _residual(
                compose(g, c.transitions[(V, U, k)]), identity
            )
    for uv, vw, uw in c.triples:
        lhs = compose(c.transition(*uv), c.transition(*vw))
        where = f"({uv[0]},{uv[1]},{vw[1]})[{uv[2]},{vw[2]},{uw[2]}]"
        residuals[where] = _residual(lhs, c.transition(*uw))

    for where, residual in residuals.items():
        if residual > COCYCLE_TOLERANCE:
            raise CocycleViolatedError(where, residual)
    return residuals


def _nerve_edges(nerve: CwComplexData) -> list[tuple[str, str, str]]:
    edges = []
    if nerve.dimension < 1:
        return edges
    for edge in nerve.cells[1]:
        tail = head = None
        for inc in nerve.boundary(edge):
            coef = sum(t.coef for t in inc.terms)
            if coef == -1:
                tail = inc.target
            elif coef == 1:
                head = inc.target
        if tail is None or head is None:
            raise ValidationFailure(
                f"Nerve edge {edge!r} needs boundary head - tail", edge=edge
            )
        edges.append((edge, tail, head))
    return edges


def bundle_from_cocycle(c: CechCocycle, nerve: CwComplexData) -> FlatBundle:
    """
    Monodromy of the flat bundle glued from a Čech cocycle.

    Vertices of the nerve are the patches, edges (∂e = head - tail) the overlap
    components. A breadth-first spanning tree is grown from the first patch; every
    edge e outside the tree gives a free generator labelled by e, whose image is the
    ordered product of transition maps along the loop root -> tail (in the tree),
    tail -> head (across e), head -> root (in the tree). A simply connected nerve
    gives the trivial bundle over the trivial group.

    Raises
    ------
    CocycleViolatedError
        If the cocycle conditions fail.
    """
    check_cocycle(c)
    edges = _nerve_edges(nerve)
    patches = list(nerve.cells[0])
    if set(patches) != set(c.patches):
        raise ValidationFailure("Nerve vertices and cocycle patches differ")

    graph = nx.MultiGraph()
    graph.add_nodes_from(patches)
    for edge, tail, head in edges:
        graph.add_edge(tail, head, key=edge)

    identity = identity_morphism(c.fiber)
    outward, inward, tree_edges = {}, {}, set()
    for root in patches:
        if root in outward:
            continue
        outward[root] = inward[root] = identity
        for U, V in nx.bfs_edges(graph, root):
            # first listed overlap component between U and V joins the tree
            edge = next(iter(graph[U][V]))
            outward[V] = compose(outward[U], c.transition(U, V, edge))
            inward[V] = compose(c.transition(V, U, edge), inward[U])
            tree_edges.add(edge)

    images = {}
    for edge, tail, head in edges:
        if edge in tree_edges:
            continue
        images[edge] = compose(
            compose(outward[tail], c.transition(tail, head, edge)), inward[head]
        )
    inform(f"Nerve has {len(images)} independent loop(s)")
    spec = GroupSpec(GroupKind.FREE, tuple(images))
    return make_bundle_from_monodromy(spec, c.fiber, images)


@dataclass(frozen=True, eq=False)
class CellularComplex(HilbertComplex):
    """Cochain complex of a flat bundle, remembering the cells behind each summand."""

    cells: tuple[tuple[str, ...], ...] = ()
    fiber: HilbertModule | None = None

    def cell_slice(self, label: str, block: int) -> tuple[int, slice]:
        """Degree and row range of a cell inside a block of its cochain module."""
        for p, dim_cells in enumerate(self.cells):
            if label in dim_cells:
                m = self.fiber.mult[block]
                k = dim_cells.index(label)
                return p, slice(k * m, (k + 1) * m)
        raise KeyError(label)


def _cochain_module(fiber: HilbertModule, count: int) -> HilbertModule:
    return HilbertModule(fiber.algebra, tuple(m * count for m in fiber.mult))


def _group_ring_matrix(
    bundle: FlatBundle,
    rows: Sequence[str],
    cols: Sequence[str],
    entries: Iterable[Incidence],
    source: HilbertModule,
    target: HilbertModule,
) -> ModuleMorphism:
    """Morphism M^{cols} -> M^{rows} with entry (σ, τ) = sum_k c_k R(γ_k)."""
    row_index = {label: k for k, label in enumerate(rows)}
    col_index = {label: k for k, label in enumerate(cols)}
    mult = bundle.fiber.mult
    blocks = [
        np.zeros((len(rows) * m, len(cols) * m), dtype=complex) for m in mult
    ]
    for inc in entries:
        value = bundle.group_ring_image(inc.terms)
        r, c = row_index[inc.source], col_index[inc.target]
        for i, m in enumerate(mult):
            if m:
                blocks[i][r * m : (r + 1) * m, c * m : (c + 1) * m] += value.blocks[i]
    return ModuleMorphism(source, target, tuple(blocks))


def _check_words(X: CwComplexData, bundle: FlatBundle):
    unknown = X.generators() - set(bundle.monodromy)
    if unknown:
        raise UnknownGroupElementError(
            f"Incidence words use generators {sorted(unknown)} outside the bundle's "
            "group",
            generators=sorted(unknown),
        )


def assemble_cochain_complex(
    X: CwComplexData, E: FlatBundle, eps_d2: float | None = None
) -> CellularComplex:
    """
    Assemble the cochain complex of a CW complex with coefficients in a flat bundle.

    Parameters
    ----------
    X : CwComplexData
        Cells and group-ring incidences.
    E : FlatBundle
        Flat bundle with fiber M.
    eps_d2 : float, optional
        Tolerance for δ∘δ, see :func:`vnhodge.hcomplex.make_complex`.

    Returns
    -------
    CellularComplex
        C^p = M^{#p-cells} with δ entries sum c R(γ).

    Raises
    ------
    UnknownGroupElementError
        If an incidence word uses a generator the bundle does not know.
    NotAComplexError
        If δ∘δ does not vanish, i.e. ∂∂ != 0 in the chosen representation.

    Examples
    --------
    The circle with one vertex and one edge, ∂e = v·g - v, over the Z_2 bundle:

    >>> circle = CwComplexData((("v",), ("e",)), (Incidence("e", "v", (Term(1, (("g", 1),)), Term(-1))),))
    >>> C = assemble_cochain_complex(circle, regular_cyclic_bundle(2))

    """
    _check_words(X, E)
    modules = [_cochain_module(E.fiber, len(dim_cells)) for dim_cells in X.cells]
    dims = X.cell_dimensions
    differentials = []
    for p in range(X.dimension):
        entries = [inc for inc in X.incidence if dims[inc.source] == p + 1]
        differentials.append(
            _group_ring_matrix(
                E, X.cells[p + 1], X.cells[p], entries, modules[p], modules[p + 1]
            )
        )
    C = make_complex(modules, differentials, eps_d2)
    return CellularComplex(C.modules, C.differentials, X.cells, E.fiber)


@dataclass(frozen=True, eq=False)
class Subdivision:
    """
    A refinement X' of X together with the chain-level recipe r : C(X') -> C(X):
    ``recipe`` holds, per fine cell, the group-ring coefficients of coarse cells in
    r(fine cell).
    """

    coarse: CwComplexData
    fine: CwComplexData
    recipe: tuple[Incidence, ...]


def _split_edge(edge: str, incidences: list[Incidence]):
    first, second, midpoint = f"{edge}.1", f"{edge}.2", f"{edge}.m"
    cells = (first, second, midpoint)
    boundary, head_terms = [], []
    for inc in incidences:
        negative = tuple(t for t in inc.terms if t.coef < 0)
        positive = tuple(t for t in inc.terms if t.coef > 0)
        if negative:
            boundary.append(Incidence(first, inc.target, negative))
        if positive:
            boundary.append(Incidence(second, inc.target, positive))
            head_terms.append(Incidence(midpoint, inc.target, positive))
    boundary.append(Incidence(first, midpoint, (Term(1),)))
    boundary.append(Incidence(second, midpoint, (Term(-1),)))
    return cells, boundary, head_terms


def barycentric_subdivide(X: CwComplexData) -> Subdivision:
    """
    Subdivide every edge at a midpoint and carry the 2-cells over.

    An edge e with ∂e = P + N (P the terms with positive, N with negative
    coefficient) becomes e.1 with ∂ = N + e.m and e.2 with ∂ = P - e.m, so the
    group elements of the head ride on e.2. A 2-cell keeps its coefficient a on both
    halves of each edge of its boundary. The recipe sends e.1 to e, e.2 to 0, e.m to
    P and every old cell to itself.

    Parameters
    ----------
    X : CwComplexData
        Complex of dimension <= 2.

    Returns
    -------
    Subdivision

    Raises
    ------
    UnsupportedDimensionError
        For complexes of dimension > 2; supply a subdivision file instead.

    """
    if X.dimension > 2:
        raise UnsupportedDimensionError(
            f"Built-in subdivision supports dimension <= 2, got {X.dimension}",
            dimension=X.dimension,
        )
    if X.dimension < 1:
        recipe = tuple(Incidence(v, v, (Term(1),)) for v in X.cells[0])
        return Subdivision(X, X, recipe)

    vertices = list(X.cells[0])
    edges = []
    incidence = []
    recipe = [Incidence(v, v, (Term(1),)) for v in X.cells[0]]
    halves = {}
    for edge in X.cells[1]:
        (first, second, midpoint), boundary, head_terms = _split_edge(
            edge, X.boundary(edge)
        )
        vertices.append(midpoint)
        edges.extend([first, second])
        incidence.extend(boundary)
        halves[edge] = (first, second)
        recipe.append(Incidence(first, edge, (Term(1),)))
        recipe.extend(head_terms)

    cells = [tuple(vertices), tuple(edges)]
    if X.dimension == 2:
        cells.append(X.cells[2])
        for face in X.cells[2]:
            recipe.append(Incidence(face, face, (Term(1),)))
            for inc in X.boundary(face):
                for half in halves[inc.target]:
                    incidence.append(Incidence(face, half, inc.terms))

    fine = CwComplexData(tuple(cells), tuple(incidence))
    logger.debug(f"Subdivided {X} into {fine}")
    return Subdivision(X, fine, tuple(recipe))


def comparison_map(
    subdivision: Subdivision,
    bundle: FlatBundle,
    coarse: HilbertComplex | None = None,
    fine: HilbertComplex | None = None,
) -> ChainMap:
    """
    Cochain map C(X, E) -> C(X', E) induced by the subdivision recipe: entry
    (fine cell, coarse cell) is sum c R(γ) over the recipe terms.
    """
    coarse = coarse or assemble_cochain_complex(subdivision.coarse, bundle)
    fine = fine or assemble_cochain_complex(subdivision.fine, bundle)
    fine_dims = subdivision.fine.cell_dimensions
    maps = []
    for p in range(len(subdivision.coarse.cells)):
        entries = [inc for inc in subdivision.recipe if fine_dims[inc.source] == p]
        maps.append(
            _group_ring_matrix(
                bundle,
                subdivision.fine.cells[p],
                subdivision.coarse.cells[p],
                entries,
                coarse.modules[p],
                fine.modules[p],
            )
        )
    return ChainMap(coarse, fine, tuple(maps))


def relift_cell(X: CwComplexData, cell: str, word: Word) -> CwComplexData:
    """
    Replace the lift of ``cell`` by its translate under ``word``: incidences out of
    the cell are right-multiplied by the word, incidences into it left-multiplied by
    the inverse word.
    """
    if cell not in X.cell_dimensions:
        raise ValidationFailure(f"Unknown cell {cell!r}", cell=cell)
    inverse = invert_word(word)
    incidence = []
    for inc in X.incidence:
        terms = inc.terms
        if inc.source == cell:
            terms = tuple(Term(t.coef, simplify_word(t.word + word)) for t in terms)
        if inc.target == cell:
            terms = tuple(Term(t.coef, simplify_word(inverse + t.word)) for t in terms)
        incidence.append(Incidence(inc.source, inc.target, terms))
    return CwComplexData(X.cells, tuple(incidence))


@dataclass
class ComparisonReport(PandasExportMixin, JsonExportMixin):
    """Per-degree comparison of Betti numbers and near-zero density slopes."""

    df: pd.DataFrame
    window: tuple[float, float]
    betti_tol: float
    slope_tol: float

    @property
    def max_betti_difference(self) -> float:
        return float(self.df["betti_diff"].abs().max())

    @property
    def verdict(self) -> bool:
        betti_ok = bool((self.df["betti_diff"].abs() <= self.betti_tol).all())
        slopes_ok = bool(self.df["slope_agrees"].all())
        return betti_ok and slopes_ok

    def to_dict(self) -> dict:
        return {
            "command": "compare",
            "window": list(self.window),
            "betti_tol": self.betti_tol,
            "slope_tol": self.slope_tol,
            "verdict": self.verdict,
            "degrees": self.df.to_dict(orient="records"),
        }


def _near_zero_slope(C, p, b, grid, window) -> float:
    density = spectral_density(C, p, grid, spec=spectrum(C, p))
    try:
        return ns_exponent(density, b, window).slope
    except (EmptyWindowError, NonpositiveDensityError):
        return np.nan


def compare_invariants(
    C1: HilbertComplex,
    C2: HilbertComplex,
    window: tuple[float, float],
    eps_null: float | None = None,
    lambda_grid: Sequence[float] | None = None,
    betti_tol: float = 1e-8,
    slope_tol: float = 0.05,
) -> ComparisonReport:
    """
    Compare extended-cohomology invariants of two complexes over the same algebra:
    Betti numbers and the near-zero slope of the spectral density in every degree.

    A slope is NaN when the density has no excess over the Betti number in the
    window. Two NaN slopes agree, one NaN slope disagrees.

    Parameters
    ----------
    C1, C2 : HilbertComplex
        Complexes of equal length over the same algebra.
    window : tuple[float, float]
        Fit window for the slopes.
    eps_null : float, optional
        Kernel threshold for the Betti numbers.
    lambda_grid : Sequence[float], optional
        Density grid. Default 25 log-spaced points spanning the window.
    betti_tol : float, optional
        Allowed Betti difference. The default is 1e-8.
    slope_tol : float, optional
        Allowed slope difference. The default is 0.05.

    Returns
    -------
    ComparisonReport

    """
    if C1.algebra != C2.algebra:
        raise ShapeMismatchError("Complexes live over different algebras")
    if C1.top_degree != C2.top_degree:
        raise ShapeMismatchError("Complexes have different lengths")
    lo, hi = window
    grid = (
        np.asarray(lambda_grid, dtype=float)
        if lambda_grid is not None
        else np.logspace(np.log10(lo), np.log10(hi), 25)
    )

    records = []
    for p in C1.degrees:
        b1 = betti(C1, p, eps_null)
        b2 = betti(C2, p, eps_null)
        s1 = _near_zero_slope(C1, p, b1, grid, window)
        s2 = _near_zero_slope(C2, p, b2, grid, window)
        both_nan = bool(np.isnan(s1) and np.isnan(s2))
        slope_diff = abs(s1 - s2)
        records.append(
            {
                "degree": p,
                "betti_1": b1,
                "betti_2": b2,
                "betti_diff": b1 - b2,
                "slope_1": s1,
                "slope_2": s2,
                "slope_diff": slope_diff,
                "slope_agrees": both_nan or bool(slope_diff <= slope_tol),
            }
        )
    return ComparisonReport(
        pd.DataFrame.from_records(records), (float(lo), float(hi)), betti_tol, slope_tol
    )
