"""Independent brute-force references and random instance generators for tests.

Everything here is deliberately simple, from exhaustive subset enumeration
to dictionary-based measure arithmetic. None of it reuses the vectorized code
paths it is meant to check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import DirichletForm, EdgeFormSpec, StateSpace, build_form
from .decomposition import ErgodicDecomposition, decompose_along
from .errors import InputError, PrecisionError, SizeError
from .orderiso import OrderIso

MAX_BRUTE_FORCE_POINTS = 12


def brute_force_invariant_sets(
    form: DirichletForm, max_n: int = MAX_BRUTE_FORCE_POINTS, atol: float = 0.0
) -> np.ndarray:
    """Boolean rows, one per subset ``A`` with ``L M_A = M_A L`` (all ``2^n`` tried)."""
    n = form.n
    if n > max_n:
        raise SizeError(f"{n} points exceed the enumeration limit {max_n}")
    L = form.generator.matrix
    invariant = []
    for mask in range(2**n):
        p = np.array([(mask >> i) & 1 for i in range(n)], dtype=float)
        commutator = L * p[None, :] - p[:, None] * L
        if np.max(np.abs(commutator)) <= atol:
            invariant.append(p.astype(bool))
    return np.array(invariant)


def brute_force_invariant_partition(
    form: DirichletForm, max_n: int = MAX_BRUTE_FORCE_POINTS, atol: float = 0.0
) -> list[tuple[str, ...]]:
    """Atoms of the algebra of invariant sets, listed by smallest contained point."""
    family = brute_force_invariant_sets(form, max_n, atol)
    atoms: list[tuple[str, ...]] = []
    covered: set[int] = set()
    for x in range(form.n):
        if x in covered:
            continue
        members = np.flatnonzero(np.all(family[family[:, x]], axis=0))
        covered.update(members.tolist())
        atoms.append(tuple(form.space.ids[i] for i in members))
    return atoms


def series_expm(
    matrix, t: float = 1.0, eps: float = 1e-16, max_terms: int = 60, max_squarings: int = 64
) -> np.ndarray:
    """Truncated Taylor series for ``expm(t M)`` with scaling by powers of two.

    The argument is halved until its infinity norm is at most 1/2; terms are
    summed until the tail bound ``|Y|^(m+1) / (m+1)! / (1 - |Y|/(m+2))`` drops
    below ``eps``; then the result is squared back.
    """
    x = float(t) * np.asarray(matrix, dtype=float)
    n = x.shape[0]
    norm = float(np.max(np.sum(np.abs(x), axis=1))) if n else 0.0
    squarings = 0 if norm <= 0.5 else int(math.ceil(math.log2(norm / 0.5)))
    if squarings > max_squarings:
        raise PrecisionError(f"argument norm {norm:.3g} exceeds the scaling budget")
    y = x / 2.0**squarings
    ny = norm / 2.0**squarings
    term = np.eye(n)
    total = np.eye(n)
    j = 0
    while True:
        j += 1
        term = term @ y / j
        total = total + term
        tail = ny ** (j + 1) / math.factorial(j + 1) / (1.0 - ny / (j + 2))
        if tail <= eps:
            break
        if j >= max_terms:
            raise PrecisionError("Taylor series did not reach the requested accuracy")
    for _ in range(squarings):
        total = total @ total
    return total


def pushforward(weights: dict[str, float], mapping: dict[str, str]) -> dict[str, float]:
    """Image measure ``(f # m)(b) = sum_{a: f(a) = b} m(a)`` for point masses."""
    out: dict[str, float] = {}
    for a, m in weights.items():
        b = mapping[a]
        out[b] = out.get(b, 0.0) + m
    return out


def induced_component_measure(
    dec1: ErgodicDecomposition, iso: OrderIso, z: int
) -> dict[str, float]:
    """``mu2_z = (d mu2 / d sigma#mu1) sigma#mu1_z`` with ``sigma = tau^-1``.

    General pushforward and Radon-Nikodym arithmetic on point masses.
    """
    tau = iso.tau_map()
    sigma = {x: y for y, x in tau.items()}
    mu1 = dict(zip(dec1.space.ids, dec1.space.weights.tolist()))
    mu2 = dict(zip(iso.codomain.ids, iso.codomain.weights.tolist()))
    comp = dec1.component_spaces[z]
    mu1_z = dict(zip(comp.ids, comp.weights.tolist()))
    image_all = pushforward(mu1, sigma)
    image_z = pushforward(mu1_z, {x: sigma[x] for x in mu1_z})
    return {y: mu2[y] / image_all[y] * m for y, m in image_z.items()}


def disintegration_sides(
    dec: ErgodicDecomposition, subset: Iterable[str], labels: Iterable[int]
) -> tuple[float, float]:
    """Both sides of ``mu(A & s^-1 B) = sum_{z in B} nu(z) mu_z(A)`` by direct summation."""
    A = set(subset)
    B = set(labels)
    lhs = 0.0
    for x, w, s in zip(dec.space.ids, dec.space.weights, dec.labels):
        if x in A and int(s) in B:
            lhs += float(w)
    rhs = 0.0
    for z in B:
        sp = dec.component_spaces[z]
        rhs += float(dec.nu[z]) * sum(float(w) for p, w in zip(sp.ids, sp.weights) if p in A)
    return lhs, rhs


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_form(
    n: int,
    seed=None,
    edge_prob: float | None = None,
    killing_prob: float = 0.3,
    prefix: str = "x",
) -> DirichletForm:
    """Random valid form: Erdos-Renyi support graph, random weights and killing."""
    rng = _rng(seed)
    if edge_prob is None:
        edge_prob = float(rng.uniform(0.05, 0.6))
    ids = tuple(f"{prefix}{i}" for i in range(n))
    space = StateSpace(ids, rng.uniform(0.2, 5.0, size=n))
    edges = [
        (ids[i], ids[j], float(rng.uniform(0.1, 3.0)))
        for i in range(n)
        for j in range(i + 1, n)
        if rng.random() < edge_prob
    ]
    killing = {p: float(rng.uniform(0.0, 2.0)) for p in ids if rng.random() < killing_prob}
    return build_form(EdgeFormSpec(space, tuple(edges), killing))


def _connected_edges(rng, points: Sequence[str], extra_prob: float):
    order = [points[i] for i in rng.permutation(len(points))]
    edges = {}
    for i in range(1, len(order)):
        j = int(rng.integers(0, i))
        edges[frozenset((order[i], order[j]))] = float(rng.uniform(0.5, 2.0))
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            pair = frozenset((points[i], points[j]))
            if pair not in edges and rng.random() < extra_prob:
                edges[pair] = float(rng.uniform(0.5, 2.0))
    return [(*sorted(pair), w) for pair, w in edges.items()]


@dataclass(frozen=True, eq=False)
class PlantedInstance:
    """Forms ``E1``, ``E2`` intertwined by a known unitary order isomorphism.

    ``decomposition`` is the ground-truth decomposition of ``E1`` (labels
    deliberately not in canonical order), ``target_decomposition`` its image
    on ``X2``, ``blocks[z]`` the ground-truth component isomorphisms and
    ``label_perm`` a random relabelling used for uniqueness tests.
    """

    form1: DirichletForm
    form2: DirichletForm
    decomposition: ErgodicDecomposition
    target_decomposition: ErgodicDecomposition
    iso: OrderIso
    blocks: tuple[OrderIso, ...]
    scalings: np.ndarray
    label_perm: np.ndarray
    seed: object


def generate_planted(
    k: int,
    sizes: Sequence[int],
    seed=None,
    killing: bool = True,
    extra_edge_prob: float = 0.3,
) -> PlantedInstance:
    """Random planted instance with ``k`` irreducible components.

    The scaling is a power of two on each component, so the unitarity
    relation ``h(y)^2 mu2(y) = mu1(tau y)`` holds exactly in floating point.
    A constant scaling per component is also what keeps the image form
    Markovian when the component is conservative.
    """
    sizes = [int(s) for s in sizes]
    if len(sizes) != k or any(s < 1 for s in sizes):
        raise InputError("need one positive size per component")
    rng = _rng(seed)
    n = sum(sizes)
    ids1 = tuple(f"x{i}" for i in range(n))
    ids2 = tuple(f"y{i}" for i in range(n))

    shuffled = rng.permutation(n)
    labels = np.empty(n, dtype=int)
    start = 0
    for z, size in enumerate(sizes):
        labels[shuffled[start:start + size]] = z
        start += size

    mu1 = rng.uniform(0.5, 2.0, size=n)
    space1 = StateSpace(ids1, mu1)
    edges = []
    kill = {}
    for z in range(k):
        points = [ids1[i] for i in np.flatnonzero(labels == z)]
        edges.extend(_connected_edges(rng, points, extra_edge_prob))
        if killing:
            for p in points:
                if rng.random() < 0.3:
                    kill[p] = float(rng.uniform(0.0, 1.0))
    form1 = build_form(EdgeFormSpec(space1, tuple(edges), kill))
    nu = rng.dirichlet(np.full(k, 2.0))
    dec1 = decompose_along(form1, labels, nu)

    tau = rng.permutation(n)
    scalings = 2.0 ** rng.integers(-2, 3, size=k).astype(float)
    h = scalings[labels[tau]]
    space2 = StateSpace(ids2, mu1[tau] / h**2)
    form2 = DirichletForm(space2, form1.matrix[np.ix_(tau, tau)] / np.outer(h, h))
    iso = OrderIso(space1, space2, h, tau)

    labels2 = labels[tau]
    dec2 = decompose_along(form2, labels2, nu)
    blocks = []
    for z in range(k):
        dom, cod = dec1.component_spaces[z], dec2.component_spaces[z]
        cod_idx = space2.indices(cod.ids)
        blocks.append(
            OrderIso(dom, cod, h[cod_idx], dom.indices(ids1[x] for x in tau[cod_idx]))
        )
    return PlantedInstance(
        form1=form1,
        form2=form2,
        decomposition=dec1,
        target_decomposition=dec2,
        iso=iso,
        blocks=tuple(blocks),
        scalings=scalings,
        label_perm=rng.permutation(k),
        seed=seed,
    )
