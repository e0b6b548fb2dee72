"""Invariant sets, ergodic decompositions and their uniqueness matching.

On a finite space with full-support weights the ergodic decomposition of a
form is indexed by the connected components of its support graph (``x ~ y``
iff ``A[x, y] != 0``). A decomposition stores, for each component label
``z``, a measure ``mu_z`` on the fiber ``s^-1(z)`` and a form ``E_z`` such that

    mu(x)   = nu(z) * mu_z(x)            for x in s^-1(z)
    E(f, g) = sum_z nu(z) * E_z(f|_z, g|_z)

The index measure ``nu`` is free up to equivalence; two conventions are
provided (``"uniform"`` and ``"mass"``).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .core import (
    DEFAULT_TIMES,
    DEFAULT_TOL,
    ZERO_TOL,
    DirichletForm,
    StateSpace,
    as_function,
    require_valid,
    semigroup_at,
    validate_dirichlet,
    within,
)
from .errors import (
    ConsistencyError,
    InputError,
    NoMatchError,
    ShapeError,
    ValidationError,
)

NU_MODES = ("uniform", "mass")
# Above this many components, the consistency identity is checked on
# singleton label sets only (sufficient by additivity).
MAX_ENUMERATED_LABELS = 12


@dataclass(frozen=True, eq=False)
class ErgodicDecomposition:
    """Labels ``s: X -> {0..k-1}``, index weights ``nu`` and per-component data.

    ``component_spaces[z]`` carries the measure ``mu_z``; its ids are meant to
    be exactly the fiber ``s^-1(z)``. Only structural well-formedness is
    enforced here; :func:`validate_disintegration` checks the measure theory.
    """

    space: StateSpace
    labels: np.ndarray
    nu: np.ndarray
    component_spaces: tuple[StateSpace, ...]
    component_forms: tuple[DirichletForm, ...]

    def __post_init__(self):
        labels = np.array(self.labels, dtype=int)
        labels.setflags(write=False)
        nu = np.array(self.nu, dtype=float)
        nu.setflags(write=False)
        spaces = tuple(self.component_spaces)
        forms = tuple(self.component_forms)
        k = nu.shape[0] if nu.ndim == 1 else -1
        if labels.shape != (self.space.n,):
            raise ShapeError(f"{labels.shape[0]} labels for {self.space.n} points")
        if k < 1 or len(spaces) != k or len(forms) != k:
            raise ShapeError(
                f"nu has shape {nu.shape} but {len(spaces)} component spaces "
                f"and {len(forms)} component forms"
            )
        if labels.min() < 0 or labels.max() >= k:
            raise InputError(f"labels must lie in 0..{k - 1}")
        if not np.all(np.isfinite(nu)):
            raise InputError("nu must be finite")
        for z, (sp, fm) in enumerate(zip(spaces, forms)):
            self.space.indices(sp.ids)
            if not fm.space.same_as(sp):
                raise ShapeError(f"component {z}: form is not defined on its space")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "component_spaces", spaces)
        object.__setattr__(self, "component_forms", forms)

    @property
    def k(self) -> int:
        return self.nu.shape[0]

    @cached_property
    def fibers(self) -> tuple[tuple[str, ...], ...]:
        """Fiber ``s^-1(z)`` for each label, points in ambient order."""
        return tuple(
            tuple(self.space.ids[i] for i in np.flatnonzero(self.labels == z))
            for z in range(self.k)
        )

    def component_indices(self, z: int) -> np.ndarray:
        """Ambient indices of the points of ``component_spaces[z]``, in its order."""
        return self.space.indices(self.component_spaces[z].ids)

    def restrict(self, f, z: int) -> np.ndarray:
        return as_function(self.space, f)[self.component_indices(z)]

    def split(self, f) -> list[np.ndarray]:
        """The identification ``f -> (f|_z)_z`` onto the direct sum."""
        return [self.restrict(f, z) for z in range(self.k)]

    def join(self, parts: Sequence) -> np.ndarray:
        if len(parts) != self.k:
            raise ShapeError(f"{len(parts)} parts for {self.k} components")
        f = np.zeros(self.space.n)
        for z, part in enumerate(parts):
            f[self.component_indices(z)] = as_function(self.component_spaces[z], part)
        return f

    def ambient_measure(self) -> np.ndarray:
        mu = np.zeros(self.space.n)
        for z, sp in enumerate(self.component_spaces):
            mu[self.component_indices(z)] += self.nu[z] * sp.weights
        return mu

    def ambient_matrix(self) -> np.ndarray:
        n = self.space.n
        a = np.zeros((n, n))
        for z, fm in enumerate(self.component_forms):
            idx = self.component_indices(z)
            a[np.ix_(idx, idx)] += self.nu[z] * fm.matrix
        return a

    def ambient_form(self) -> DirichletForm:
        """The direct sum ``E = sum_z nu(z) E_z`` on the ambient space."""
        return DirichletForm(self.space, self.ambient_matrix())


@dataclass(frozen=True)
class InvariantReport:
    points: tuple[str, ...]
    times: tuple[float, ...]
    semigroup_defects: tuple[float, ...]
    generator_defect: float
    additivity_defect: float
    semigroup_ok: bool
    additivity_ok: bool
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.semigroup_ok and self.additivity_ok

    @property
    def agree(self) -> bool:
        return self.semigroup_ok == self.additivity_ok


def is_invariant(
    form: DirichletForm,
    subset: Iterable[str],
    times: Sequence[float] = DEFAULT_TIMES,
    tol: float = DEFAULT_TOL,
) -> InvariantReport:
    """Test invariance of ``subset`` through two equivalent characterizations.

    (a) ``T_t 1_A = 1_A T_t`` as operators, for every sampled ``t`` (plus the
        generator-level commutator, which is exact);
    (b) ``E(f, g) = E(1_A f, 1_A g) + E(1_Ac f, 1_Ac g)`` on all basis pairs.
    """
    points = tuple(subset)
    times = tuple(float(t) for t in times)
    if not times:
        raise InputError("at least one time is required")
    p = np.zeros(form.n)
    p[form.space.indices(points)] = 1.0
    q = 1.0 - p

    L = form.generator.matrix
    gen_defect = float(np.max(np.abs(L * p[None, :] - p[:, None] * L)))
    sg = []
    for t in times:
        T = semigroup_at(form.generator, t).matrix
        sg.append(float(np.max(np.abs(T * p[None, :] - p[:, None] * T))))

    a = form.matrix
    split = a - np.outer(p, p) * a - np.outer(q, q) * a
    add_defect = float(np.max(np.abs(split)))

    a_scale = float(np.max(np.abs(a)))
    l_scale = float(np.max(np.abs(L)))
    semigroup_ok = all(within(d, tol) for d in sg) and within(gen_defect, tol, l_scale)
    return InvariantReport(
        points=points,
        times=times,
        semigroup_defects=tuple(sg),
        generator_defect=gen_defect,
        additivity_defect=add_defect,
        semigroup_ok=semigroup_ok,
        additivity_ok=within(add_defect, tol, a_scale),
        tolerance=tol,
    )


def support_labels(form: DirichletForm, edge_tol: float = ZERO_TOL) -> np.ndarray:
    """Connected-component labels of the support graph, ordered by smallest point."""
    adj = np.abs(form.matrix) > edge_tol
    np.fill_diagonal(adj, False)
    _, raw = connected_components(csr_matrix(adj), directed=False)
    canon: dict[int, int] = {}
    for r in raw:
        canon.setdefault(int(r), len(canon))
    return np.array([canon[int(r)] for r in raw], dtype=int)


def is_irreducible(form: DirichletForm, edge_tol: float = ZERO_TOL) -> bool:
    return int(support_labels(form, edge_tol).max()) == 0


def decompose_along(
    form: DirichletForm, labels, nu, edge_tol: float = ZERO_TOL
) -> ErgodicDecomposition:
    """Decompose ``form`` over a given labelling and index measure.

    ``mu_z = mu|_z / nu(z)`` and ``E_z = E|_z / nu(z)``, so the direct sum
    reproduces ``(mu, E)``. Fails if ``E`` couples two different fibers.
    """
    labels = np.asarray(labels, dtype=int)
    nu = np.asarray(nu, dtype=float)
    a = form.matrix
    cross = labels[:, None] != labels[None, :]
    if np.any(np.abs(a[cross]) > edge_tol):
        i, j = np.argwhere(cross & (np.abs(a) > edge_tol))[0]
        ids = form.space.ids
        raise ValidationError(
            f"form couples {ids[i]!r} and {ids[j]!r} across components; "
            "the labelling is not invariant"
        )
    spaces, forms = [], []
    for z in range(nu.shape[0]):
        idx = np.flatnonzero(labels == z)
        if idx.size == 0:
            raise InputError(f"component {z} has an empty fiber")
        sp = StateSpace(
            tuple(form.space.ids[i] for i in idx), form.space.weights[idx] / nu[z]
        )
        spaces.append(sp)
        forms.append(DirichletForm(sp, a[np.ix_(idx, idx)] / nu[z]))
    return ErgodicDecomposition(form.space, labels, nu, tuple(spaces), tuple(forms))


def ergodic_decompose(
    form: DirichletForm,
    nu_mode: str = "uniform",
    tol: float = DEFAULT_TOL,
    edge_tol: float = ZERO_TOL,
) -> ErgodicDecomposition:
    """Split ``form`` into irreducible components.

    ``nu_mode="uniform"`` gives ``nu = 1/k``; ``nu_mode="mass"`` gives
    ``nu(z) = mu(s^-1 z) / mu(X)``.
    """
    if nu_mode not in NU_MODES:
        raise InputError(f"nu_mode must be one of {NU_MODES}, got {nu_mode!r}")
    require_valid(form, tol)
    labels = support_labels(form, edge_tol)
    k = int(labels.max()) + 1
    if nu_mode == "uniform":
        nu = np.full(k, 1.0 / k)
    else:
        masses = np.bincount(labels, weights=form.space.weights, minlength=k)
        nu = masses / masses.sum()
    dec = decompose_along(form, labels, nu, edge_tol)
    for z, fm in enumerate(dec.component_forms):
        if not is_irreducible(fm, edge_tol):
            raise ConsistencyError(f"component {z} is not irreducible", "irreducible")
    return dec


@dataclass(frozen=True)
class DisintegrationReport:
    nu_defect: float
    singleton_defect: float
    consistency_defect: float
    consistency_sets: str
    strong_consistency: tuple[str, ...]
    separated: bool
    surjective: bool
    tolerance: float

    @property
    def failures(self) -> tuple[str, ...]:
        out = []
        if not within(self.nu_defect, self.tolerance):
            out.append(f"nu is not a probability (defect {self.nu_defect:.3g})")
        if not within(self.singleton_defect, self.tolerance):
            out.append(f"mass identity fails (relative defect {self.singleton_defect:.3g})")
        if not within(self.consistency_defect, self.tolerance):
            out.append(
                f"consistency with labels fails (relative defect {self.consistency_defect:.3g})"
            )
        out.extend(self.strong_consistency)
        if not self.separated:
            out.append("component supports overlap")
        if not self.surjective:
            out.append("some label has an empty fiber")
        return tuple(out)

    @property
    def passed(self) -> bool:
        return not self.failures


def _component_weights(dec: ErgodicDecomposition) -> np.ndarray:
    """Matrix ``W[z, x] = nu(z) * mu_z(x)`` (zero off the component support)."""
    w = np.zeros((dec.k, dec.space.n))
    for z, sp in enumerate(dec.component_spaces):
        w[z, dec.component_indices(z)] = dec.nu[z] * sp.weights
    return w


def validate_disintegration(
    dec: ErgodicDecomposition, tol: float = DEFAULT_TOL
) -> DisintegrationReport:
    mu = dec.space.weights
    nu = dec.nu
    nu_defect = max(abs(float(nu.sum()) - 1.0), max(0.0, float(-nu.min())))
    if np.any(nu <= 0):
        nu_defect = max(nu_defect, 1.0)

    w = _component_weights(dec)
    singleton = float(np.max(np.abs(w.sum(axis=0) - mu) / mu))

    # mu({x} & s^-1(B)) = sum_{z in B} nu(z) mu_z({x}) for label sets B
    if dec.k <= MAX_ENUMERATED_LABELS:
        members = np.array(list(itertools.product((0.0, 1.0), repeat=dec.k)))
        which = "all"
    else:
        members = np.eye(dec.k)
        which = "singletons"
    lhs = members[:, dec.labels] * mu[None, :]
    rhs = members @ w
    consistency = float(np.max(np.abs(lhs - rhs) / mu[None, :]))

    strong = []
    for z, sp in enumerate(dec.component_spaces):
        fiber = set(dec.fibers[z])
        leak = [p for p in sp.ids if p not in fiber]
        gap = [p for p in dec.fibers[z] if p not in set(sp.ids)]
        if leak:
            strong.append(f"component {z} carries mass outside its fiber at {leak}")
        if gap:
            strong.append(f"component {z} has no mass on fiber points {gap}")

    seen: set[str] = set()
    separated = True
    for sp in dec.component_spaces:
        if seen & set(sp.ids):
            separated = False
        seen |= set(sp.ids)

    surjective = all(len(f) > 0 for f in dec.fibers)
    return DisintegrationReport(
        nu_defect=nu_defect,
        singleton_defect=singleton,
        consistency_defect=consistency,
        consistency_sets=which,
        strong_consistency=tuple(strong),
        separated=separated,
        surjective=surjective,
        tolerance=tol,
    )


def validate_decomposition(
    dec: ErgodicDecomposition,
    form: DirichletForm | None = None,
    tol: float = DEFAULT_TOL,
    edge_tol: float = ZERO_TOL,
) -> list[str]:
    """All defining properties of an ergodic decomposition; returns failure messages.

    When ``form`` is given, the direct sum of the components must reproduce it.
    """
    failures = list(validate_disintegration(dec, tol).failures)
    for z, fm in enumerate(dec.component_forms):
        diag = validate_dirichlet(fm, tol)
        if not diag.passed:
            failures.append(f"component {z}: " + "; ".join(diag.failures))
        elif not is_irreducible(fm, edge_tol):
            failures.append(f"component {z} is not irreducible")
    if form is not None:
        if not dec.space.same_as(form.space, tol):
            failures.append("decomposition and form live on different spaces")
        else:
            defect = float(np.max(np.abs(dec.ambient_matrix() - form.matrix)))
            scale = float(np.max(np.abs(form.matrix)))
            if not within(defect, tol, scale):
                failures.append(f"direct sum does not reproduce the form (defect {defect:.3g})")
    return failures


def direct_sum(
    components: Sequence[tuple[StateSpace, DirichletForm]],
    nu,
    tol: float = DEFAULT_TOL,
) -> tuple[StateSpace, DirichletForm, ErgodicDecomposition]:
    """Assemble irreducible components into an ambient space and form.

    Ambient points are the concatenation of the component points; the ambient
    measure is ``nu(z) * mu_z`` and the ambient matrix is block diagonal with
    blocks ``nu(z) * A_z``.
    """
    components = list(components)
    nu = np.asarray(nu, dtype=float)
    if not components:
        raise InputError("direct sum of zero components")
    if nu.shape != (len(components),):
        raise ShapeError(f"{nu.shape} weights for {len(components)} components")
    if np.any(~np.isfinite(nu)) or np.any(nu <= 0):
        raise InputError("component weights must be positive")
    if abs(float(nu.sum()) - 1.0) > tol:
        raise InputError(f"component weights sum to {nu.sum()!r}, not 1")

    ids: list[str] = []
    for z, (sp, fm) in enumerate(components):
        if not fm.space.same_as(sp):
            raise ShapeError(f"component {z}: form is not defined on its space")
        require_valid(fm, tol)
        if not is_irreducible(fm):
            raise InputError(f"component {z} is not irreducible")
        ids.extend(sp.ids)
    if len(set(ids)) != len(ids):
        raise InputError("component point ids must be pairwise distinct")

    space = StateSpace(
        tuple(ids), np.concatenate([w * sp.weights for w, (sp, _) in zip(nu, components)])
    )
    form = DirichletForm(
        space, scipy.linalg.block_diag(*[w * fm.matrix for w, (_, fm) in zip(nu, components)])
    )
    labels = np.repeat(np.arange(len(components)), [sp.n for sp, _ in components])
    dec = ErgodicDecomposition(
        space,
        labels,
        nu,
        tuple(sp for sp, _ in components),
        tuple(fm for _, fm in components),
    )
    return space, form, dec


def relabel(dec: ErgodicDecomposition, perm: Sequence[int]) -> ErgodicDecomposition:
    """Rename component ``z`` to ``perm[z]``."""
    perm = np.asarray(perm, dtype=int)
    if sorted(perm.tolist()) != list(range(dec.k)):
        raise InputError(f"{perm.tolist()} is not a permutation of 0..{dec.k - 1}")
    inv = np.argsort(perm)
    return ErgodicDecomposition(
        dec.space,
        perm[dec.labels],
        dec.nu[inv],
        tuple(dec.component_spaces[i] for i in inv),
        tuple(dec.component_forms[i] for i in inv),
    )


@dataclass(frozen=True)
class DecompositionMatch:
    """``rho[z]`` is the label in the second decomposition matched to ``z``;
    ``h[eta]`` the scaling on second-decomposition labels, with
    ``E1_z = h(rho z) * E2_(rho z)``."""

    rho: tuple[int, ...]
    h: np.ndarray
    scaling_defect: float
    measure_defect: float


def fiber_map(dec: ErgodicDecomposition) -> dict[frozenset, int]:
    return {frozenset(f): z for z, f in enumerate(dec.fibers)}


def _aligned(form: DirichletForm, order: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    idx = form.space.indices(order)
    return form.matrix[np.ix_(idx, idx)], form.space.weights[idx]


def match_decompositions(
    dec1: ErgodicDecomposition, dec2: ErgodicDecomposition, tol: float = DEFAULT_TOL
) -> DecompositionMatch:
    """Relate two ergodic decompositions of the same form.

    Components are matched by equality of fibers; the scaling is
    ``h(rho z) = nu2(rho z) / nu1(z)``.
    """
    if not dec1.space.same_as(dec2.space, tol):
        raise InputError("decompositions live on different spaces")
    for name, dec in (("first", dec1), ("second", dec2)):
        failures = validate_decomposition(dec, tol=tol)
        if failures:
            raise ValidationError(f"{name} decomposition invalid: " + "; ".join(failures))
    a1, a2 = dec1.ambient_matrix(), dec2.ambient_matrix()
    scale = float(np.max(np.abs(a1)))
    if not within(float(np.max(np.abs(a1 - a2))), tol, scale):
        raise InputError("decompositions reconstruct different forms")

    targets = fiber_map(dec2)
    rho = []
    for z, fib in enumerate(dec1.fibers):
        eta = targets.get(frozenset(fib))
        if eta is None:
            raise NoMatchError(f"fiber {list(fib)} of component {z} has no counterpart")
        rho.append(eta)
    if sorted(rho) != list(range(dec2.k)):
        raise NoMatchError("fibers are not in bijection")

    h = np.empty(dec2.k)
    for z, eta in enumerate(rho):
        h[eta] = dec2.nu[eta] / dec1.nu[z]

    scaling_defect = measure_defect = 0.0
    for z, eta in enumerate(rho):
        order = dec1.component_spaces[z].ids
        m1, w1 = _aligned(dec1.component_forms[z], order)
        m2, w2 = _aligned(dec2.component_forms[eta], order)
        s = max(1.0, float(np.max(np.abs(m1))))
        scaling_defect = max(scaling_defect, float(np.max(np.abs(m1 - h[eta] * m2))) / s)
        measure_defect = max(measure_defect, float(np.max(np.abs(w1 - h[eta] * w2) / w1)))
    if not (within(scaling_defect, tol) and within(measure_defect, tol)):
        raise ConsistencyError(
            f"scaling identity fails (forms {scaling_defect:.3g}, measures {measure_defect:.3g})",
            "uniqueness",
        )
    return DecompositionMatch(tuple(rho), h, scaling_defect, measure_defect)
