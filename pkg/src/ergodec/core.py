"""Finite weighted state spaces, Dirichlet-form matrices, generators, semigroups.

Conventions used throughout the package:

* a function on a space is a 1-d float array indexed like ``space.ids``;
* a form is stored as its *unweighted* matrix ``A`` with ``E(f, g) = f @ A @ g``;
* the generator is ``L = -diag(mu)^-1 A`` so that ``E(f, g) = <-L f, g>_mu``;
* the semigroup is ``T_t = expm(t L)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg

from .errors import DomainError, InputError, ShapeError, ValidationError

DEFAULT_TOL = 1e-9
DEFAULT_TIMES = (0.1, 1.0, 10.0)
# Entries with absolute value at most this are treated as structural zeros.
ZERO_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def within(defect: float, tol: float, scale: float = 1.0) -> bool:
    """``defect <= tol * max(1, scale)``; tolerances are relative above unit scale."""
    return bool(defect <= tol * max(1.0, scale))


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Finite set of points with strictly positive masses."""

    ids: tuple[str, ...]
    weights: np.ndarray

    def __post_init__(self):
        ids = tuple(str(i) for i in self.ids)
        weights = _frozen(self.weights)
        if weights.ndim != 1 or len(ids) != weights.shape[0]:
            raise ShapeError(
                f"{len(ids)} ids but weights of shape {weights.shape}"
            )
        if not ids:
            raise InputError("a state space needs at least one point")
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise InputError(f"duplicate point ids: {dup}")
        if not np.all(np.isfinite(weights)):
            raise InputError("weights must be finite")
        bad = np.flatnonzero(weights <= 0)
        if bad.size:
            raise InputError(
                f"weight of point {ids[bad[0]]!r} is {weights[bad[0]]!r}; "
                "weights must be strictly positive"
            )
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "weights", weights)

    @property
    def n(self) -> int:
        return len(self.ids)

    @cached_property
    def index(self) -> dict[str, int]:
        return {p: i for i, p in enumerate(self.ids)}

    def indices(self, points: Iterable[str]) -> np.ndarray:
        try:
            return np.array([self.index[str(p)] for p in points], dtype=int)
        except KeyError as exc:
            raise InputError(f"unknown point id {exc.args[0]!r}") from None

    def mass(self, points: Iterable[str] | None = None) -> float:
        if points is None:
            return float(self.weights.sum())
        return float(self.weights[self.indices(points)].sum())

    def same_as(self, other: StateSpace, tol: float = 0.0) -> bool:
        return (
            self.ids == other.ids
            and np.allclose(self.weights, other.weights, rtol=tol, atol=0.0)
        )

    def subspace(self, points: Sequence[str], scale: float = 1.0) -> StateSpace:
        idx = self.indices(points)
        return StateSpace(tuple(self.ids[i] for i in idx), scale * self.weights[idx])


def as_function(space: StateSpace, values) -> np.ndarray:
    """Validate ``values`` as an element of L2(space) and return it as an array."""
    f = np.asarray(values, dtype=float)
    if f.shape != (space.n,):
        raise ShapeError(f"function of shape {f.shape} on a space of {space.n} points")
    if not np.all(np.isfinite(f)):
        raise InputError("function values must be finite")
    return f


def indicator(space: StateSpace, points: Iterable[str]) -> np.ndarray:
    f = np.zeros(space.n)
    f[space.indices(points)] = 1.0
    return f


@dataclass(frozen=True)
class EdgeFormSpec:
    """Constructive description of a regular Dirichlet form.

    The induced energy is
    ``sum_edges w(x,y) (f(x)-f(y))^2 + sum_x kappa(x) f(x)^2 mu(x)``.
    """

    space: StateSpace
    edges: tuple[tuple[str, str, float], ...] = ()
    killing: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        edges = tuple((str(a), str(b), float(w)) for a, b, w in self.edges)
        seen = set()
        for a, b, w in edges:
            self.space.indices([a, b])
            if a == b:
                raise InputError(f"self-loop edge at {a!r}")
            pair = frozenset((a, b))
            if pair in seen:
                raise InputError(f"duplicate edge {a!r}-{b!r}")
            seen.add(pair)
            if not np.isfinite(w) or w < 0:
                raise InputError(f"edge {a!r}-{b!r} has invalid weight {w!r}")
        killing = {str(k): float(v) for k, v in dict(self.killing).items()}
        self.space.indices(killing)
        for p, k in killing.items():
            if not np.isfinite(k) or k < 0:
                raise InputError(f"killing at {p!r} is {k!r}; must be >= 0")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "killing", killing)


@dataclass(frozen=True, eq=False)
class DirichletForm:
    """Symmetric bilinear form ``E(f, g) = f @ matrix @ g`` on L2(space).

    Construction only checks shape and finiteness, so that invalid matrices can
    still be diagnosed by :func:`validate_dirichlet`.
    """

    space: StateSpace
    matrix: np.ndarray

    def __post_init__(self):
        a = _frozen(self.matrix)
        n = self.space.n
        if a.shape != (n, n):
            raise ShapeError(f"form matrix of shape {a.shape} on {n} points")
        if not np.all(np.isfinite(a)):
            raise InputError("form matrix must be finite")
        object.__setattr__(self, "matrix", a)

    @property
    def n(self) -> int:
        return self.space.n

    def __call__(self, f, g=None) -> float:
        return apply_form(self, f, f if g is None else g)

    @cached_property
    def generator(self) -> Generator:
        return generator(self)

    def semigroup(self, t: float) -> np.ndarray:
        return semigroup_at(self.generator, t).matrix


@dataclass(frozen=True, eq=False)
class Generator:
    space: StateSpace
    matrix: np.ndarray


@dataclass(frozen=True, eq=False)
class SemigroupSample:
    t: float
    matrix: np.ndarray


@dataclass(frozen=True)
class DirichletDiagnostics:
    symmetry_defect: float
    min_eigenvalue: float
    sign_violation: float
    sign_violation_at: tuple[str, str] | None
    row_sum_violation: float
    row_sum_violation_at: str | None
    contraction_violation: float
    tolerance: float
    failures: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return not self.failures


def weighted_inner(space: StateSpace, f, g) -> float:
    """L2(mu) pairing ``sum_x f(x) g(x) mu(x)``."""
    f = as_function(space, f)
    g = as_function(space, g)
    return float(np.sum(f * g * space.weights))


def build_form(spec: EdgeFormSpec) -> DirichletForm:
    space = spec.space
    a = np.zeros((space.n, space.n))
    for x, y, w in spec.edges:
        i, j = space.index[x], space.index[y]
        a[i, j] -= w
        a[j, i] -= w
        a[i, i] += w
        a[j, j] += w
    for p, k in spec.killing.items():
        i = space.index[p]
        a[i, i] += k * space.weights[i]
    return DirichletForm(space, a)


def form_from_matrix(space: StateSpace, matrix) -> DirichletForm:
    return DirichletForm(space, matrix)


def apply_form(form: DirichletForm, f, g) -> float:
    f = as_function(form.space, f)
    g = as_function(form.space, g)
    return float(f @ form.matrix @ g)


def _probes(n: int, count: int, seed: int) -> np.ndarray:
    # basis vectors, pairwise differences and mixed-sign pairs, then random draws
    eye = np.eye(n)
    i, j = np.triu_indices(n, k=1)
    rng = np.random.default_rng(seed)
    return np.vstack(
        [
            eye,
            eye[i] - eye[j],
            2.0 * eye[i] - 0.5 * eye[j],
            rng.normal(0.5, 1.5, size=(count, n)),
        ]
    )


def validate_dirichlet(
    form: DirichletForm, tol: float = DEFAULT_TOL, probes: int = 64, seed: int = 0
) -> DirichletDiagnostics:
    """Check symmetry, positivity and the Beurling-Deny sign structure.

    The sign conditions (non-positive off-diagonal entries, non-negative row
    sums) are the structural test; the normal-contraction probes
    ``E(f+ ^ 1) <= E(f)`` are a semantic cross-check on a fixed seeded sample.
    """
    a = form.matrix
    ids = form.space.ids
    n = form.n
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    failures = []

    sym = float(np.max(np.abs(a - a.T)))
    if not within(sym, tol, scale):
        failures.append(f"matrix not symmetric (defect {sym:.3g})")

    min_eig = float(np.linalg.eigvalsh((a + a.T) / 2).min())
    if not within(-min_eig, tol, scale):
        failures.append(f"matrix not positive semidefinite (min eigenvalue {min_eig:.6g})")

    off = a - np.diag(np.diag(a))
    sign_violation, sign_at = 0.0, None
    if n > 1:
        i, j = np.unravel_index(np.argmax(off), off.shape)
        if off[i, j] > 0:
            sign_violation, sign_at = float(off[i, j]), (ids[i], ids[j])
    if not within(sign_violation, tol, scale):
        failures.append(
            f"positive off-diagonal entry {sign_violation:.6g} at {sign_at}"
        )

    rows = a.sum(axis=1)
    r = int(np.argmin(rows))
    row_violation = max(0.0, float(-rows[r]))
    row_at = ids[r] if row_violation > 0 else None
    if not within(row_violation, tol, scale):
        failures.append(f"negative row sum {rows[r]:.6g} at row {row_at!r}")

    fs = _probes(n, probes, seed)
    gs = np.clip(fs, 0.0, 1.0)
    gap = np.einsum("pi,ij,pj->p", gs, a, gs) - np.einsum("pi,ij,pj->p", fs, a, fs)
    worst = max(0.0, float(gap.max()))
    if not within(worst, tol, scale):
        failures.append(f"normal contraction increases energy by {worst:.6g}")

    return DirichletDiagnostics(
        symmetry_defect=sym,
        min_eigenvalue=min_eig,
        sign_violation=sign_violation,
        sign_violation_at=sign_at,
        row_sum_violation=row_violation,
        row_sum_violation_at=row_at,
        contraction_violation=worst,
        tolerance=tol,
        failures=tuple(failures),
    )


def require_valid(form: DirichletForm, tol: float = DEFAULT_TOL) -> None:
    diag = validate_dirichlet(form, tol)
    if not diag.passed:
        raise ValidationError("not a Dirichlet form: " + "; ".join(diag.failures))


def generator(form: DirichletForm) -> Generator:
    return Generator(form.space, _frozen(-form.matrix / form.space.weights[:, None]))


def semigroup_at(gen: Generator, t: float) -> SemigroupSample:
    """``T_t = expm(t L)`` via scaling-and-squaring Pade (scipy)."""
    t = float(t)
    if not (t > 0 and np.isfinite(t)):
        raise DomainError(f"semigroup time must be positive, got {t!r}")
    return SemigroupSample(t, _frozen(scipy.linalg.expm(t * gen.matrix)))


def sub_markov_defects(T: np.ndarray) -> tuple[float, float]:
    """Return (most negative entry deficit, largest row-sum excess over 1)."""
    neg = max(0.0, float(-T.min()))
    excess = max(0.0, float(T.sum(axis=1).max() - 1.0))
    return neg, excess


def self_adjoint_defect(space: StateSpace, T: np.ndarray) -> float:
    """``max |D_mu T - T^t D_mu|``."""
    dt = space.weights[:, None] * T
    return float(np.max(np.abs(dt - dt.T)))
