"""Order isomorphisms between finite L2 spaces as weighted compositions.

An order isomorphism ``U: L2(mu1) -> L2(mu2)`` acts as
``(U f)(y) = h(y) * f(tau(y))`` with ``h > 0`` on the codomain and ``tau`` a
bijection from codomain points to domain points. Its matrix (codomain rows,
domain columns) is a weighted permutation with ``M[y, tau(y)] = h(y)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .core import ZERO_TOL, StateSpace, as_function, within
from .errors import ConsistencyError, InputError, NotOrderIsomorphismError, ShapeError

ADJOINT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class OrderIso:
    domain: StateSpace
    codomain: StateSpace
    h: np.ndarray
    tau: np.ndarray

    def __post_init__(self):
        h = np.array(self.h, dtype=float)
        tau = np.array(self.tau, dtype=int)
        if self.domain.n != self.codomain.n:
            raise ShapeError(
                f"domain has {self.domain.n} points, codomain {self.codomain.n}; "
                "no bijection exists"
            )
        if h.shape != (self.codomain.n,) or tau.shape != (self.codomain.n,):
            raise ShapeError("h and tau must have one entry per codomain point")
        if not np.all(np.isfinite(h)) or np.any(h <= 0):
            raise InputError("scaling h must be finite and strictly positive")
        if sorted(tau.tolist()) != list(range(self.domain.n)):
            raise InputError("transformation tau must be a bijection")
        h.setflags(write=False)
        tau.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "tau", tau)

    @classmethod
    def from_maps(
        cls,
        domain: StateSpace,
        codomain: StateSpace,
        h: Mapping[str, float],
        tau: Mapping[str, str],
    ) -> OrderIso:
        """Build from point-keyed dictionaries ``h[y]`` and ``tau[y] = x``."""
        if set(h) != set(codomain.ids) or set(tau) != set(codomain.ids):
            raise InputError("h and tau must be keyed by exactly the codomain points")
        return cls(
            domain,
            codomain,
            [float(h[y]) for y in codomain.ids],
            domain.indices(tau[y] for y in codomain.ids),
        )

    def h_map(self) -> dict[str, float]:
        return {y: float(v) for y, v in zip(self.codomain.ids, self.h)}

    def tau_map(self) -> dict[str, str]:
        return {y: self.domain.ids[x] for y, x in zip(self.codomain.ids, self.tau)}

    @property
    def tau_inverse(self) -> np.ndarray:
        return np.argsort(self.tau)

    def matrix(self) -> np.ndarray:
        m = np.zeros((self.codomain.n, self.domain.n))
        m[np.arange(self.codomain.n), self.tau] = self.h
        return m

    def __call__(self, f) -> np.ndarray:
        return apply(self, f)

    def inverse(self) -> OrderIso:
        inv = self.tau_inverse
        return OrderIso(self.codomain, self.domain, 1.0 / self.h[inv], inv)


def apply(iso: OrderIso, f) -> np.ndarray:
    f = as_function(iso.domain, f)
    return iso.h * f[iso.tau]


def compose(second: OrderIso, first: OrderIso) -> OrderIso:
    """``second o first``: scaling ``h2 * (h1 o tau2)``, transformation ``tau1 o tau2``."""
    if first.codomain.ids != second.domain.ids:
        raise ShapeError("codomain of the first map is not the domain of the second")
    return OrderIso(
        first.domain,
        second.codomain,
        second.h * first.h[second.tau],
        first.tau[second.tau],
    )


def _offending(kind: str, index: int, point: str, entries: np.ndarray) -> NotOrderIsomorphismError:
    pos = int(np.sum(entries > ZERO_TOL))
    neg = int(np.sum(entries < -ZERO_TOL))
    if neg:
        why = f"{neg} negative entr{'y' if neg == 1 else 'ies'}"
    elif pos == 0:
        why = "no positive entry"
    else:
        why = f"{pos} positive entries"
    return NotOrderIsomorphismError(
        f"not an order isomorphism: {kind} {index} ({point!r}) has {why}",
        axis=kind,
        index=index,
        point=point,
    )


def factorize(
    matrix, domain: StateSpace, codomain: StateSpace, zero_tol: float = ZERO_TOL
) -> OrderIso:
    """Recover ``(h, tau)`` from the matrix of an order isomorphism.

    Entries with ``|m| <= zero_tol`` are zeros. Every row and every column
    must contain exactly one strictly positive entry and nothing negative.
    """
    m = np.asarray(matrix, dtype=float)
    if m.shape != (codomain.n, domain.n):
        raise ShapeError(
            f"matrix of shape {m.shape}, expected ({codomain.n}, {domain.n})"
        )
    if not np.all(np.isfinite(m)):
        raise InputError("matrix entries must be finite")
    m = np.where(np.abs(m) <= zero_tol, 0.0, m)
    for i, row in enumerate(m):
        if np.any(row < 0) or np.count_nonzero(row) != 1:
            raise _offending("row", i, codomain.ids[i], row)
    for j, col in enumerate(m.T):
        if np.any(col < 0) or np.count_nonzero(col) != 1:
            raise _offending("column", j, domain.ids[j], col)
    tau = np.argmax(m, axis=1)
    return OrderIso(domain, codomain, m[np.arange(codomain.n), tau], tau)


def pushforward_codomain_measure(iso: OrderIso) -> np.ndarray:
    """``(tau # mu2)(x) = mu2(tau^-1 x)`` as a vector on the domain."""
    out = np.zeros(iso.domain.n)
    np.add.at(out, iso.tau, iso.codomain.weights)
    return out


def adjoint(iso: OrderIso, tol: float = ADJOINT_TOL) -> np.ndarray:
    """Matrix of ``U*: L2(mu2) -> L2(mu1)``.

    ``(U* g)(x) = [(tau # mu2)(x) / mu1(x)] * h(tau^-1 x) * g(tau^-1 x)``.
    The adjoint identity ``<U f, g>_mu2 = <f, U* g>_mu1`` is verified on the
    full basis before returning.
    """
    mu1, mu2 = iso.domain.weights, iso.codomain.weights
    density = pushforward_codomain_measure(iso) / mu1
    if np.any(density <= 0):
        raise ConsistencyError("pushforward measure is not equivalent to mu1", "adjoint")
    inv = iso.tau_inverse
    adj = np.zeros((iso.domain.n, iso.codomain.n))
    adj[np.arange(iso.domain.n), inv] = density * iso.h[inv]

    # <U e_x, e_y>_mu2 = M[y, x] mu2(y);  <e_x, U* e_y>_mu1 = mu1(x) adj[x, y]
    lhs = iso.matrix() * mu2[:, None]
    rhs = (mu1[:, None] * adj).T
    defect = float(np.max(np.abs(lhs - rhs)))
    if not within(defect, tol, float(np.max(np.abs(lhs)))):
        raise ConsistencyError(f"adjoint identity fails (defect {defect:.3g})", "adjoint")
    return adj


def weighted_transpose(matrix, mu1, mu2) -> np.ndarray:
    """Adjoint of a general operator ``L2(mu1) -> L2(mu2)``: ``D1^-1 M^T D2``."""
    m = np.asarray(matrix, dtype=float)
    return (m.T * np.asarray(mu2)[None, :]) / np.asarray(mu1)[:, None]


def unitarity_defect(iso: OrderIso) -> float:
    """Max relative violation of ``h(y)^2 mu2(y) = mu1(tau y)``."""
    target = iso.domain.weights[iso.tau]
    return float(np.max(np.abs(iso.h**2 * iso.codomain.weights - target) / target))


def is_unitary(iso: OrderIso, tol: float = 1e-9) -> bool:
    return within(unitarity_defect(iso), tol)


def unitary_matrix_defect(matrix, mu1, mu2) -> float:
    """``max(|U*U - I|, |UU* - I|)`` for a general square operator."""
    m = np.asarray(matrix, dtype=float)
    if m.shape[0] != m.shape[1]:
        return float("inf")
    adj = weighted_transpose(m, mu1, mu2)
    eye = np.eye(m.shape[0])
    return float(max(np.max(np.abs(adj @ m - eye)), np.max(np.abs(m @ adj - eye))))


def is_unitary_matrix(matrix, mu1, mu2, tol: float = 1e-9) -> bool:
    return within(unitary_matrix_defect(matrix, mu1, mu2), tol)


def is_order_preserving(matrix, tol: float = ZERO_TOL) -> bool:
    """Positivity preservation is entrywise non-negativity (test on indicators)."""
    return bool(np.all(np.asarray(matrix, dtype=float) >= -tol))
