"""Intertwining checks and the decomposition of intertwiners over components.

Given an ergodic decomposition of ``E1`` and a unitary order isomorphism
``U = h * (. o tau)`` intertwining the semigroups of ``E1`` and ``E2``:

* the fibers ``tau^-1(s^-1 z)`` are ``E2``-invariant and carry the measures
  ``mu2_z(y) = mu2(y) * mu1_z(tau y) / mu1(tau y)``;
* ``U`` is block diagonal with blocks ``U_z = (h, tau)`` restricted to fibers;
* ``E2_z`` is the image form of ``E1_z`` under ``U_z`` and the direct sum of
  the ``E2_z`` over the same index measure is ``E2``.

:func:`decompose_intertwiner` builds all of this and verifies each clause.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    DEFAULT_TIMES,
    DEFAULT_TOL,
    DirichletForm,
    StateSpace,
    semigroup_at,
    sub_markov_defects,
    validate_dirichlet,
    within,
)
from .decomposition import (
    ErgodicDecomposition,
    fiber_map,
    is_invariant,
    is_irreducible,
    validate_decomposition,
    validate_disintegration,
)
from .errors import (
    ConsistencyError,
    DecompositionMismatchError,
    HypothesisError,
    InputError,
    ShapeError,
)
from .orderiso import (
    OrderIso,
    factorize,
    is_order_preserving,
    is_unitary,
    unitarity_defect,
    unitary_matrix_defect,
)


@dataclass(frozen=True)
class IntertwineReport:
    times: tuple[float, ...]
    semigroup_defects: tuple[float, ...]
    generator_defect: float
    energy_defect: float | None
    unitary: bool
    semigroup_ok: bool
    generator_ok: bool
    energy_ok: bool | None
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.semigroup_ok and self.generator_ok and self.energy_ok is not False

    @property
    def agree(self) -> bool:
        """Semigroup- and generator-level verdicts coincide."""
        return self.semigroup_ok == self.generator_ok

    def as_dict(self) -> dict:
        return {
            "times": list(self.times),
            "semigroup_defects": list(self.semigroup_defects),
            "generator_defect": self.generator_defect,
            "energy_defect": self.energy_defect,
            "unitary": self.unitary,
            "semigroup_ok": self.semigroup_ok,
            "generator_ok": self.generator_ok,
            "energy_ok": self.energy_ok,
            "agree": self.agree,
            "passed": self.passed,
            "tolerance": self.tolerance,
        }


def _operator(iso, form1: DirichletForm, form2: DirichletForm) -> tuple[np.ndarray, bool, float]:
    """Matrix of ``iso`` plus its unitarity verdict ingredients."""
    if isinstance(iso, OrderIso):
        if not iso.domain.same_as(form1.space, 1e-12):
            raise ShapeError("iso domain differs from the first form's space")
        if not iso.codomain.same_as(form2.space, 1e-12):
            raise ShapeError("iso codomain differs from the second form's space")
        return iso.matrix(), True, unitarity_defect(iso)
    m = np.asarray(iso, dtype=float)
    if m.shape != (form2.n, form1.n):
        raise ShapeError(f"operator of shape {m.shape}, expected ({form2.n}, {form1.n})")
    return m, False, unitary_matrix_defect(m, form1.space.weights, form2.space.weights)


def check_intertwine(
    form1: DirichletForm,
    form2: DirichletForm,
    iso,
    times: Sequence[float] = DEFAULT_TIMES,
    tol: float = DEFAULT_TOL,
) -> IntertwineReport:
    """Measure how far ``iso`` is from intertwining the two forms.

    ``iso`` is an :class:`OrderIso` or a raw operator matrix. Energy
    transport ``E2(Uf, Ug) = E1(f, g)`` is only asserted for unitary ``iso``.
    """
    times = tuple(float(t) for t in times)
    if not times:
        raise InputError("at least one time is required")
    m, _, udefect = _operator(iso, form1, form2)
    unitary = within(udefect, tol)
    L1, L2 = form1.generator.matrix, form2.generator.matrix
    m_scale = float(np.max(np.abs(m)))
    l_scale = max(float(np.max(np.abs(L1))), float(np.max(np.abs(L2))))

    gen_defect = float(np.max(np.abs(m @ L1 - L2 @ m)))
    sg = tuple(
        float(np.max(np.abs(m @ form1.semigroup(t) - form2.semigroup(t) @ m)))
        for t in times
    )
    energy = energy_ok = None
    if unitary:
        energy = float(np.max(np.abs(m.T @ form2.matrix @ m - form1.matrix)))
        energy_ok = within(energy, tol, float(np.max(np.abs(form1.matrix))))
    return IntertwineReport(
        times=times,
        semigroup_defects=sg,
        generator_defect=gen_defect,
        energy_defect=energy,
        unitary=unitary,
        semigroup_ok=all(within(d, tol, m_scale) for d in sg),
        generator_ok=within(gen_defect, tol, m_scale * l_scale),
        energy_ok=energy_ok,
        tolerance=tol,
    )


@dataclass(frozen=True, eq=False)
class DecomposedIntertwiner:
    """A unitary intertwiner written as a field of component isomorphisms.

    ``component_isos[z]`` maps ``L2(source mu_z)`` onto
    ``L2(target mu_(rho z))``.
    """

    source: ErgodicDecomposition
    target: ErgodicDecomposition
    rho: tuple[int, ...]
    component_isos: tuple[OrderIso, ...]
    report: dict = field(default_factory=dict)

    def block_matrix(self) -> np.ndarray:
        return assemble_operator(
            [u.matrix() for u in self.component_isos], self.source, self.target, self.rho
        )


def restrict_iso(iso: OrderIso, dom: StateSpace, cod: StateSpace) -> OrderIso:
    """Restrict ``(h, tau)`` to component spaces ``dom`` (domain) and ``cod``."""
    cod_idx = iso.codomain.indices(cod.ids)
    images = [iso.domain.ids[x] for x in iso.tau[cod_idx]]
    if set(images) != set(dom.ids):
        raise DecompositionMismatchError(
            "transformation does not map the codomain component onto the domain component"
        )
    return OrderIso(dom, cod, iso.h[cod_idx], dom.indices(images))


def assemble_operator(
    blocks: Sequence,
    dec1: ErgodicDecomposition,
    dec2: ErgodicDecomposition,
    rho: Sequence[int] | None = None,
) -> np.ndarray:
    """Block assembly ``U = sum_z U_z`` of component operators.

    ``blocks[z]`` has rows indexed by ``dec2.component_spaces[rho[z]]`` and
    columns by ``dec1.component_spaces[z]``, each in component order.
    """
    if len(blocks) != dec1.k or dec1.k != dec2.k:
        raise InputError(
            f"{len(blocks)} blocks for decompositions with {dec1.k} and {dec2.k} components"
        )
    rho = list(range(dec1.k)) if rho is None else [int(r) for r in rho]
    if sorted(rho) != list(range(dec2.k)):
        raise InputError(f"{rho} is not a bijection of component labels")
    m = np.zeros((dec2.space.n, dec1.space.n))
    for z, block in enumerate(blocks):
        rows = dec2.component_indices(rho[z])
        cols = dec1.component_indices(z)
        b = np.asarray(block, dtype=float)
        if b.shape != (rows.size, cols.size):
            raise ShapeError(f"block {z} has shape {b.shape}, expected {(rows.size, cols.size)}")
        m[np.ix_(rows, cols)] = b
    return m


def _fail(clause: str, message: str):
    raise ConsistencyError(f"{clause}: {message}", clause)


def _check_hypotheses(form1, form2, iso, times, tol) -> IntertwineReport:
    if not is_unitary(iso, tol):
        raise HypothesisError(
            f"intertwiner is not unitary (defect {unitarity_defect(iso):.3g})"
        )
    rep = check_intertwine(form1, form2, iso, times, tol)
    if not rep.passed:
        raise HypothesisError(
            "iso does not intertwine the semigroups "
            f"(generator defect {rep.generator_defect:.3g}, "
            f"semigroup defects {[float(f'{d:.3g}') for d in rep.semigroup_defects]})"
        )
    return rep


def _component_semigroup_checks(dec1, dec2, rho, isos, times, tol) -> dict:
    """Sub-Markovianity of the target component semigroups and the relation
    ``T2_z,t U_z = U_z T1_z,t``."""
    neg = excess = link = 0.0
    for z, u in enumerate(isos):
        f1 = dec1.component_forms[z]
        f2 = dec2.component_forms[rho[z]]
        m = u.matrix()
        for t in times:
            T1, T2 = f1.semigroup(t), f2.semigroup(t)
            a, b = sub_markov_defects(T2)
            if not (within(a, tol) and within(b, tol)):
                _fail(
                    "sub_markov",
                    f"component {z} semigroup not sub-Markovian at t={t} "
                    f"(negativity {a:.3g}, row-sum excess {b:.3g})",
                )
            d = float(np.max(np.abs(T2 @ m - m @ T1)))
            if not within(d, tol, float(np.max(np.abs(m)))):
                _fail("sub_markov", f"component {z} semigroups not intertwined at t={t} ({d:.3g})")
            neg, excess, link = max(neg, a), max(excess, b), max(link, d)
    return {"negativity": neg, "row_sum_excess": excess, "intertwining_defect": link}


def _coherence(dec, times) -> float:
    """``max_t |expm(t L) - blockdiag(expm(t L_z))|`` on the ambient space."""
    ambient = dec.ambient_form()
    worst = 0.0
    for t in times:
        blocks = assemble_operator(
            [f.semigroup(t) for f in dec.component_forms], dec, dec
        )
        worst = max(worst, float(np.max(np.abs(ambient.semigroup(t) - blocks))))
    return worst


def decompose_intertwiner(
    dec1: ErgodicDecomposition,
    form2: DirichletForm,
    iso: OrderIso,
    times: Sequence[float] = DEFAULT_TIMES,
    tol: float = DEFAULT_TOL,
) -> DecomposedIntertwiner:
    """Decompose a unitary intertwiner over an ergodic decomposition of ``E1``.

    The target decomposition of ``form2`` is induced through ``tau`` and uses
    the same index measure as ``dec1``. Hypotheses are checked first and
    reported as :class:`HypothesisError`; a failed conclusion raises
    :class:`ConsistencyError` naming the clause.
    """
    times = tuple(float(t) for t in times)
    if not iso.domain.same_as(dec1.space, 1e-12):
        raise ShapeError("iso domain differs from the decomposed space")
    if not iso.codomain.same_as(form2.space, 1e-12):
        raise ShapeError("iso codomain differs from the second form's space")
    failures = validate_decomposition(dec1, tol=tol)
    if failures:
        raise HypothesisError("source decomposition invalid: " + "; ".join(failures))
    diag = validate_dirichlet(form2, tol)
    if not diag.passed:
        raise HypothesisError("second form invalid: " + "; ".join(diag.failures))
    form1 = dec1.ambient_form()
    hyp = _check_hypotheses(form1, form2, iso, times, tol)

    labels2 = dec1.labels[iso.tau]
    mu1, mu2 = dec1.space.weights, form2.space.weights
    spaces, forms, isos = [], [], []
    worst_invariance = 0.0
    for z in range(dec1.k):
        dom = dec1.component_spaces[z]
        idx2 = np.flatnonzero(labels2 == z)
        ids2 = tuple(form2.space.ids[i] for i in idx2)
        inv = is_invariant(form2, ids2, times, tol)
        worst_invariance = max(worst_invariance, inv.additivity_defect, *inv.semigroup_defects)
        if not inv.passed:
            _fail("invariance", f"preimage of component {z} is not invariant for the second form")
        x = iso.tau[idx2]
        local = dom.indices(dec1.space.ids[i] for i in x)
        sp2 = StateSpace(ids2, mu2[idx2] * dom.weights[local] / mu1[x])
        hz = iso.h[idx2]
        a1 = dec1.component_forms[z].matrix
        spaces.append(sp2)
        forms.append(DirichletForm(sp2, a1[np.ix_(local, local)] / np.outer(hz, hz)))
        isos.append(OrderIso(dom, sp2, hz, local))
    dec2 = ErgodicDecomposition(form2.space, labels2, dec1.nu, tuple(spaces), tuple(forms))
    rho = tuple(range(dec1.k))
    report = {"hypotheses": hyp.as_dict(), "invariance": {"max_defect": worst_invariance}}

    disint = validate_disintegration(dec2, tol)
    if not disint.passed:
        _fail("disintegration", "; ".join(disint.failures))
    report["disintegration"] = {
        "singleton_defect": disint.singleton_defect,
        "consistency_defect": disint.consistency_defect,
        "separated": disint.separated,
    }

    blocks = assemble_operator([u.matrix() for u in isos], dec1, dec2)
    exact = bool(np.array_equal(blocks, iso.matrix()))
    if not exact:
        _fail("decomposability", "block assembly differs from the intertwiner")
    comp_unitarity = max(unitarity_defect(u) for u in isos)
    if not within(comp_unitarity, tol):
        _fail("decomposability", f"component isomorphism not unitary ({comp_unitarity:.3g})")
    report["decomposability"] = {"exact": exact, "unitarity_defect": comp_unitarity}

    report["sub_markov"] = _component_semigroup_checks(dec1, dec2, rho, isos, times, tol)

    for z, fm in enumerate(forms):
        d = validate_dirichlet(fm, tol)
        if not d.passed:
            _fail("image_form", f"component {z} image form invalid: " + "; ".join(d.failures))
        if not is_irreducible(fm):
            _fail("image_form", f"component {z} image form not irreducible")
    recon = float(np.max(np.abs(dec2.ambient_matrix() - form2.matrix)))
    recon_rel = recon / max(1.0, float(np.max(np.abs(form2.matrix))))
    if not within(recon_rel, tol):
        _fail("image_form", f"direct sum of image forms differs from the second form ({recon:.3g})")
    coherence = _coherence(dec2, times)
    if not within(coherence, tol):
        _fail("image_form", f"component semigroups do not assemble to the global one ({coherence:.3g})")
    report["image_form"] = {
        "reconstruction_defect": recon_rel,
        "semigroup_coherence": coherence,
        "irreducible": True,
    }
    return DecomposedIntertwiner(dec1, dec2, rho, tuple(isos), report)


def match_and_decompose(
    dec1: ErgodicDecomposition,
    dec2: ErgodicDecomposition,
    iso: OrderIso,
    times: Sequence[float] = DEFAULT_TIMES,
    tol: float = DEFAULT_TOL,
) -> DecomposedIntertwiner:
    """Decompose ``iso`` between two independently given ergodic decompositions.

    ``rho[z]`` is the label of ``dec2`` whose fiber is ``tau^-1(s1^-1 z)``.
    The components need not be unitary when the two index measures differ;
    each is still an order isomorphism intertwining its component pair.
    """
    times = tuple(float(t) for t in times)
    for name, dec in (("source", dec1), ("target", dec2)):
        failures = validate_decomposition(dec, tol=tol)
        if failures:
            raise HypothesisError(f"{name} decomposition invalid: " + "; ".join(failures))
    form1, form2 = dec1.ambient_form(), dec2.ambient_form()
    hyp = _check_hypotheses(form1, form2, iso, times, tol)

    targets = fiber_map(dec2)
    rho, isos = [], []
    for z, fiber in enumerate(dec1.fibers):
        members = set(fiber)
        image = frozenset(
            y for y, x in zip(iso.codomain.ids, iso.tau) if iso.domain.ids[x] in members
        )
        eta = targets.get(image)
        if eta is None:
            raise DecompositionMismatchError(
                f"preimage of component {z} is not a fiber of the target decomposition"
            )
        rho.append(eta)
        isos.append(restrict_iso(iso, dec1.component_spaces[z], dec2.component_spaces[eta]))
    if sorted(rho) != list(range(dec2.k)):
        raise DecompositionMismatchError("component matching is not a bijection")

    comp = []
    for z, u in enumerate(isos):
        rep = check_intertwine(dec1.component_forms[z], dec2.component_forms[rho[z]], u, times, tol)
        if not rep.passed:
            _fail("component_intertwining", f"component {z} does not intertwine its pair")
        comp.append(rep.as_dict())

    blocks = assemble_operator([u.matrix() for u in isos], dec1, dec2, rho)
    if not np.array_equal(blocks, iso.matrix()):
        _fail("decomposability", "block assembly differs from the intertwiner")
    rho_inv = list(np.argsort(rho))
    inverse_blocks = assemble_operator(
        [isos[z].inverse().matrix() for z in rho_inv], dec2, dec1, rho_inv
    )
    inv_defect = float(np.max(np.abs(inverse_blocks - iso.inverse().matrix())))
    if inv_defect != 0.0:
        _fail("inverse_decomposability", f"inverse field does not represent the inverse ({inv_defect:.3g})")
    report = {
        "hypotheses": hyp.as_dict(),
        "components": comp,
        "decomposability": {"exact": True},
        "inverse_decomposability": {"defect": inv_defect},
    }
    return DecomposedIntertwiner(dec1, dec2, tuple(rho), tuple(isos), report)


def assemble_intertwiner(
    component_isos: Sequence[OrderIso],
    dec1: ErgodicDecomposition,
    dec2: ErgodicDecomposition,
    times: Sequence[float] = DEFAULT_TIMES,
    tol: float = DEFAULT_TOL,
    check: bool = True,
) -> OrderIso:
    """Glue component isomorphisms into a global one.

    The target component of each ``U_z`` is found from its codomain points.
    Both decompositions must share the index measure (``nu1(z) = nu2(rho z)``).
    With ``check=True`` the components must be unitary and intertwine their
    pairs, and the result is verified to be a unitary intertwiner.
    """
    if len(component_isos) != dec1.k or dec1.k != dec2.k:
        raise InputError(
            f"{len(component_isos)} component isos for decompositions with "
            f"{dec1.k} and {dec2.k} components"
        )
    by_ids = {frozenset(sp.ids): eta for eta, sp in enumerate(dec2.component_spaces)}
    rho = []
    for z, u in enumerate(component_isos):
        if not u.domain.same_as(dec1.component_spaces[z], 1e-12):
            raise InputError(f"component iso {z} is not defined on source component {z}")
        eta = by_ids.get(frozenset(u.codomain.ids))
        if eta is None or not u.codomain.same_as(dec2.component_spaces[eta], 1e-12):
            raise InputError(f"codomain of component iso {z} is not a target component")
        if abs(dec1.nu[z] - dec2.nu[eta]) > tol * dec1.nu[z]:
            raise InputError(
                f"index weights differ for component {z} ({dec1.nu[z]!r} vs {dec2.nu[eta]!r})"
            )
        rho.append(eta)
    if sorted(rho) != list(range(dec2.k)):
        raise InputError("component isos do not target distinct components")

    if check:
        for z, u in enumerate(component_isos):
            if not is_unitary(u, tol):
                raise HypothesisError(f"component iso {z} is not unitary")
            rep = check_intertwine(
                dec1.component_forms[z], dec2.component_forms[rho[z]], u, times, tol
            )
            if not rep.passed:
                raise HypothesisError(f"component iso {z} does not intertwine its pair")

    m = assemble_operator([u.matrix() for u in component_isos], dec1, dec2, rho)
    glob = factorize(m, dec1.space, dec2.space)
    if check:
        if not is_unitary(glob, tol):
            _fail("unitary", "assembled intertwiner is not unitary")
        rep = check_intertwine(dec1.ambient_form(), dec2.ambient_form(), glob, times, tol)
        if not rep.passed:
            _fail("intertwining", "assembled operator does not intertwine the direct sums")
    return glob


def direct_integral_clauses(
    blocks: Sequence,
    dec1: ErgodicDecomposition,
    dec2: ErgodicDecomposition,
    rho: Sequence[int] | None = None,
    times: Sequence[float] = DEFAULT_TIMES,
    tol: float = DEFAULT_TOL,
) -> dict[str, dict[str, bool]]:
    """Componentwise versus global verdicts for a field of bounded operators.

    For each property (``unitary``, ``order_preserving``, ``intertwining``)
    returns ``{"componentwise": ..., "global": ...}``; the two must coincide.
    """
    rho = list(range(dec1.k)) if rho is None else [int(r) for r in rho]
    m = assemble_operator(blocks, dec1, dec2, rho)
    form1, form2 = dec1.ambient_form(), dec2.ambient_form()
    comp = {"unitary": True, "order_preserving": True, "intertwining": True}
    for z, block in enumerate(blocks):
        s1, s2 = dec1.component_spaces[z], dec2.component_spaces[rho[z]]
        b = np.asarray(block, dtype=float)
        comp["unitary"] &= within(unitary_matrix_defect(b, s1.weights, s2.weights), tol)
        comp["order_preserving"] &= is_order_preserving(b)
        rep = check_intertwine(dec1.component_forms[z], dec2.component_forms[rho[z]], b, times, tol)
        comp["intertwining"] &= rep.semigroup_ok and rep.generator_ok
    rep = check_intertwine(form1, form2, m, times, tol)
    glob = {
        "unitary": within(unitary_matrix_defect(m, form1.space.weights, form2.space.weights), tol),
        "order_preserving": is_order_preserving(m),
        "intertwining": rep.semigroup_ok and rep.generator_ok,
    }
    return {key: {"componentwise": comp[key], "global": glob[key]} for key in comp}
