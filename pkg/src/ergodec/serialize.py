"""JSON wire formats and canonical serialization.

Canonical output: sorted keys, no insignificant whitespace, floats in
shortest round-trip decimal form (``repr``), no NaN or infinity. Re-running a
command on the same input produces identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .core import DirichletForm, EdgeFormSpec, StateSpace, build_form
from .decomposition import DecompositionMatch, ErgodicDecomposition
from .errors import InputError
from .intertwine import DecomposedIntertwiner
from .orderiso import OrderIso


def plain(obj: Any) -> Any:
    """Convert numpy scalars/arrays and tuples into JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def dumps(obj: Any, pretty: bool = False) -> str:
    if pretty:
        text = json.dumps(plain(obj), sort_keys=True, indent=2, allow_nan=False)
    else:
        text = json.dumps(plain(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)
    return text + "\n"


def _reject_constant(token):
    raise InputError(f"non-finite number {token} is not allowed")


def loads(text: str, source: str = "<input>") -> Any:
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise InputError(
            f"{source}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from None


def load(path) -> Any:
    try:
        text = Path(path).read_text()
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    return loads(text, str(path))


def _require(obj, key: str, kind=None, where: str = "object"):
    if not isinstance(obj, dict):
        raise InputError(f"{where}: expected a JSON object")
    if key not in obj:
        raise InputError(f"{where}: missing key {key!r}")
    value = obj[key]
    if kind is not None and not isinstance(value, kind):
        raise InputError(f"{where}: key {key!r} has the wrong type")
    return value


def _numbers(values, where: str) -> list[float]:
    if not isinstance(values, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in values
    ):
        raise InputError(f"{where}: expected a list of numbers")
    return [float(v) for v in values]


def _matrix(rows, where: str) -> np.ndarray:
    if not isinstance(rows, list):
        raise InputError(f"{where}: expected a list of rows")
    data = [_numbers(r, f"{where} row {i}") for i, r in enumerate(rows)]
    if data and len({len(r) for r in data}) != 1:
        raise InputError(f"{where}: rows have different lengths")
    return np.array(data, dtype=float).reshape(len(data), len(data[0]) if data else 0)


def space_to_json(space: StateSpace) -> dict:
    return {"ids": list(space.ids), "weights": space.weights}


def space_from_json(obj, where: str = "space") -> StateSpace:
    ids = _require(obj, "ids", list, where)
    if not all(isinstance(i, str) for i in ids):
        raise InputError(f"{where}: ids must be strings")
    return StateSpace(tuple(ids), _numbers(_require(obj, "weights", list, where), where))


def space_of(obj, where: str = "space") -> StateSpace:
    """Accept either a space object or any object carrying a ``"space"`` key."""
    if isinstance(obj, dict) and "space" in obj and "ids" not in obj:
        return space_from_json(obj["space"], where)
    return space_from_json(obj, where)


def form_to_json(form: DirichletForm) -> dict:
    return {"space": space_to_json(form.space), "matrix": form.matrix}


def form_from_json(obj, where: str = "form") -> DirichletForm:
    space = space_from_json(_require(obj, "space", dict, where), f"{where}.space")
    if "matrix" in obj:
        return DirichletForm(space, _matrix(obj["matrix"], f"{where}.matrix"))
    if "edges" in obj:
        edges = []
        for e in _require(obj, "edges", list, where):
            if (
                not isinstance(e, list)
                or len(e) != 3
                or not isinstance(e[0], str)
                or not isinstance(e[1], str)
            ):
                raise InputError(f"{where}: edges must be [point, point, weight] triples")
            edges.append((e[0], e[1], _numbers([e[2]], f"{where}.edges")[0]))
        killing = obj.get("killing", {})
        if not isinstance(killing, dict):
            raise InputError(f"{where}: killing must be an object")
        killing = {p: _numbers([v], f"{where}.killing")[0] for p, v in killing.items()}
        return build_form(EdgeFormSpec(space, tuple(edges), killing))
    raise InputError(f"{where}: expected a 'matrix' or 'edges' key")


def decomposition_to_json(dec: ErgodicDecomposition) -> dict:
    return {
        "space": space_to_json(dec.space),
        "labels": {p: int(z) for p, z in zip(dec.space.ids, dec.labels)},
        "nu": dec.nu,
        "components": [form_to_json(f) for f in dec.component_forms],
    }


def decomposition_from_json(obj, where: str = "decomposition") -> ErgodicDecomposition:
    labels = _require(obj, "labels", dict, where)
    nu = _numbers(_require(obj, "nu", list, where), f"{where}.nu")
    comps = _require(obj, "components", list, where)
    forms = [form_from_json(c, f"{where}.components[{i}]") for i, c in enumerate(comps)]
    if "space" in obj:
        space = space_from_json(obj["space"], f"{where}.space")
    else:
        if len(forms) != len(nu):
            raise InputError(f"{where}: {len(nu)} weights for {len(forms)} components")
        ids, weights = [], []
        for w, f in zip(nu, forms):
            ids.extend(f.space.ids)
            weights.extend((w * f.space.weights).tolist())
        space = StateSpace(tuple(ids), weights)
    if set(labels) != set(space.ids):
        raise InputError(f"{where}: labels must cover exactly the ambient points")
    if not all(isinstance(v, int) and not isinstance(v, bool) for v in labels.values()):
        raise InputError(f"{where}: labels must be integers")
    return ErgodicDecomposition(
        space,
        [labels[p] for p in space.ids],
        nu,
        tuple(f.space for f in forms),
        tuple(forms),
    )


def iso_to_json(iso: OrderIso) -> dict:
    return {"h": iso.h_map(), "tau": iso.tau_map()}


def iso_from_json(obj, domain: StateSpace, codomain: StateSpace, where: str = "iso") -> OrderIso:
    h = _require(obj, "h", dict, where)
    tau = _require(obj, "tau", dict, where)
    _numbers(list(h.values()), f"{where}.h")
    if not all(isinstance(v, str) for v in tau.values()):
        raise InputError(f"{where}: tau values must be point ids")
    return OrderIso.from_maps(domain, codomain, h, tau)


def matrix_to_json(m) -> dict:
    return {"matrix": np.asarray(m)}


def matrix_from_json(obj, where: str = "matrix") -> np.ndarray:
    return _matrix(_require(obj, "matrix", list, where), f"{where}.matrix")


def match_to_json(match: DecompositionMatch) -> dict:
    return {
        "rho": {str(z): int(eta) for z, eta in enumerate(match.rho)},
        "h": {str(eta): float(v) for eta, v in enumerate(match.h)},
        "scaling_defect": match.scaling_defect,
        "measure_defect": match.measure_defect,
    }


def intertwiner_to_json(di: DecomposedIntertwiner) -> dict:
    comps = []
    for z, u in enumerate(di.component_isos):
        eta = di.rho[z]
        target = di.target.component_forms[eta]
        comps.append(
            {
                "label": z,
                "target_label": eta,
                "mu2": dict(zip(target.space.ids, target.space.weights.tolist())),
                "U": iso_to_json(u),
                "E2": form_to_json(target),
            }
        )
    return {
        "rho": {str(z): int(eta) for z, eta in enumerate(di.rho)},
        "components": comps,
        "source_decomposition": decomposition_to_json(di.source),
        "target_decomposition": decomposition_to_json(di.target),
        "report": di.report,
    }


def component_isos_from_json(obj, where: str = "intertwiner"):
    """Source/target decompositions and component isos of an intertwiner document."""
    src = decomposition_from_json(
        _require(obj, "source_decomposition", dict, where), f"{where}.source_decomposition"
    )
    tgt = decomposition_from_json(
        _require(obj, "target_decomposition", dict, where), f"{where}.target_decomposition"
    )
    comps = _require(obj, "components", list, where)
    if len(comps) != src.k:
        raise InputError(f"{where}: {len(comps)} components for {src.k} source components")
    isos = [None] * src.k
    for i, c in enumerate(comps):
        z = _require(c, "label", int, f"{where}.components[{i}]")
        eta = _require(c, "target_label", int, f"{where}.components[{i}]")
        if not (0 <= z < src.k and 0 <= eta < tgt.k) or isos[z] is not None:
            raise InputError(f"{where}.components[{i}]: bad labels")
        isos[z] = iso_from_json(
            _require(c, "U", dict, f"{where}.components[{i}]"),
            src.component_spaces[z],
            tgt.component_spaces[eta],
            f"{where}.components[{i}].U",
        )
    return src, tgt, isos
