"""Command-line front end.

Exit codes: 0 success, 1 mathematical failure or violated hypothesis,
2 malformed input. All JSON output is canonical (see :mod:`ergodec.serialize`).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import serialize as io
from .core import DEFAULT_TIMES, DEFAULT_TOL, StateSpace, validate_dirichlet
from .decomposition import (
    NU_MODES,
    ergodic_decompose,
    match_decompositions,
    validate_decomposition,
    validate_disintegration,
)
from .errors import ConsistencyError, InputError, MathError
from .intertwine import assemble_intertwiner, check_intertwine, decompose_intertwiner
from .orderiso import adjoint, factorize

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
TOL_ENV = "ERGODEC_TOL"


@dataclass(frozen=True)
class RunConfig:
    tolerance: float = DEFAULT_TOL
    times: tuple[float, ...] = DEFAULT_TIMES
    nu_mode: str = "uniform"
    out: str | None = None
    pretty: bool = False

    def __post_init__(self):
        if not (self.tolerance > 0 and np.isfinite(self.tolerance)):
            raise InputError(f"tolerance must be positive, got {self.tolerance!r}")
        if not self.times or any(not (t > 0 and np.isfinite(t)) for t in self.times):
            raise InputError(f"times must be positive, got {list(self.times)}")
        if self.nu_mode not in NU_MODES:
            raise InputError(f"nu-mode must be one of {NU_MODES}")

    def settings(self) -> dict:
        return {"tolerance": self.tolerance, "times": list(self.times)}


def _float(text: str, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise InputError(f"{what}: {text!r} is not a number") from None


def config_from_args(args) -> RunConfig:
    if args.tol is not None:
        tol = _float(args.tol, "--tol")
    elif os.environ.get(TOL_ENV):
        tol = _float(os.environ[TOL_ENV], TOL_ENV)
    else:
        tol = DEFAULT_TOL
    times = DEFAULT_TIMES
    if args.times is not None:
        times = tuple(_float(t, "--times") for t in args.times.split(",") if t.strip())
    return RunConfig(tol, times, args.nu_mode, args.out, args.pretty)


def _space_arg(path: str | None, n: int, what: str) -> StateSpace:
    if path is None:
        return StateSpace(tuple(str(i) for i in range(n)), np.ones(n))
    return io.space_of(io.load(path), what)


def cmd_validate(args, cfg: RunConfig):
    form = io.form_from_json(io.load(args.form))
    diag = validate_dirichlet(form, cfg.tolerance)
    report = {
        "command": "validate",
        "passed": diag.passed,
        "failures": list(diag.failures),
        "symmetry_defect": diag.symmetry_defect,
        "min_eigenvalue": diag.min_eigenvalue,
        "sign_violation": diag.sign_violation,
        "sign_violation_at": diag.sign_violation_at,
        "row_sum_violation": diag.row_sum_violation,
        "row_sum_violation_at": diag.row_sum_violation_at,
        "contraction_violation": diag.contraction_violation,
        "settings": cfg.settings(),
    }
    return report, EXIT_OK if diag.passed else EXIT_FAIL


def cmd_decompose(args, cfg: RunConfig):
    form = io.form_from_json(io.load(args.form))
    dec = ergodic_decompose(form, cfg.nu_mode, cfg.tolerance)
    check = validate_disintegration(dec, cfg.tolerance)
    if not check.passed:
        raise ConsistencyError("; ".join(check.failures), "disintegration")
    out = io.decomposition_to_json(dec)
    out["settings"] = {"nu_mode": cfg.nu_mode, "tolerance": cfg.tolerance}
    return out, EXIT_OK


def cmd_factorize(args, cfg: RunConfig):
    doc = io.load(args.matrix)
    m = io.matrix_from_json(doc)
    domain = (
        io.space_from_json(doc["domain"], "domain")
        if isinstance(doc, dict) and "domain" in doc and args.domain is None
        else _space_arg(args.domain, m.shape[1], "domain")
    )
    codomain = (
        io.space_from_json(doc["codomain"], "codomain")
        if isinstance(doc, dict) and "codomain" in doc and args.codomain is None
        else _space_arg(args.codomain, m.shape[0], "codomain")
    )
    return io.iso_to_json(factorize(m, domain, codomain)), EXIT_OK


def cmd_adjoint(args, cfg: RunConfig):
    domain = io.space_of(io.load(args.domain), "domain")
    codomain = io.space_of(io.load(args.codomain), "codomain")
    iso = io.iso_from_json(io.load(args.iso), domain, codomain)
    return io.matrix_to_json(adjoint(iso)), EXIT_OK


def cmd_intertwine(args, cfg: RunConfig):
    form1 = io.form_from_json(io.load(args.form1), "form1")
    form2 = io.form_from_json(io.load(args.form2), "form2")
    iso = io.iso_from_json(io.load(args.iso), form1.space, form2.space)
    rep = check_intertwine(form1, form2, iso, cfg.times, cfg.tolerance)
    out = {"command": "intertwine", **rep.as_dict(), "settings": cfg.settings()}
    return out, EXIT_OK if rep.passed else EXIT_FAIL


def cmd_decompose_intertwiner(args, cfg: RunConfig):
    dec1 = io.decomposition_from_json(io.load(args.decomposition))
    form2 = io.form_from_json(io.load(args.form2), "form2")
    iso = io.iso_from_json(io.load(args.iso), dec1.space, form2.space)
    if args.form1 is not None:
        form1 = io.form_from_json(io.load(args.form1), "form1")
        failures = validate_decomposition(dec1, form1, cfg.tolerance)
        if failures:
            raise ConsistencyError(
                "decomposition does not decompose form1: " + "; ".join(failures),
                "decomposition",
            )
    di = decompose_intertwiner(dec1, form2, iso, cfg.times, cfg.tolerance)
    out = io.intertwiner_to_json(di)
    out["report"]["settings"] = cfg.settings()
    return out, EXIT_OK


def cmd_match(args, cfg: RunConfig):
    dec1 = io.decomposition_from_json(io.load(args.dec1), "dec1")
    dec2 = io.decomposition_from_json(io.load(args.dec2), "dec2")
    out = io.match_to_json(match_decompositions(dec1, dec2, cfg.tolerance))
    out["settings"] = cfg.settings()
    return out, EXIT_OK


def cmd_assemble(args, cfg: RunConfig):
    src, tgt, isos = io.component_isos_from_json(io.load(args.intertwiner))
    iso = assemble_intertwiner(isos, src, tgt, cfg.times, cfg.tolerance)
    return io.iso_to_json(iso), EXIT_OK


COMMANDS = {
    "validate": (cmd_validate, "check that a form is a Dirichlet form"),
    "decompose": (cmd_decompose, "ergodic decomposition of a form"),
    "factorize": (cmd_factorize, "factor a weighted permutation matrix into (h, tau)"),
    "adjoint": (cmd_adjoint, "L2 adjoint of an order isomorphism"),
    "intertwine": (cmd_intertwine, "check that an isomorphism intertwines two forms"),
    "decompose-intertwiner": (
        cmd_decompose_intertwiner,
        "decompose a unitary intertwiner over an ergodic decomposition",
    ),
    "match": (cmd_match, "match two ergodic decompositions of the same form"),
    "assemble": (cmd_assemble, "assemble component isomorphisms into a global one"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", default=None, help=f"tolerance (default ${TOL_ENV} or {DEFAULT_TOL})")
    common.add_argument("--times", default=None, help="comma-separated semigroup times")
    common.add_argument("--nu-mode", default="uniform", choices=NU_MODES)
    common.add_argument("--out", default=None, help="output file (default stdout)")
    common.add_argument("--pretty", action="store_true", help="indent JSON output")

    parser = argparse.ArgumentParser(prog="ergodec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "validate": [("form",)],
        "decompose": [("form",)],
        "factorize": [("matrix",), ("--domain",), ("--codomain",)],
        "adjoint": [("iso",), ("--domain",), ("--codomain",)],
        "intertwine": [("form1",), ("form2",), ("iso",)],
        "decompose-intertwiner": [("decomposition",), ("form2",), ("iso",), ("--form1",)],
        "match": [("dec1",), ("dec2",)],
        "assemble": [("intertwiner",)],
    }
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        for (arg,) in specs[name]:
            if name == "adjoint" and arg.startswith("--"):
                p.add_argument(arg, required=True)
            else:
                p.add_argument(arg)
    return parser


def _emit(doc, cfg: RunConfig | None, stream) -> None:
    text = io.dumps(doc, pretty=cfg.pretty if cfg else False)
    if cfg is not None and cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        stream.write(text)


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    cfg = None
    try:
        cfg = config_from_args(args)
        doc, code = COMMANDS[args.command][0](args, cfg)
        _emit(doc, cfg, stdout)
        return code
    except InputError as exc:
        stderr.write(io.dumps({"error": "input", "message": str(exc)}))
        return EXIT_INPUT
    except MathError as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        if getattr(exc, "clause", None):
            err["clause"] = exc.clause
        stderr.write(io.dumps(err))
        return EXIT_FAIL
    except (OSError, ValueError, TypeError, KeyError) as exc:
        # anything else that escapes the readers is still malformed input
        stderr.write(io.dumps({"error": "input", "message": str(exc)}))
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
