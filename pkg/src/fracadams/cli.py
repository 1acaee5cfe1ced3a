"""Command-line driver.

Every subcommand writes its artifacts into ``--out`` together with
``manifest.json`` (SHA-256 of each file).  Outputs depend only on the
arguments and ``--seed``; floats are written with 17 significant digits.

Settings may come from an INI file: ``fracadams run exp.ini`` reads the
``[experiment]`` section, where ``name`` selects the subcommand and every other
key is an option of that subcommand.  Options given on the command line win.

Exit status: 0 success, 1 numerical failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import configparser
import contextlib
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import FracAdamsError, SolverError, UsageError

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2


# ----------------------------------------------------------------------------
# serialization

def fmt_float(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return "%.17g" % x


def to_json(obj, indent: int = 1, _level: int = 0) -> str:
    """JSON text with sorted keys and 17-digit floats."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(v, indent, _level + 1)}"
                 for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + to_json(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj)
    if isinstance(obj, np.ndarray):
        return to_json(obj.tolist(), indent, _level)
    return json.dumps(str(obj))


class Artifacts:
    """Collects written files and produces the manifest."""

    def __init__(self, out: Path, command: str, settings: dict):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files = []
        self.command = command
        self.settings = settings

    def write_text(self, name: str, text: str) -> Path:
        path = self.out / name
        path.write_text(text)
        self.files.append(path)
        return path

    def write_json(self, name: str, obj) -> Path:
        return self.write_text(name, to_json(obj) + "\n")

    def write_csv(self, name: str, header, rows) -> Path:
        lines = [",".join(header)]
        for r in rows:
            lines.append(",".join(fmt_float(v) if isinstance(v, (float, np.floating)) else str(v) for v in r))
        return self.write_text(name, "\n".join(lines) + "\n")

    def write_gridfunction(self, stem: str, f, fmt: str = "bin"):
        from .grid import save_gridfunction
        self.files.extend(save_gridfunction(self.out / stem, f, fmt))

    def finish(self) -> Path:
        entries = []
        for p in sorted(set(self.files)):
            data = p.read_bytes()
            entries.append({"file": p.name, "bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()})
        manifest = {"command": self.command, "settings": self.settings, "files": entries,
                    "version": __version__}
        path = self.out / "manifest.json"
        path.write_text(to_json(manifest) + "\n")
        return path


# ----------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _extended(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "infinity", "oo"):
        return math.inf
    return float(t)


def _float_list(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()]


def _range(text: str) -> list:
    """a:b:steps -> steps values evenly spaced from a to b; a single value is allowed."""
    parts = text.split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected a:b:steps")
    a, b, k = float(parts[0]), float(parts[1]), int(parts[2])
    if k < 1:
        raise argparse.ArgumentTypeError("steps must be positive")
    return np.linspace(a, b, k).tolist()


def _ball(text: str) -> float:
    kind, _, r = text.partition(":")
    if kind != "ball" or not r:
        raise argparse.ArgumentTypeError("expected ball:R")
    return float(r)


def _add_source(p):
    p.add_argument("--input", help="GridFunction header (.json) to read")
    p.add_argument("--n", type=int, default=1, help="dimension of a generated bump")
    p.add_argument("--h", type=float, default=1 / 128, help="spacing of a generated bump")
    p.add_argument("--halfwidth", type=float, default=1.5)
    p.add_argument("--radius", type=float, default=1.0, help="radius of a generated bump")
    p.add_argument("--format", choices=("bin", "csv"), default="bin")


def build_parser():
    parser = _Parser(prog="fracadams", description="fractional Laplacians, Green functions and "
                     "exponential-integrability experiments")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    subs = {}

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--out", default=None, help="output directory (default fracadams-out/<command>)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", default=None, help="INI file with a [<command>] section")
        subs[name] = p
        return p

    p = add("constants", "sharp constants for (n, p, q)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=_extended, default=None)

    p = add("fraclap", "apply (-Delta)^(s/2) to a grid function")
    _add_source(p)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--route", choices=("spectral", "pv"), default="spectral")

    p = add("riesz", "apply the Riesz potential I_alpha")
    _add_source(p)
    p.add_argument("--alpha", type=float, required=True)

    p = add("green", "Green operator on a ball: bounds, symmetry, representation residual")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--h", type=float, default=1 / 256)
    p.add_argument("--domain", type=_ball, default=1.0, help="ball:R")
    p.add_argument("--sigma", type=float, required=True, help="order s = 2k + sigma of the operator")
    p.add_argument("--save-kernel", action="store_true")

    p = add("lorentz", "Lorentz norm of a grid function")
    p.add_argument("--input", required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=_extended, required=True)

    p = add("mt-sweep", "exponential functional along an extremal family")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--q", type=_extended, default=2.0)
    p.add_argument("--betas", type=_range, required=True)
    p.add_argument("--relative", action="store_true", help="betas are multiples of the threshold")
    p.add_argument("--family-size", type=int, default=6)
    p.add_argument("--rho", type=float, default=0.125)
    p.add_argument("--h", type=float, default=None, help="uniform spacing (graded 1-D mesh if omitted)")

    p = add("disjoint-probe", "scaling of the disjoint-support commutator")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--q", type=_extended, default=2.0)
    p.add_argument("--t", type=float, default=0.5)
    p.add_argument("--s", type=float, default=0.5)
    p.add_argument("--rhos", type=_float_list, default=[1 / 8, 1 / 16, 1 / 32, 1 / 64])

    p = add("qcurv", "variational Q-curvature solve on (-1, 1)")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--lambda", dest="Lambda", type=float, default=1.0)
    p.add_argument("--K", default="const:1")
    p.add_argument("--h", type=float, default=2.0 ** -8)
    p.add_argument("--basis", type=int, default=31)
    p.add_argument("--tol", type=float, default=1e-8)

    p = add("verify-all", "run the acceptance suite")
    p.add_argument("--only", type=lambda t: [int(v) for v in t.split(",")], default=None)

    p = sub.add_parser("run", help="run the experiment described by an INI file")
    p.add_argument("config")
    p.add_argument("overrides", nargs=argparse.REMAINDER)
    return parser, subs


_FLAGS = {"--relative", "--save-kernel"}


def _config_tokens(path, section):
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise UsageError(f"cannot read config file {path}")
    if not cp.has_section(section):
        return cp, []
    tokens = []
    for k, v in cp.items(section):
        if k == "name":
            continue
        key = "--" + k.replace("_", "-")
        if key in _FLAGS:
            if v.strip().lower() in ("true", "yes", "on", "1"):
                tokens.append(key)
        else:
            tokens += [key, v]
    return cp, tokens


def parse(argv):
    parser, subs = build_parser()
    if argv and argv[0] == "run":
        ns = parser.parse_args(argv)
        cp, _ = _config_tokens(ns.config, "experiment")
        if not cp.has_option("experiment", "name"):
            raise UsageError("config needs [experiment] name = <subcommand>")
        name = cp.get("experiment", "name").strip()
        if name not in subs:
            raise UsageError(f"unknown experiment {name!r}")
        _, tokens = _config_tokens(ns.config, "experiment")
        return parser.parse_args([name] + tokens + list(ns.overrides))
    # read --config before argparse so the file can supply required options
    cfg = _config_path(argv[1:])
    if argv and argv[0] in subs and cfg:
        _, tokens = _config_tokens(cfg, argv[0])
        return parser.parse_args([argv[0]] + tokens + list(argv[1:]))
    return parser.parse_args(argv)


def _config_path(args):
    for i, a in enumerate(args):
        if a == "--config":
            if i + 1 >= len(args):
                raise UsageError("--config needs a file")
            return args[i + 1]
        if a.startswith("--config="):
            return a.split("=", 1)[1]
    return None


# ----------------------------------------------------------------------------
# commands

def _source(ns):
    from .grid import Grid, load_gridfunction, smooth_bump
    if ns.input:
        return load_gridfunction(ns.input)
    return smooth_bump(Grid.centered(ns.n, ns.h, ns.halfwidth), None, ns.radius)


def cmd_constants(ns, art):
    from .constants import sharp_constants
    c = sharp_constants(ns.n, ns.p, ns.q)
    art.write_json("constants.json", c.as_dict())
    print(to_json(c.as_dict()))
    return EXIT_OK


def cmd_fraclap(ns, art):
    from .fraclap import fraclap_pv, fraclap_spectral
    f = _source(ns)
    out = fraclap_spectral(f, ns.s) if ns.route == "spectral" else fraclap_pv(f, ns.s)
    art.write_gridfunction("input", f, ns.format)
    art.write_gridfunction("result", out, ns.format)
    return EXIT_OK


def cmd_riesz(ns, art):
    from .grid import whole_grid
    from .riesz import riesz_apply, riesz_operator
    f = _source(ns)
    out = riesz_apply(riesz_operator(ns.alpha, whole_grid(f.grid)), f)
    art.write_gridfunction("input", f, ns.format)
    art.write_gridfunction("result", out, ns.format)
    return EXIT_OK


def cmd_green(ns, art):
    from . import green
    from .grid import make_ball_domain, smooth_bump
    dom = make_ball_domain(ns.n, ns.domain, ns.h)
    op = green.green_compose(dom, ns.sigma)
    rep = {"cells": dom.count, "s": op.s, "sigma": op.sigma, "k": op.k,
           "sources": int(len(op.sources))}
    if len(op.sources):
        rep["bounds"] = green.kernel_bound_violations(op)
        if op.k == 0:
            rep["symmetry_defect"] = green.symmetry_defect(op)
    u = smooth_bump(dom.grid, None, 0.5 * ns.domain)
    rep["representation_residual"] = green.relative_residual(op, u)
    if ns.save_kernel:
        art.files.extend(green.save_green_operator(op, art.out / "kernel"))
    art.write_json("green.json", rep)
    print(to_json(rep))
    return EXIT_NUMERIC if rep.get("bounds", {}).get("violations", 0) else EXIT_OK


def cmd_lorentz(ns, art):
    from .grid import load_gridfunction, whole_grid
    from .lorentz import LorentzParams, lorentz_norm
    f = load_gridfunction(ns.input)
    val = lorentz_norm(f, whole_grid(f.grid), LorentzParams(ns.p, ns.q))
    rep = {"p": ns.p, "q": ns.q, "norm": val}
    art.write_json("lorentz.json", rep)
    print(to_json(rep))
    return EXIT_OK


def cmd_mt_sweep(ns, art):
    from .adams import build_extremal_family, sharpness_sweep
    from .constants import sharp_constants
    fam = build_extremal_family(ns.n, ns.p, ns.q, rho=ns.rho, count=ns.family_size, h=ns.h)
    thr = sharp_constants(ns.n, ns.p, ns.q).beta_npq
    betas = [b * thr for b in ns.betas] if ns.relative else list(ns.betas)
    rep = sharpness_sweep(fam, betas)
    rows = [(j + 1, b, v[j]) for b, v in zip(rep.betas, rep.values) for j in range(len(fam))]
    art.write_csv("sweep.csv", ("j", "beta", "E"), rows)
    summary = rep.as_dict()
    summary.update({"threshold": thr, "mesh": fam.mesh,
                    "deltas": [m.delta for m in fam.members]})
    art.write_json("classification.json", summary)
    print(to_json({"betas": summary["betas"], "classification": summary["classification"]}))
    return EXIT_OK


def cmd_disjoint(ns, art):
    from .adams import disjoint_support_probe
    rep = disjoint_support_probe(ns.n, ns.p, ns.q, ns.t, ns.s, ns.rhos)
    art.write_csv("probe.csv", ("rho", "R"), [(r["rho"], r["R"]) for r in rep["rows"]])
    art.write_json("probe.json", rep)
    print(to_json({"slope": rep["slope"], "expected_slope": rep["expected_slope"]}))
    return EXIT_OK


def cmd_qcurv(ns, art):
    from .grid import GridFunction, load_gridfunction, make_ball_domain
    from . import qcurv
    dom = make_ball_domain(ns.n, 1.0, ns.h)
    if ns.K.startswith("const:"):
        K = GridFunction(dom.grid, np.full(dom.grid.shape, float(ns.K[6:])))
    else:
        K = load_gridfunction(ns.K)
        if K.grid != dom.grid:
            raise UsageError("curvature file lives on a different grid than --n/--h describe")
    prob = qcurv.make_problem(dom, K, ns.p, ns.Lambda, basis_count=ns.basis)
    sol = qcurv.qcurv_minimize(prob, tol=ns.tol)
    res = qcurv.qcurv_residual(sol, prob)
    rows = [(i, e, g) for i, (e, g) in enumerate(zip(sol.energies, sol.gradient_norms))]
    art.write_csv("iterates.csv", ("iteration", "energy", "gradient_norm"), rows)
    art.write_gridfunction("u0", sol.u0)
    art.write_gridfunction("solution", sol.u0 + sol.shift)
    rep = {"converged": sol.converged, "iterations": sol.iterations, "multiplier": sol.multiplier,
           "shift": sol.shift, "residual": res, "energy": sol.energies[-1],
           "basis": len(prob.basis)}
    art.write_json("qcurv.json", rep)
    print(to_json(rep))
    return EXIT_OK if sol.converged else EXIT_NUMERIC


def cmd_verify_all(ns, art):
    from . import acceptance
    results = acceptance.run(ns.only, seed=ns.seed, echo=print)
    report = [{k: v for k, v in r.as_dict().items() if k != "seconds"} for r in results]
    art.write_json("acceptance.json", report)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_NUMERIC if failed else EXIT_OK


COMMANDS = {"constants": cmd_constants, "fraclap": cmd_fraclap, "riesz": cmd_riesz,
            "green": cmd_green, "lorentz": cmd_lorentz, "mt-sweep": cmd_mt_sweep,
            "disjoint-probe": cmd_disjoint, "qcurv": cmd_qcurv, "verify-all": cmd_verify_all}


def _thread_limit():
    val = os.environ.get("FRACADAMS_THREADS")
    if not val:
        return contextlib.nullcontext()
    try:
        k = int(val)
        if k < 1:
            raise ValueError
    except ValueError:
        raise UsageError(f"FRACADAMS_THREADS must be a positive integer, got {val!r}") from None
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=k)


def _settings(ns):
    return {k: v for k, v in vars(ns).items() if k not in ("out", "config")}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        ns = parse(argv)
        out = Path(ns.out) if ns.out else Path("fracadams-out") / ns.command
        with _thread_limit():
            art = Artifacts(out, ns.command, _settings(ns))
            status = COMMANDS[ns.command](ns, art)
            art.finish()
        return status
    except SystemExit as exc:          # --help / --version
        return int(exc.code or 0)
    except SolverError as exc:
        sys.stderr.write(to_json({"error": "SolverError", "message": str(exc),
                                  "diagnostics": exc.diagnostics}) + "\n")
        return EXIT_NUMERIC
    except (FracAdamsError, ValueError, OSError) as exc:
        sys.stderr.write(to_json({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
