"""Batch front end: ``penalty-forge {run,sweep,selftest,export}``.

A run is described by a flat ``key = value`` file (``#`` comments allowed)::

    problem = obstacle
    solver = algorithm1
    n = 50
    beta = 0.01
    eps = h^2

Every key is typed and validated before anything is assembled; unknown keys
are rejected.  ``eps = h^2`` resolves to ``(1/n)^2``.  Each run writes
``trace.csv`` and ``report.json`` (always, also on failure) plus the requested
solution fields into its output directory.

Exit status: 0 converged, 2 iteration cap reached, 3 solver failure,
4 configuration error.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import logging
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import io
from .linalg import as_dense
from .oracles import enumerate_qp
from .penalty import j_eps_value, j_value
from .problems import (
    GridSpec,
    NoiseSpec,
    assemble_inverse_medium,
    assemble_inverse_source,
    assemble_obstacle,
    duplicate_row_qp,
    make_denoise_instance,
    psnr,
    random_box_qp,
    random_convex_qp,
    scalar_problem,
    solve_denoise,
)
from .problems.denoise import multiparam_energy, tv_energy
from .solvers import (
    LineSearchControl,
    SolverConfig,
    solve_algorithm1,
    solve_algorithm2,
    solve_newton,
    solve_pdas,
)

logger = logging.getLogger(__name__)

EXIT_CONVERGED = 0
EXIT_MAX_ITER = 2
EXIT_SOLVER_FAILURE = 3
EXIT_CONFIG_ERROR = 4

THREADS_ENV = "PENALTY_FORGE_THREADS"

PROBLEMS = ("scalar", "obstacle", "inverse_source", "inverse_medium", "qp", "denoise")
SOLVERS = ("algorithm1", "algorithm2", "newton", "pdas")
EXPORTS = ("grid", "mtx", "pgm")
GRID_PROBLEMS = ("obstacle", "inverse_source", "inverse_medium", "denoise")


class ConfigError(ValueError):
    """Invalid run configuration; carries the offending ``field`` and ``line``."""

    def __init__(self, message, field=None, line=None):
        where = f"line {line}: " if line else ""
        super().__init__(f"{where}{message}")
        self.field = field
        self.line = line


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    problem: str
    solver: str
    # problem parameters
    n: int = 20
    C: float = 10.0
    eta: float = 1e-4
    delta: float = 0.0
    seed: int = 0
    beta: float = 1.0
    g: float = -1.0
    x0: object = None
    U: float = 2.0
    noise_mode: str = ""
    bilateral: bool = False
    qp_kind: str = "convex"
    qp_n: int = 6
    qp_m: int = 4
    denoise_method: str = "multiparam"
    eta1: float = 0.05 / 32
    eta2: float = 1e-4 / 32**2
    tv_weight: float = 1e-3
    # solver parameters
    alpha: float = 1.0
    eps: object = 1e-6
    tol: float = 1e-10
    max_iter: int = 100
    preconditioner: str = "problem"
    implicit_quadratic: bool = False
    monotone_guard: str = "warn"
    gamma: float = 1.0
    reg: float = 0.0
    newton_line_search: bool = True
    # output
    out: str = ""
    export: tuple = ("grid",)

    @property
    def epsilon(self) -> float:
        """Numeric ``eps`` with ``h^2`` resolved against the grid."""
        if self.eps == "h^2":
            return (1.0 / self.n) ** 2
        return float(self.eps)

    def echo(self):
        d = asdict(self)
        d["export"] = list(self.export)
        d["eps_resolved"] = self.epsilon
        return d


def _positive(name, v):
    if not v > 0:
        raise ValueError(f"{name} must be positive")
    return v


def _nonnegative(name, v):
    if v < 0:
        raise ValueError(f"{name} must be nonnegative")
    return v


def _choice(options):
    def check(name, v):
        if v not in options:
            raise ValueError(f"{name} must be one of {', '.join(options)} (got {v!r})")
        return v
    return check


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_eps(text):
    t = text.strip().replace(" ", "")
    if t.lower() in ("h^2", "h**2", "h2"):
        return "h^2"
    return float(t)


def _parse_x0(text):
    t = text.strip()
    return None if t.lower() in ("", "default") else float(t)


def _parse_export(text):
    items = tuple(s.strip() for s in text.split(",") if s.strip())
    for s in items:
        if s not in EXPORTS:
            raise ValueError(f"export entries must be among {', '.join(EXPORTS)} (got {s!r})")
    return items


def _check_eps(name, v):
    if v != "h^2" and not v > 0:
        raise ValueError(f"{name} must be positive or 'h^2'")
    return v


# key -> (parser, validator)
SCHEMA = {
    "problem": (str, _choice(PROBLEMS)),
    "solver": (str, _choice(SOLVERS)),
    "n": (int, _positive),
    "C": (float, None),
    "eta": (float, _positive),
    "delta": (float, _nonnegative),
    "seed": (int, _nonnegative),
    "beta": (float, _positive),
    "g": (float, None),
    "x0": (_parse_x0, None),
    "U": (float, _positive),
    "noise_mode": (str, _choice(("", "additive-uniform", "relative-max"))),
    "bilateral": (_parse_bool, None),
    "qp_kind": (str, _choice(("convex", "box", "duplicate"))),
    "qp_n": (int, _positive),
    "qp_m": (int, _positive),
    "denoise_method": (str, _choice(("multiparam", "tv"))),
    "eta1": (float, _nonnegative),
    "eta2": (float, _nonnegative),
    "tv_weight": (float, _nonnegative),
    "alpha": (float, _positive),
    "eps": (_parse_eps, _check_eps),
    "tol": (float, _positive),
    "max_iter": (int, _positive),
    "preconditioner": (str, _choice(("problem", "identity"))),
    "implicit_quadratic": (_parse_bool, None),
    "monotone_guard": (str, _choice(("warn", "stop"))),
    "gamma": (float, _positive),
    "reg": (float, _nonnegative),
    "newton_line_search": (_parse_bool, None),
    "out": (str, None),
    "export": (_parse_export, None),
}
NUMERIC_FIELDS = tuple(k for k, (p, _) in SCHEMA.items() if p in (int, float)) + ("eps", "x0")
REQUIRED = ("problem", "solver")


def _convert(key, raw, line=None):
    parser, check = SCHEMA[key]
    try:
        value = parser(raw.strip()) if parser is not str else raw.strip()
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw.strip()!r} as {getattr(parser, '__name__', 'value')}",
                          field=key, line=line) from None
    if check is not None:
        try:
            value = check(key, value)
        except ValueError as exc:
            raise ConfigError(str(exc), field=key, line=line) from None
    return value


def _key_lines(text):
    lines = {}
    for i, line in enumerate(text.splitlines(), start=1):
        m = re.match(r"\s*([^#;=\s][^=]*?)\s*=", line)
        if m:
            lines.setdefault(m.group(1).strip(), i)
    return lines


def _validate(cfg: RunConfig, lines=None):
    lines = lines or {}

    def fail(field, msg):
        raise ConfigError(msg, field=field, line=lines.get(field))

    if cfg.problem in GRID_PROBLEMS and cfg.n < 3:
        fail("n", "n must be at least 3 for grid problems")
    if cfg.eps == "h^2" and cfg.problem not in GRID_PROBLEMS:
        fail("eps", f"eps = h^2 needs a grid problem, not {cfg.problem!r}")
    if cfg.problem == "denoise" and cfg.solver != "algorithm1":
        fail("solver", "the denoising iteration is run with solver = algorithm1")
    if cfg.problem == "qp" and cfg.qp_kind == "box" and cfg.qp_m > cfg.qp_n:
        fail("qp_m", "qp_m must not exceed qp_n for box QPs")
    if cfg.problem == "qp" and cfg.qp_m > 16 and cfg.qp_kind != "duplicate":
        fail("qp_m", "qp_m must be at most 16 (the reference solution enumerates active sets)")
    return cfg


def parse_config(text: str, overrides=None) -> RunConfig:
    """Parse and validate a flat ``key = value`` configuration document.

    Parameters
    ----------
    text : str
        Configuration text.  Section headers are not allowed.
    overrides : dict, optional
        ``key -> raw string`` applied after the file (used by ``sweep``).

    Raises
    ------
    ConfigError
        With the offending line and field for parse, type and range errors,
        unknown keys and missing required keys.
    """
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",), empty_lines_in_values=False)
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + text)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r}", field=exc.option, line=exc.lineno - 1) from None
    except configparser.MissingSectionHeaderError as exc:  # pragma: no cover - header is always supplied
        raise ConfigError(str(exc)) from None
    except configparser.ParsingError as exc:
        lineno, bad = exc.errors[0]
        raise ConfigError(f"cannot parse {bad.strip()!r}; expected 'key = value'", line=lineno - 1) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError("section headers are not allowed", line=(exc.lineno or 1) - 1) from None
    if parser.sections() != ["run"]:
        extra = [s for s in parser.sections() if s != "run"][0]
        raise ConfigError(f"section headers are not allowed ([{extra}])")
    lines = _key_lines(text)
    values = {}
    for key, raw in parser["run"].items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", field=key, line=lines.get(key))
        values[key] = _convert(key, raw, lines.get(key))
    for key, raw in (overrides or {}).items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", field=key)
        values[key] = _convert(key, str(raw))
    for key in REQUIRED:
        if key not in values:
            raise ConfigError(f"missing required key {key!r}", field=key)
    return _validate(RunConfig(**values), lines)


def load_config(path, overrides=None) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    return parse_config(text, overrides)


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


@dataclass
class Assembled:
    """A penalty problem plus what a run needs around it."""

    problem: object = None
    x0: np.ndarray = None
    grid: GridSpec = None
    field_shape: tuple = None
    reference: np.ndarray = None
    reference_label: str = ""
    instance: object = None
    matrices: dict = None


def _default_x0(cfg, n, default):
    return np.full(n, float(cfg.x0)) if cfg.x0 is not None else default


def assemble(cfg: RunConfig) -> Assembled:
    """Build the problem described by ``cfg``."""
    if cfg.problem == "scalar":
        prob = scalar_problem(cfg.g, cfg.beta)
        x0 = np.array([-1.2 if cfg.x0 is None else float(cfg.x0)])
        return Assembled(prob, x0, matrices={"A": prob.objective.A, "G": prob.constraints.G})
    if cfg.problem == "qp":
        if cfg.qp_kind == "convex":
            prob = random_convex_qp(cfg.seed, cfg.qp_n, cfg.qp_m, cfg.beta)
        elif cfg.qp_kind == "box":
            prob = random_box_qp(cfg.seed, cfg.qp_n, cfg.qp_m, cfg.beta)
        else:
            prob = duplicate_row_qp(cfg.qp_n, cfg.beta)
        obj, cons = prob.objective, prob.constraints
        ref = enumerate_qp(obj.A, obj.b, as_dense(cons.G), cons.g) if cfg.qp_kind != "duplicate" else None
        return Assembled(prob, _default_x0(cfg, prob.n, np.zeros(prob.n)),
                         reference=None if ref is None else ref.x, reference_label="qp_optimum",
                         instance=ref, matrices={"A": obj.A, "G": cons.G})
    grid = GridSpec(cfg.n)
    if cfg.problem == "obstacle":
        inst = assemble_obstacle(grid, cfg.C, cfg.bilateral)
        prob = inst.problem(cfg.beta)
        return Assembled(prob, _default_x0(cfg, prob.n, inst.initial_guess()), grid,
                         instance=inst, matrices={"H": inst.H, "G": prob.constraints.G})
    if cfg.problem == "inverse_source":
        noise = NoiseSpec(cfg.delta, cfg.noise_mode or "additive-uniform")
        inst = assemble_inverse_source(grid, cfg.eta, noise, seed=cfg.seed)
        prob = inst.problem(cfg.beta)
        return Assembled(prob, _default_x0(cfg, prob.n, np.zeros(prob.n)), grid, reference=inst.u_star,
                         reference_label="u_star", instance=inst, matrices={"K": inst.K, "G": prob.constraints.G})
    if cfg.problem == "inverse_medium":
        noise = NoiseSpec(cfg.delta, cfg.noise_mode or "relative-max")
        inst = assemble_inverse_medium(grid, cfg.eta, cfg.U, noise, seed=cfg.seed)
        prob = inst.problem(cfg.beta)
        return Assembled(prob, _default_x0(cfg, prob.n, np.zeros(prob.n)), grid, reference=inst.u_star,
                         reference_label="u_star", instance=inst, matrices={"K": inst.K, "G": prob.constraints.G})
    if cfg.problem == "denoise":
        kw = {"tv_weight": cfg.tv_weight} if cfg.denoise_method == "tv" else {"eta1": cfg.eta1, "eta2": cfg.eta2}
        inst = make_denoise_instance(cfg.n, cfg.delta if cfg.delta else 0.1, cfg.seed, **kw)
        return Assembled(None, inst.f.copy() if cfg.x0 is None else np.full(inst.f.size, float(cfg.x0)),
                         reference=inst.u_clean, reference_label="clean_image", instance=inst,
                         matrices={"Dx": inst.Dx, "Dy": inst.Dy, "H": inst.H})
    raise ConfigError(f"unknown problem {cfg.problem!r}", field="problem")  # pragma: no cover


def solver_config(cfg: RunConfig) -> SolverConfig:
    return SolverConfig(alpha=cfg.alpha, epsilon=cfg.epsilon, preconditioner=cfg.preconditioner, tol=cfg.tol,
                        max_iter=cfg.max_iter, implicit_quadratic=cfg.implicit_quadratic,
                        monotone_guard=cfg.monotone_guard)


def _solve(cfg: RunConfig, asm: Assembled):
    if cfg.problem == "denoise":
        return solve_denoise(asm.instance, cfg.epsilon, cfg.alpha, cfg.tol, cfg.max_iter, cfg.denoise_method,
                             u0=asm.x0)
    sc = solver_config(cfg)
    if cfg.solver == "algorithm1":
        return solve_algorithm1(asm.x0, asm.problem, sc)
    if cfg.solver == "algorithm2":
        return solve_algorithm2(asm.x0, asm.problem, sc)
    if cfg.solver == "newton":
        return solve_newton(asm.x0, asm.problem, sc,
                            line_search=LineSearchControl() if cfg.newton_line_search else None)
    return solve_pdas(asm.x0, None, asm.problem, gamma=cfg.gamma, reg=cfg.reg, max_iter=cfg.max_iter, tol=cfg.tol)


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def exit_code(report) -> int:
    if report.get("converged"):
        return EXIT_CONVERGED
    if report.get("reason") == "max_iter":
        return EXIT_MAX_ITER
    return EXIT_SOLVER_FAILURE


def _write_fields(cfg, asm, x, out: Path):
    files = {}
    grid_like = asm.grid is not None or cfg.problem == "denoise"
    if cfg.problem == "denoise":
        field = asm.instance.image(x)
    elif asm.grid is not None:
        field = asm.grid.to_grid(x)
    else:
        field = np.atleast_2d(x)
    if "grid" in cfg.export:
        io.write_grid_text(out / "solution.txt", field)
        files["grid"] = "solution.txt"
    if "mtx" in cfg.export:
        io.write_matrix_market(out / "solution.mtx", np.asarray(x, dtype=float).reshape(-1, 1))
        files["mtx"] = "solution.mtx"
    if "pgm" in cfg.export and grid_like:
        io.write_pgm(out / "solution.pgm", field)
        files["pgm"] = "solution.pgm"
    return files


def _metrics(cfg, asm, x):
    m = {}
    if asm.problem is not None:
        r = asm.problem.constraints.residual(x)
        viol = float(max(0.0, r.max(initial=0.0)))
        m["feasibility"] = {"max_violation": viol, "eps": cfg.epsilon,
                            "within_eps": bool(viol <= cfg.epsilon + 1e-12)}
        m["J_eps"] = j_eps_value(x, asm.problem, cfg.epsilon)
        m["J"] = j_value(x, asm.problem)
        m["F"] = float(asm.problem.objective.value(x))
    else:
        inst = asm.instance
        energy = tv_energy if cfg.denoise_method == "tv" else multiparam_energy
        m["J_eps"] = energy(x, inst, cfg.epsilon)
        m["feasibility"] = {"max_violation": 0.0, "eps": cfg.epsilon, "within_eps": True}
        m["psnr_noisy"] = psnr(inst.f, inst.u_clean)
        m["psnr"] = psnr(x, inst.u_clean)
    if asm.reference is not None:
        e = np.asarray(x) - asm.reference
        m["error"] = {"reference": asm.reference_label, "max_abs": float(np.max(np.abs(e))),
                      "l2": float(np.linalg.norm(e))}
        if asm.grid is not None:
            m["error"]["l2_scaled"] = float(np.linalg.norm(e) * asm.grid.h)
    if cfg.problem == "inverse_source":
        m["misfit"] = asm.instance.misfit(x)
        m["misfit_at_zero"] = asm.instance.misfit(np.zeros_like(x))
    return m


def run(cfg: RunConfig, out=None) -> dict:
    """Assemble, solve and write ``trace.csv``, ``report.json`` and fields.

    The report is written even if assembly or the solver fails; its
    ``exit_code`` entry is the process exit status.
    """
    out = Path(out or cfg.out or "penalty_forge_out")
    out.mkdir(parents=True, exist_ok=True)
    report = {"config": cfg.echo(), "converged": False, "reason": "solver_failure", "message": "",
              "files": {}}
    t0 = time.perf_counter()
    sol = None
    try:
        asm = assemble(cfg)
        sol = _solve(cfg, asm)
        report.update(sol.summary())
        report["wall_time"] = time.perf_counter() - t0
        report.update(_metrics(cfg, asm, sol.x))
        if sol.multiplier is not None:
            report["multiplier_inf"] = float(np.max(np.abs(sol.multiplier), initial=0.0))
        report["files"].update(_write_fields(cfg, asm, sol.x, out))
    except Exception as exc:  # noqa: BLE001 - every failure ends up in the report
        logger.exception("run failed")
        report["reason"] = "solver_failure"
        report["converged"] = False
        report["message"] = f"{type(exc).__name__}: {exc}"
        block = getattr(exc, "block", None)
        if block:
            report["singular_block"] = block
    report.setdefault("wall_time", time.perf_counter() - t0)
    if sol is not None:
        io.write_trace_csv(sol.trace, out / "trace.csv")
        report["files"]["trace"] = "trace.csv"
    report["exit_code"] = exit_code(report)
    io.write_json(report, out / "report.json")
    return report


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

SUMMARY_COLUMNS = ("value", "converged", "reason", "iterations", "J_eps", "grad_inf", "max_violation",
                   "error_max_abs", "exit_code")


def _sweep_member(args):
    cfg, out = args
    with _thread_limit():
        return run(cfg, out)


def sweep(cfg: RunConfig, param: str, values, out=None, parallel=1):
    """Independent runs with ``param`` set to each of ``values``.

    Each run writes into ``<out>/<param>=<value>/``; a ``summary.csv`` with
    one row per value is written into ``out``.
    """
    if param not in NUMERIC_FIELDS:
        raise ConfigError(f"sweep parameter must be a numeric field, got {param!r}", field=param)
    out = Path(out or cfg.out or "penalty_forge_out")
    members = []
    for raw in values:
        value = _convert(param, str(raw))
        member = _validate(replace(cfg, **{param: value}))
        members.append((member, out / f"{param}={str(raw).strip()}"))
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as ex:
            reports = list(ex.map(_sweep_member, members))
    else:
        reports = [run(c, o) for c, o in members]
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow((param,) + SUMMARY_COLUMNS[1:])
        for raw, rep in zip(values, reports):
            err = rep.get("error", {}).get("max_abs", float("nan"))
            w.writerow([str(raw).strip(), rep["converged"], rep["reason"], rep.get("iterations", 0),
                        io.format_float(rep.get("J_eps", float("nan"))),
                        io.format_float(rep.get("grad_inf", float("nan"))),
                        io.format_float(rep.get("feasibility", {}).get("max_violation", float("nan"))),
                        io.format_float(err), rep["exit_code"]])
    return reports


# ---------------------------------------------------------------------------
# export and self-test
# ---------------------------------------------------------------------------


def export(cfg: RunConfig, out=None):
    """Write the assembled problem data (matrices, data vectors, ground truth) without solving."""
    out = Path(out or cfg.out or "penalty_forge_out")
    out.mkdir(parents=True, exist_ok=True)
    asm = assemble(cfg)
    written = []
    for name, M in (asm.matrices or {}).items():
        io.write_matrix_market(out / f"{name}.mtx", M if sp.issparse(M) else np.asarray(M))
        written.append(f"{name}.mtx")
    vectors = {"x0": asm.x0}
    if asm.problem is not None:
        vectors["g"] = asm.problem.constraints.g
        if asm.problem.is_quadratic:
            vectors["b"] = asm.problem.objective.b
    inst = asm.instance
    for attr in ("y_delta", "F", "f"):
        if inst is not None and hasattr(inst, attr):
            vectors[attr] = getattr(inst, attr)
    if asm.reference is not None:
        vectors[asm.reference_label] = asm.reference
    for name, v in vectors.items():
        io.write_matrix_market(out / f"{name}.mtx", np.asarray(v, dtype=float).reshape(-1, 1))
        written.append(f"{name}.mtx")
    io.write_json({"config": cfg.echo(), "files": written}, out / "export.json")
    return written


SELFTEST_CONFIG = """\
problem = scalar
solver = algorithm1
g = -1
beta = 2
eps = 0.1
x0 = -1.2
tol = 1e-12
"""


def selftest(out=None):
    """Run the scalar benchmark and check the exact limit ``-20/21`` at iteration 5."""
    cfg = parse_config(SELFTEST_CONFIG)
    x = np.array([-1.2])
    prob = scalar_problem(-1.0, 2.0)
    rep = solve_algorithm1(x, prob, solver_config(cfg), keep_iterates=True)
    expected = [-1.2, 0.0, -2 / 3, -6 / 7, -14 / 15, -20 / 21]
    got = [float(v[0]) for v in rep.iterates[:6]]
    ok = len(got) == 6 and all(abs(a - b) <= 1e-12 for a, b in zip(got, expected)) and rep.converged
    ok = ok and rep.iterations == 5
    lines = [f"iterate {k}: {a:.17g} (expected {b:.17g})" for k, (a, b) in enumerate(zip(got, expected))]
    lines.append(f"converged={rep.converged} iterations={rep.iterations}")
    lines.append("selftest PASS" if ok else "selftest FAIL")
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        io.write_trace_csv(rep.trace, Path(out) / "trace.csv")
    return ok, lines


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


class _thread_limit:
    """Cap BLAS/OpenMP pools at ``PENALTY_FORGE_THREADS`` if it is set."""

    def __enter__(self):
        from threadpoolctl import threadpool_limits

        raw = os.environ.get(THREADS_ENV, "").strip()
        self._ctx = None
        if raw:
            try:
                n = int(raw)
            except ValueError:
                raise ConfigError(f"{THREADS_ENV} must be a positive integer (got {raw!r})") from None
            if n < 1:
                raise ConfigError(f"{THREADS_ENV} must be a positive integer (got {raw!r})")
            self._ctx = threadpool_limits(limits=n)
        return self

    def __exit__(self, *exc):
        if self._ctx is not None:
            self._ctx.unregister()
        return False


def build_parser():
    p = argparse.ArgumentParser(prog="penalty-forge", description="Exact penalty solvers: batch runs and sweeps.")
    sub = p.add_subparsers(dest="verb", required=True)
    r = sub.add_parser("run", help="solve one configuration")
    r.add_argument("--config", required=True, metavar="PATH")
    r.add_argument("--out", metavar="DIR")
    s = sub.add_parser("sweep", help="solve a configuration for several values of one parameter")
    s.add_argument("--config", required=True, metavar="PATH")
    s.add_argument("--out", metavar="DIR")
    s.add_argument("--param", required=True, metavar="NAME")
    s.add_argument("--values", required=True, metavar="CSV-LIST")
    s.add_argument("--parallel", type=int, default=1, metavar="N")
    t = sub.add_parser("selftest", help="check the scalar benchmark iteration")
    t.add_argument("--out", metavar="DIR")
    e = sub.add_parser("export", help="write the assembled problem data")
    e.add_argument("--config", required=True, metavar="PATH")
    e.add_argument("--out", metavar="DIR")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with _thread_limit():
            if args.verb == "selftest":
                ok, lines = selftest(args.out)
                print("\n".join(lines))
                return EXIT_CONVERGED if ok else EXIT_SOLVER_FAILURE
            cfg = load_config(args.config)
            if args.verb == "run":
                rep = run(cfg, args.out)
                print(f"{cfg.problem}/{cfg.solver}: {rep['reason']} after {rep.get('iterations', 0)} iterations, "
                      f"grad_inf={rep.get('grad_inf', float('nan')):.3e}")
                if rep["message"]:
                    print(rep["message"], file=sys.stderr)
                return rep["exit_code"]
            if args.verb == "sweep":
                if args.parallel < 1:
                    raise ConfigError("--parallel must be at least 1")
                values = [v for v in args.values.split(",") if v.strip()]
                if not values:
                    raise ConfigError("--values is empty")
                reports = sweep(cfg, args.param, values, args.out, args.parallel)
                for v, rep in zip(values, reports):
                    print(f"{args.param}={v.strip()}: {rep['reason']} after {rep.get('iterations', 0)} iterations")
                return EXIT_CONVERGED
            written = export(cfg, args.out)
            print("\n".join(written))
            return EXIT_CONVERGED
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
