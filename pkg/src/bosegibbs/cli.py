"""Command-line front end.

Configuration and reports are JSON; per-ε tables are CSV. Complex numbers
are always written as ``[re, im]`` pairs. Exit status: 0 when every check
passes, 1 on failure, 2 when a check is inconclusive, 3 for invalid input.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .classical import WORKERS_ENV, Budget, coefficient_integrals
from .harness import (
    DEFAULT_GRID,
    FAIL,
    INCONCLUSIVE,
    PASS,
    ExperimentSpec,
    kms_check,
    run_expansion_study,
    run_gibbs_state_expansion,
    run_rdm_study,
)
from .lattice import Graph
from .spectral import quantum_bundle

log = logging.getLogger("bosegibbs")

SCHEMA_VERSION = 1
COMMANDS = (
    "spectrum",
    "coeffs",
    "integrals",
    "verify-theorem1",
    "verify-remark1",
    "verify-remark2",
    "kms-check",
    "selftest",
)
EXIT = {PASS: 0, FAIL: 1, INCONCLUSIVE: 2}
EXIT_USAGE = 3


class ConfigError(ValueError):
    """Invalid configuration; the message names the field and the constraint."""


@dataclass
class RunConfig:
    command: str = "verify-theorem1"
    vertex_count: int = 1
    edges: tuple = ()
    kappa: float = -1.0
    lam: float = 1.0
    beta: float = 1.0
    f: tuple = (1.0 + 0j,)
    u: tuple | None = None
    epsilon_grid: tuple = DEFAULT_GRID
    order: int = 1
    method: str = "quadrature"
    budget: Budget = field(default_factory=Budget)
    seed: int = 0
    quantum_tol: float = 1e-13
    cutoff_ceiling: int | None = None
    min_fit_points: int = 5
    rdm_x: int = 0
    rdm_y: int = 0
    kms_instances: int = 50
    kms_max_dim: int = 50
    out_dir: str = "bosegibbs-out"
    verbosity: int = 0

    @property
    def graph(self) -> Graph:
        return Graph.from_edges(self.vertex_count, self.edges)

    def spec(self) -> ExperimentSpec:
        return ExperimentSpec(
            graph=self.graph,
            kappa=self.kappa,
            lam=self.lam,
            beta=self.beta,
            f=np.array(self.f),
            epsilon_grid=self.epsilon_grid,
            order=self.order,
            method=self.method,
            budget=self.budget,
            seed=self.seed,
            quantum_tol=self.quantum_tol,
            cutoff_ceiling=self.cutoff_ceiling,
            min_fit_points=self.min_fit_points,
        )


def _pairs(z) -> list:
    return [[float(np.real(c)), float(np.imag(c))] for c in z]


def _complex_vector(raw, name: str, length: int) -> tuple:
    if not isinstance(raw, list) or not all(isinstance(p, list) and len(p) == 2 for p in raw):
        raise ConfigError(f"{name}: expected a list of [re, im] pairs, got {raw!r}")
    if len(raw) != length:
        raise ConfigError(f"{name}: has {len(raw)} entries but the graph has {length} vertices")
    try:
        out = tuple(complex(float(re), float(im)) for re, im in raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: entries must be numbers ({exc})") from exc
    if not all(math.isfinite(c.real) and math.isfinite(c.imag) for c in out):
        raise ConfigError(f"{name}: entries must be finite")
    return out


def emit_config(cfg: RunConfig) -> dict:
    """JSON-ready dictionary; ``parse_config_dict(emit_config(c)) == c``."""
    return {
        "schema_version": SCHEMA_VERSION,
        "command": cfg.command,
        "graph": {"vertex_count": cfg.vertex_count, "edges": [list(e) for e in cfg.edges]},
        "kappa": cfg.kappa,
        "lambda": cfg.lam,
        "beta": cfg.beta,
        "f": _pairs(cfg.f),
        "u": None if cfg.u is None else _pairs(cfg.u),
        "epsilon_grid": list(cfg.epsilon_grid),
        "order": cfg.order,
        "method": cfg.method,
        "budget": cfg.budget.to_dict(),
        "seed": cfg.seed,
        "quantum_tol": cfg.quantum_tol,
        "cutoff_ceiling": cfg.cutoff_ceiling,
        "min_fit_points": cfg.min_fit_points,
        "rdm": {"x": cfg.rdm_x, "y": cfg.rdm_y},
        "kms": {"instances": cfg.kms_instances, "max_dim": cfg.kms_max_dim},
        "output": {"dir": cfg.out_dir},
        "verbosity": cfg.verbosity,
    }


_TOP_KEYS = {
    "schema_version", "command", "graph", "kappa", "lambda", "beta", "f", "u", "epsilon_grid", "order",
    "method", "budget", "seed", "quantum_tol", "cutoff_ceiling", "min_fit_points", "rdm", "kms", "output",
    "verbosity",
}


def _number(d: dict, key: str, default, kind=float):
    v = d.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {v!r}")
    if kind is int and int(v) != v:
        raise ConfigError(f"{key}: expected an integer, got {v!r}")
    return kind(v)


def _grid(raw) -> tuple:
    if isinstance(raw, dict):
        try:
            start, stop, n = float(raw["start"]), float(raw["stop"]), int(raw["points"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError("epsilon_grid: a geometric grid needs numeric start, stop and points") from exc
        if start <= 0 or stop <= 0 or n < 1:
            raise ConfigError("epsilon_grid: start and stop must be > 0 and points >= 1")
        raw = list(np.geomspace(start, stop, n))
    if not isinstance(raw, list) or not raw:
        raise ConfigError("epsilon_grid: must be a non-empty list of positive numbers")
    try:
        return tuple(float(e) for e in raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"epsilon_grid: entries must be numbers ({exc})") from exc


def parse_config_dict(d: dict) -> RunConfig:
    """Validate a configuration dictionary and apply defaults."""
    if not isinstance(d, dict):
        raise ConfigError("configuration must be a JSON object")
    version = d.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: file has {version!r}, this program reads {SCHEMA_VERSION}")
    unknown = set(d) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    cfg = RunConfig()
    command = d.get("command", cfg.command)
    if command not in COMMANDS:
        raise ConfigError(f"command: must be one of {', '.join(COMMANDS)}; got {command!r}")
    cfg.command = command

    graph = d.get("graph", {"vertex_count": 1, "edges": []})
    if not isinstance(graph, dict):
        raise ConfigError("graph: expected an object with vertex_count and edges")
    try:
        g = Graph.from_edges(graph.get("vertex_count", 1), graph.get("edges", []))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"graph: {exc}") from exc
    cfg.vertex_count, cfg.edges = g.vertex_count, g.edges

    cfg.kappa = _number(d, "kappa", cfg.kappa)
    if not cfg.kappa < 0:
        raise ConfigError(f"kappa: must be < 0 so that exp(-beta H) is trace class; got {cfg.kappa}")
    cfg.lam = _number(d, "lambda", cfg.lam)
    if cfg.lam < 0:
        raise ConfigError(f"lambda: must be >= 0; got {cfg.lam}")
    cfg.beta = _number(d, "beta", cfg.beta)
    if not cfg.beta > 0:
        raise ConfigError(f"beta: must be > 0; got {cfg.beta}")

    V = g.vertex_count
    cfg.f = _complex_vector(d["f"], "f", V) if "f" in d else tuple([1.0 + 0j] + [0j] * (V - 1))
    cfg.u = None if d.get("u") is None else _complex_vector(d["u"], "u", V)

    cfg.epsilon_grid = _grid(d.get("epsilon_grid", list(DEFAULT_GRID)))
    cfg.order = _number(d, "order", cfg.order, int)
    if cfg.order < 0:
        raise ConfigError(f"order: must be >= 0; got {cfg.order}")
    cfg.method = d.get("method", cfg.method)
    if cfg.method not in ("quadrature", "importance"):
        raise ConfigError(f"method: must be 'quadrature' or 'importance'; got {cfg.method!r}")
    budget = d.get("budget") or {}
    try:
        cfg.budget = Budget(**budget) if budget else (Budget(radial=24, angular=16) if cfg.method == "quadrature" and V == 2 else Budget())
    except TypeError as exc:
        raise ConfigError(f"budget: {exc}") from exc
    cfg.seed = _number(d, "seed", cfg.seed, int)
    if cfg.seed < 0:
        raise ConfigError(f"seed: must be a non-negative integer; got {cfg.seed}")
    cfg.quantum_tol = _number(d, "quantum_tol", cfg.quantum_tol)
    cfg.cutoff_ceiling = _number(d, "cutoff_ceiling", None, int)
    cfg.min_fit_points = _number(d, "min_fit_points", cfg.min_fit_points, int)
    rdm = d.get("rdm") or {}
    cfg.rdm_x, cfg.rdm_y = int(rdm.get("x", 0)), int(rdm.get("y", 0))
    kms = d.get("kms") or {}
    cfg.kms_instances, cfg.kms_max_dim = int(kms.get("instances", 50)), int(kms.get("max_dim", 50))
    cfg.out_dir = str((d.get("output") or {}).get("dir", cfg.out_dir))
    cfg.verbosity = _number(d, "verbosity", 0, int)
    if cfg.command in ("verify-theorem1", "verify-remark1", "verify-remark2", "spectrum"):
        try:
            cfg.spec()
        except ValueError as exc:
            raise ConfigError(f"epsilon_grid/spec: {exc}") from exc
    return cfg


def parse_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Read a JSON file (or start from defaults) and apply flag overrides."""
    d: dict = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            d = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    d = dict(d)
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if k == "out":
            d["output"] = {"dir": v}
        else:
            d[k] = v
    return parse_config_dict(d)


def load_report(path: str) -> dict:
    """Read a report file, refusing other schema versions."""
    data = json.loads(Path(path).read_text())
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"report schema_version {version!r} does not match {SCHEMA_VERSION}")
    return data


# commands


def _cmd_spectrum(cfg: RunConfig):
    spec = cfg.spec()
    rows, result = [], []
    for eps in spec.epsilon_grid:
        b = quantum_bundle(spec.graph, spec.params(eps), spec.f, tol=spec.quantum_tol, ceiling=spec.cutoff_ceiling)
        w, z = b["weyl"], b["partition"]
        result.append({"epsilon": eps, "weyl": w.to_dict(), "partition": z.to_dict()})
        rows.append([eps, w.value.real, w.value.imag, z.value.real, z.value.imag, w.cutoff_used, w.error])
    header = ["epsilon", "weyl_re", "weyl_im", "partition_re", "partition_im", "cutoff", "error"]
    return PASS, {"traces": result}, header, rows


def _cmd_coeffs(cfg: RunConfig):
    """Series coefficients beside the closed forms.

    ``reference`` is the term-by-term closed form, ``rederived`` the one with
    the corrected order-β group of ``C_2``; the status follows ``rederived``.
    """
    from .wick import closed_form_C1, closed_form_C2, closed_form_C2_rederived, coefficient_series

    g = cfg.graph
    u = np.array(cfg.u if cfg.u is not None else [1.0 + 0j] * g.vertex_count)
    f = np.array(cfg.f)
    args = (cfg.beta, cfg.kappa, cfg.lam, g)
    top = 2 * max(cfg.order, 2)
    series = coefficient_series(top, u, f, g, cfg.beta, cfg.kappa, cfg.lam)
    c1 = closed_form_C1(u, f, *args)
    reference = {2: c1, 4: closed_form_C2(u, f, *args)}
    rederived = {2: c1, 4: closed_form_C2_rederived(u, f, *args)}

    def known(table, j2):
        return table.get(j2, 1.0 if j2 == 0 else (0.0 if j2 % 2 else None))

    rows, table, status = [], [], PASS
    for j2, v in series.items():
        entry = {"j2": j2, "value": [v.real, v.imag]}
        row = [j2, v.real, v.imag]
        for name, forms in (("reference", reference), ("rederived", rederived)):
            c = known(forms, j2)
            delta = None if c is None else float(abs(v - c))
            entry[name] = None if c is None else [complex(c).real, complex(c).imag]
            entry[f"{name}_delta"] = delta
            row += ["" if c is None else complex(c).real, "" if c is None else complex(c).imag, "" if delta is None else delta]
            if name == "rederived" and delta is not None and delta > 1e-10 * max(abs(c), 1.0):
                status = FAIL
        table.append(entry)
        rows.append(row)
    header = ["j2", "value_re", "value_im", "reference_re", "reference_im", "reference_delta", "rederived_re", "rederived_im", "rederived_delta"]
    return status, {"u": _pairs(u), "coefficients": table}, header, rows


def _cmd_integrals(cfg: RunConfig):
    spec = cfg.spec()
    j2s = [2 * j for j in range(cfg.order + 1)]
    ints = coefficient_integrals(j2s, spec.f, spec.graph, spec.beta, spec.kappa, spec.lam, spec.method, spec.budget, spec.seed)
    rows = [[j2, e.value.real, e.value.imag, e.error, e.n_samples or e.n_nodes] for j2, e in ints.items()]
    status = PASS if all(e.target_met for e in ints.values()) else INCONCLUSIVE
    return status, {"integrals": {str(k): v.to_dict() for k, v in ints.items()}}, ["j2", "value_re", "value_im", "error", "points"], rows


def _study_table(report):
    n_orders = len(report.records[0]["residuals"])
    header = ["epsilon", "quantum_re", "quantum_im", "quantum_error"]
    for N in range(n_orders):
        header += [f"S{N}_re", f"S{N}_im"]
    for N in range(n_orders):
        header += [f"R{N}_re", f"R{N}_im", f"err{N}"]
    rows = []
    for r in report.records:
        row = [r["epsilon"], r["quantum"].real, r["quantum"].imag, r["quantum_error"]]
        for s in r["partial_sums"]:
            row += [s.real, s.imag]
        for res, e in zip(r["residuals"], r["errors"]):
            row += [res.real, res.imag, e]
        rows.append(row)
    return header, rows


def _cmd_study(runner):
    def run(cfg: RunConfig):
        spec = cfg.spec()
        report = runner(spec) if runner is not run_rdm_study else runner(spec, cfg.rdm_x, cfg.rdm_y)
        header, rows = _study_table(report)
        return report.status, report.to_dict(), header, rows

    return run


def _cmd_kms(cfg: RunConfig):
    res = kms_check(cfg.kms_instances, cfg.kms_max_dim, cfg.seed)
    worst = max(r["defect"] for r in res)
    status = PASS if worst <= 1e-8 else FAIL
    rows = [[r["instance"], r["vertices"], r["dimension"], r["beta"], r["defect"]] for r in res]
    return status, {"instances": res, "max_defect": worst}, ["instance", "vertices", "dimension", "beta", "defect"], rows


def selftest(seed: int = 0) -> list[dict]:
    """Golden checks that run in seconds."""
    from .wick import SectorOracle, build_interaction_operators, closed_form_C1, closed_form_C2, closed_form_C2_rederived
    from .wick import coefficient_series, field_moment, gaussian_moment, wick_pairing

    rng = np.random.default_rng(seed)
    graphs = [Graph(1), Graph.path(2), Graph.complete(3)]
    checks = []

    worst = offset = 0.0
    for i in range(12):
        g = graphs[i % 3]
        V = g.vertex_count
        u = rng.normal(size=V) + 1j * rng.normal(size=V)
        f = rng.normal(size=V) + 1j * rng.normal(size=V)
        b, k, l = rng.uniform(0.2, 2), -rng.uniform(0.2, 2), rng.uniform(0.1, 2)
        s = coefficient_series(4, u, f, g, b, k, l)
        c2 = closed_form_C2_rederived(u, f, b, k, l, g)
        worst = max(worst, abs(s[2] - closed_form_C1(u, f, b, k, l, g)) / abs(s[2]), abs(s[4] - c2) / abs(s[4]))
        # the reference form misses exactly (βλ/8)<u², f²>
        gap = s[4] - closed_form_C2(u, f, b, k, l, g)
        offset = max(offset, abs(gap - b * l / 8 * np.vdot(u * u, f * f)) / abs(s[4]))
    checks.append({"name": "closed forms C1, C2", "value": float(worst), "tolerance": 1e-10})
    checks.append({"name": "C2 reference offset", "value": float(offset), "tolerance": 1e-10})

    worst = 0.0
    for k in range(1, 7):
        f = rng.normal(size=2) + 1j * rng.normal(size=2)
        exact = gaussian_moment(f, k)
        worst = max(worst, abs(field_moment(f, 2 * k) - exact) / abs(exact))
    checks.append({"name": "Gaussian moments", "value": worst, "tolerance": 1e-10})

    worst = 0.0
    for g in graphs[:2]:
        V = g.vertex_count
        u = rng.normal(size=V) + 1j * rng.normal(size=V)
        f = rng.normal(size=V) + 1j * rng.normal(size=V)
        ops = build_interaction_operators(u, g, -1.0, 0.8)
        oracle = SectorOracle(u, f, g, -1.0, 0.8, 2 * 3 + 4)
        for m in range(1, 4):
            for ell in range(m, min(4 * m - 2, 6) + 1):
                for p in range(5):
                    o = oracle.pairing(m, ell, p)
                    w = wick_pairing(m, ell, p, ops, f)
                    if abs(o) > 1e-300:
                        worst = max(worst, abs(w - o) / abs(o))
    checks.append({"name": "Wick vs sector pairings", "value": worst, "tolerance": 1e-10})

    defects = kms_check(10, 30, seed)
    checks.append({"name": "KMS defect", "value": max(d["defect"] for d in defects), "tolerance": 1e-8})
    for c in checks:
        c["status"] = PASS if c["value"] <= c["tolerance"] else FAIL
    return checks


def _cmd_selftest(cfg: RunConfig):
    checks = selftest(cfg.seed)
    status = PASS if all(c["status"] == PASS for c in checks) else FAIL
    rows = [[c["name"], c["value"], c["tolerance"], c["status"]] for c in checks]
    return status, {"checks": checks}, ["check", "value", "tolerance", "status"], rows


HANDLERS = {
    "spectrum": _cmd_spectrum,
    "coeffs": _cmd_coeffs,
    "integrals": _cmd_integrals,
    "verify-theorem1": _cmd_study(run_expansion_study),
    "verify-remark1": _cmd_study(run_gibbs_state_expansion),
    "verify-remark2": _cmd_study(run_rdm_study),
    "kms-check": _cmd_kms,
    "selftest": _cmd_selftest,
}


def _cell(x):
    if isinstance(x, np.generic):
        x = x.item()
    return repr(float(x)) if isinstance(x, float) else x


def write_table(path: Path, header: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(x) for x in r])


def execute(cfg: RunConfig) -> int:
    """Run the configured command, write ``report.json`` and ``table.csv``."""
    start = time.time()
    status, result, header, rows = HANDLERS[cfg.command](cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": cfg.command,
        "status": status,
        "config": emit_config(cfg),
        "result": result,
        "provenance": {"package_version": __version__, "kernel_backend": kernels.BACKEND, "seed": cfg.seed},
        "elapsed_seconds": time.time() - start,
    }
    (out / "report.json").write_text(json.dumps(report, indent=2, default=_json_default))
    write_table(out / "table.csv", header, rows)
    log.info("%s: %s (report in %s)", cfg.command, status, out)
    return EXIT[status]


def _json_default(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="bosegibbs",
        description="Verify the high-temperature expansion of Bose-Hubbard Gibbs states.",
        epilog=f"Worker threads: set {WORKERS_ENV}. Exit status 0 pass, 1 fail, 2 inconclusive, 3 invalid input.",
    )
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--command", choices=COMMANDS, help="command to run (overrides the file)")
    p.add_argument("--seed", type=int, help="master seed for sampling")
    p.add_argument("--out", help="output directory for report.json and table.csv")
    p.add_argument("--epsilon", type=float, nargs="+", help="epsilon grid, decreasing")
    p.add_argument("--order", type=int, help="expansion order N")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    overrides = {
        "command": args.command,
        "seed": args.seed,
        "out": args.out,
        "epsilon_grid": args.epsilon,
        "order": args.order,
    }
    try:
        cfg = parse_config(args.config, overrides)
    except ConfigError as exc:
        print(f"bosegibbs: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return execute(cfg)
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"bosegibbs: {cfg.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT[FAIL]


if __name__ == "__main__":
    sys.exit(main())
