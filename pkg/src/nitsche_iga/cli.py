"""Command-line harness: solve / convergence / calibrate.

Run files are flat ``key = value`` text with ``#`` comments.  Exactly one
of ``epsilon`` / ``epsilon_factor`` and exactly one of ``tau_rule`` /
``num_steps`` may be set.  Exit codes: 0 success, 2 configuration error,
3 numerical failure.

The environment variable NITSCHE_SEED is reserved for future use; the
pipeline is deterministic and identical configurations produce identical
output files byte for byte (single-threaded mode).
"""

import argparse
import csv
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis
from .assembly import AssembledForms, Discretization, penalty_floor, trace_constant
from .errors import ConfigError, InsufficientLevels, NitscheIgaError
from .geometry import build_mesh, load_geometry, uniform_space
from .problem import builtin_case
from .timestepping import TimeGrid, march, project_initial

SNAPSHOT_GRID = 64
CALIBRATE_FACTORS = (0.5, 1.0, 1.25, 2.0)
CALIBRATE_DOF_LIMIT = 400

_KNOWN_KEYS = {
    "case",
    "geometry",
    "degree",
    "levels",
    "epsilon",
    "epsilon_factor",
    "tau_rule",
    "num_steps",
    "quadrature_order",
    "solver_tol",
    "solver_maxit",
    "snapshot_times",
    "freeze_operator",
    "threads",
    "out",
}


@dataclass
class RunConfig:
    case: str
    geometry: str
    degree: int
    levels: list
    epsilon: float = None
    epsilon_factor: float = None
    tau_rule: tuple = None  # (coefficient, exponent)
    num_steps: int = None
    quadrature_order: int = None
    solver_tol: float = 1e-12
    solver_maxit: int = None
    snapshot_times: list = field(default_factory=list)
    freeze_operator: bool = False
    threads: int = 1
    out: str = "out"

    def tau_of_h(self, h):
        if self.num_steps is not None:
            raise ConfigError("tau_of_h called but num_steps is set")
        coef, power = self.tau_rule
        return coef * h**power

    def steps_for_level(self, spans, T):
        if self.num_steps is not None:
            return self.num_steps
        return analysis.steps_for(self.tau_of_h(1.0 / spans), T)


def parse_config_file(path):
    """Read the flat key = value format; unknown keys are config errors."""
    raw = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {body!r}")
        key, _, val = body.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key '{key}'")
        if key in raw:
            raise ConfigError(f"{path}:{lineno}: duplicate key '{key}'")
        raw[key] = val
    return raw


def parse_tau_rule(text):
    """Parse 'h^p' or 'C*h^p' (for example '0.25*h^1')."""
    m = re.fullmatch(r"(?:([0-9.eE+-]+)\s*\*\s*)?h(?:\^([0-9.]+))?", text.strip())
    if not m:
        raise ConfigError(f"tau_rule must look like 'C*h^p', got {text!r}")
    coef = float(m.group(1)) if m.group(1) else 1.0
    power = float(m.group(2)) if m.group(2) else 1.0
    return coef, power


def _require(raw, key):
    if key not in raw:
        raise ConfigError(f"missing config key '{key}'")
    return raw[key]


def _bool(text):
    if text.lower() in ("true", "1", "yes", "on"):
        return True
    if text.lower() in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def build_run_config(raw, overrides=None):
    """Validate raw key/value pairs (plus CLI overrides) into a RunConfig."""
    raw = dict(raw)
    for key, val in (overrides or {}).items():
        if val is not None:
            raw[key] = str(val)

    if "epsilon" in raw and "epsilon_factor" in raw:
        raise ConfigError("set exactly one of 'epsilon' / 'epsilon_factor', not both")
    if "tau_rule" in raw and "num_steps" in raw:
        raise ConfigError("set exactly one of 'tau_rule' / 'num_steps', not both")
    if "tau_rule" not in raw and "num_steps" not in raw:
        raise ConfigError("missing config key 'tau_rule' (or 'num_steps')")

    levels = [int(t) for t in _require(raw, "levels").replace(",", " ").split()]
    if not levels or any(b <= a for a, b in zip(levels, levels[1:])):
        raise ConfigError("'levels' must be a strictly increasing list of span counts")

    cfg = RunConfig(
        case=_require(raw, "case"),
        geometry=raw.get("geometry", "square"),
        degree=int(_require(raw, "degree")),
        levels=levels,
        epsilon=float(raw["epsilon"]) if "epsilon" in raw else None,
        epsilon_factor=float(raw["epsilon_factor"]) if "epsilon_factor" in raw else None,
        tau_rule=parse_tau_rule(raw["tau_rule"]) if "tau_rule" in raw else None,
        num_steps=int(raw["num_steps"]) if "num_steps" in raw else None,
        quadrature_order=int(raw["quadrature_order"]) if "quadrature_order" in raw else None,
        solver_tol=float(raw.get("solver_tol", "1e-12")),
        solver_maxit=int(raw["solver_maxit"]) if "solver_maxit" in raw else None,
        snapshot_times=[float(t) for t in raw.get("snapshot_times", "").replace(",", " ").split()],
        freeze_operator=_bool(raw.get("freeze_operator", "false")),
        threads=int(raw.get("threads", "1")),
        out=raw.get("out", "out"),
    )
    if cfg.epsilon is None and cfg.epsilon_factor is None:
        cfg.epsilon_factor = 1.25
    if cfg.degree < 1:
        raise ConfigError("'degree' must be a positive integer")
    return cfg


def _setup_level(cfg, case, gm, spans):
    space = uniform_space(cfg.degree, spans)
    mesh = build_mesh(gm, space)
    disc = Discretization(space, mesh, qvol=cfg.quadrature_order, qedge=cfg.quadrature_order)
    forms = AssembledForms(
        disc, case.problem, epsilon=cfg.epsilon, epsilon_factor=cfg.epsilon_factor
    )
    return disc, forms


def _write_manifest(cfg, path, extra):
    lines = [
        f"case = {cfg.case}",
        f"geometry = {cfg.geometry}",
        f"degree = {cfg.degree}",
        f"levels = {' '.join(str(s) for s in cfg.levels)}",
        f"epsilon_config = {cfg.epsilon if cfg.epsilon is not None else ''}",
        f"epsilon_factor = {cfg.epsilon_factor if cfg.epsilon_factor is not None else ''}",
        f"tau_rule = {cfg.tau_rule if cfg.tau_rule else ''}",
        f"num_steps = {cfg.num_steps if cfg.num_steps is not None else ''}",
        f"quadrature_order = {cfg.quadrature_order if cfg.quadrature_order else 'default'}",
        f"solver_tol = {cfg.solver_tol:g}",
        f"freeze_operator = {cfg.freeze_operator}",
        f"threads = {cfg.threads}",
    ]
    lines += [f"{k} = {v}" for k, v in extra.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_solve(cfg):
    """March one level and write solution snapshots plus the run manifest."""
    if len(cfg.levels) != 1:
        raise ConfigError("'levels' must contain exactly one entry for solve")
    case = builtin_case(cfg.case)
    gm = load_geometry(cfg.geometry)
    spans = cfg.levels[0]
    disc, forms = _setup_level(cfg, case, gm, spans)

    T = case.problem.T
    n_steps = cfg.steps_for_level(spans, T)
    grid = TimeGrid(n_steps, T)
    u0 = project_initial(disc, case.problem.u0)
    traj = march(
        forms, grid, u0, freeze_operator=cfg.freeze_operator, solver_tol=cfg.solver_tol
    )

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    times = cfg.snapshot_times or [T]
    written = []
    for t_req in times:
        idx = int(np.argmin(np.abs(grid.nodes - t_req)))
        t_snap = grid.nodes[idx]
        x, y, vals = analysis.sample_on_grid(disc, traj.coefs[idx], SNAPSHOT_GRID)
        fname = out / f"solution_t{t_snap:g}.csv"
        with open(fname, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "value"])
            for row in zip(x, y, vals):
                writer.writerow([f"{v:.12e}" for v in row])
        written.append(fname.name)

    _write_manifest(
        cfg,
        out / "manifest.txt",
        {
            "spans": spans,
            "dof": disc.dimension,
            "tau": f"{grid.tau:.10g}",
            "penalty_floor": f"{forms.floor:.10g}",
            "eps_used": f"{forms.eps:.10g}",
            "snapshots": " ".join(written),
        },
    )
    print(f"solve: {spans} spans, dof={disc.dimension}, eps={forms.eps:.6g} "
          f"(floor {forms.floor:.6g}), wrote {len(written)} snapshot(s) to {out}")
    return 0


def cmd_convergence(cfg):
    """Run all levels, write the rate table and the log-log data file."""
    if len(cfg.levels) < 2:
        raise InsufficientLevels("a convergence study needs at least two levels")
    if cfg.tau_rule is None and cfg.num_steps is None:
        raise ConfigError("missing config key 'tau_rule' (or 'num_steps')")
    case = builtin_case(cfg.case)
    gm = load_geometry(cfg.geometry)

    if cfg.num_steps is not None:
        tau_of_h = None

        def run_one(spans):
            rec, _, _ = analysis.run_level(
                case, gm, cfg.degree, spans, cfg.num_steps,
                epsilon=cfg.epsilon, epsilon_factor=cfg.epsilon_factor,
                qvol=cfg.quadrature_order, qedge=cfg.quadrature_order,
                freeze_operator=cfg.freeze_operator, solver_tol=cfg.solver_tol,
            )
            return rec

        report = analysis.ErrorReport()
        if cfg.threads > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                report.levels = list(pool.map(run_one, cfg.levels))
        else:
            report.levels = [run_one(s) for s in cfg.levels]
    else:
        report = analysis.convergence_study(
            case, gm, cfg.degree, cfg.levels, cfg.tau_of_h,
            threads=cfg.threads,
            epsilon=cfg.epsilon, epsilon_factor=cfg.epsilon_factor,
            qvol=cfg.quadrature_order, qedge=cfg.quadrature_order,
            freeze_operator=cfg.freeze_operator, solver_tol=cfg.solver_tol,
        )

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    analysis.write_report_csv(report, out / "report.csv")
    analysis.write_loglog_data(report, out / "err_vs_h.dat")
    slope = report.slope_l2h1()
    for i, rec in enumerate(report.levels):
        print(
            f"level {i}: spans={rec.spans} h={rec.h:.5g} tau={rec.tau:.5g} "
            f"dof={rec.dof} err_l2h1={rec.err_l2h1:.6e} err_bdry={rec.err_bdry:.3e}"
        )
    print(f"fitted L2(J;H1) slope: {slope:.4f}")
    return 0


def cmd_calibrate(cfg):
    """Report the penalty floor and coercivity audits for a factor sweep."""
    case = builtin_case(cfg.case)
    gm = load_geometry(cfg.geometry)
    spans = cfg.levels[0]
    space = uniform_space(cfg.degree, spans)
    if space.dimension > CALIBRATE_DOF_LIMIT:
        raise ConfigError(
            f"calibrate uses dense audits; {space.dimension} dof exceeds "
            f"{CALIBRATE_DOF_LIMIT} (use a coarser first level)"
        )
    mesh = build_mesh(gm, space)
    disc = Discretization(space, mesh, qvol=cfg.quadrature_order, qedge=cfg.quadrature_order)
    p = case.problem
    c_star = trace_constant(disc)
    floor = penalty_floor(disc, p)

    lines = [
        f"case = {cfg.case}, degree = {cfg.degree}, spans = {spans}, dof = {space.dimension}",
        f"trace_constant = {c_star:.10g}",
        f"penalty_floor = {floor:.10g}  (alpha = {p.alpha:g}, mu1 = {p.mu1:g})",
    ]
    times = sorted({0.0, 0.5 * p.T, p.T})
    for factor in CALIBRATE_FACTORS:
        eps = factor * floor
        alphas = [analysis.coercivity_audit(disc, p, eps, t)[0] for t in times]
        worst = min(alphas)
        status = "pass" if worst > 0 else "FAIL"
        lines.append(
            f"factor {factor:>4}: eps = {eps:.6g}, min alpha_hat over t = {worst:.6e} [{status}]"
        )
    text = "\n".join(lines)
    print(text)
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "calibrate.txt").write_text(text + "\n")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nitsche-iga",
        description="Galerkin solver with weakly imposed Dirichlet data "
        "on spline discretizations",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("solve", "march one level and write snapshots"),
        ("convergence", "run a refinement study and fit rates"),
        ("calibrate", "report the penalty floor and coercivity audits"),
    ):
        s = sub.add_parser(name, help=help_text)
        s.add_argument("--config", required=True, help="flat key = value run file")
        s.add_argument("--out", default=None, help="output directory")
        s.add_argument("--threads", type=int, default=None, help="parallel level workers")
        s.add_argument("--case", default=None, help="override the configured case")
        s.add_argument("--geometry", default=None, help="override the configured geometry")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        raw = parse_config_file(args.config)
        cfg = build_run_config(
            raw,
            overrides={
                "out": args.out,
                "threads": args.threads,
                "case": args.case,
                "geometry": args.geometry,
            },
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "convergence":
            return cmd_convergence(cfg)
        return cmd_calibrate(cfg)
    except (ConfigError, InsufficientLevels) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NitscheIgaError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
