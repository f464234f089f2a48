"""Experiment orchestration: seeded multi-run comparisons, sparsity tables,
envelopes, rate fits, and CSV/JSON/SVG artifacts."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import fem
from .hilbert import wdot, wnorm
from .optim import (AdaSgSolver, AdmmSolver, BatchSchedule, SpgSolver,
                    SsgSolver, derive_convex_params,
                    derive_strongly_convex_params, estimate_L, run_solver)
from .problems import EllipticControlProblem, FrozenEvalSet, QuadraticProblem

logger = logging.getLogger(__name__)

CSV_HEADER = ["k", "sfo_calls", "wall_seconds", "objective", "feasibility",
              "sparsity", "method", "run_seed"]

METHODS = ("admm", "spg", "ssg", "adasg")
_METHOD_IDS = {m: i + 1 for i, m in enumerate(METHODS)}

# sub-stream tags for deriving independent seeds from the experiment seed
_EVAL_TAG = 901
_LHAT_TAG = 902
_QUAD_TAG = 903


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    problem: str = "elliptic"  # "elliptic" | "quadratic"
    regime: str = "strongly_convex"  # "strongly_convex" | "convex"
    alpha: float = 1e-5
    beta: float = 1e-5
    mu: float = 0.5
    mesh_h: float = 2.0 ** -5
    K: int = 50
    runs: int = 5
    eval_samples: int = 200
    seed: int = 0
    methods: tuple = ("admm", "spg", "ssg", "adasg")
    batch_rule: str = "paper_power"
    batch_c: float = 0.5
    batch_p: float = 1.1
    batch_floor: int = 1
    out_dir: str | None = None
    # elliptic solver used on the optimization path ("lu" or "cg")
    solve_method: str = "lu"
    u_min: float = -6.0
    u_max: float = 6.0
    # quadratic instance knobs
    quad_dim: int = 50
    quad_sigma: float = 0.1
    # baseline stepsize policies
    ssg_c: float = 1.0
    ada_gamma: float = 1.0
    ada_eps: float = 1e-8
    l_est_calls: int = 1000

    def __post_init__(self):
        if self.problem not in ("elliptic", "quadratic"):
            raise ConfigError(f"unknown problem {self.problem!r}")
        if self.regime not in ("strongly_convex", "convex"):
            raise ConfigError(f"unknown regime {self.regime!r}")
        if self.runs < 1 or self.eval_samples < 1 or self.K < 1:
            raise ConfigError("runs, eval_samples and K must all be >= 1")
        self.methods = tuple(self.methods)
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}; expected one of {METHODS}")
        if self.regime == "strongly_convex" and self.alpha <= 0.0:
            raise ConfigError("strongly_convex regime requires alpha > 0")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        bad = set(d) - known
        if bad:
            raise ConfigError(f"unknown config keys: {sorted(bad)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc


@dataclass
class RunRow:
    k: int
    sfo_calls: int
    wall_seconds: float
    objective: float
    feasibility: float
    sparsity: float
    method: str
    run_seed: int


@dataclass
class RunRecord:
    method: str
    run_seed: int
    rows: list


@dataclass
class EnvelopeStats:
    k: np.ndarray
    min: np.ndarray
    mean: np.ndarray
    max: np.ndarray


def build_problem(cfg: ExperimentConfig):
    if cfg.problem == "elliptic":
        mesh = fem.build_mesh(cfg.mesh_h)
        return EllipticControlProblem(mesh, cfg.alpha, cfg.beta,
                                      u_min=cfg.u_min, u_max=cfg.u_max,
                                      solve_method=cfg.solve_method)
    rng = np.random.Generator(np.random.Philox(
        np.random.SeedSequence((cfg.seed, _QUAD_TAG))))
    n = cfg.quad_dim
    G = rng.standard_normal((n, n))
    A = G * (math.sqrt(0.1) / np.linalg.norm(G, 2))
    b = A @ rng.uniform(-8.0, 8.0, size=n)
    return QuadraticProblem(A, b, cfg.alpha, cfg.beta, u_min=cfg.u_min,
                            u_max=cfg.u_max, sigma=cfg.quad_sigma)


def batch_schedule(cfg: ExperimentConfig) -> BatchSchedule:
    return BatchSchedule(rule=cfg.batch_rule, c=cfg.batch_c, p=cfg.batch_p,
                         floor=cfg.batch_floor)


def _run_rng(cfg: ExperimentConfig, method: str, run_idx: int):
    ss = np.random.SeedSequence((cfg.seed, _METHOD_IDS[method], run_idx))
    run_seed = int(ss.generate_state(1)[0])
    return np.random.Generator(np.random.Philox(ss)), run_seed


def _estimate_l_hat(cfg: ExperimentConfig, problem) -> float:
    rng = np.random.Generator(np.random.Philox(
        np.random.SeedSequence((cfg.seed, _LHAT_TAG))))
    return estimate_L(problem, np.zeros(problem.dim), rng, n_calls=cfg.l_est_calls)


def make_params(cfg: ExperimentConfig, l_hat: float | None = None):
    if cfg.regime == "strongly_convex":
        return derive_strongly_convex_params(cfg.alpha, cfg.mu)
    if l_hat is None:
        raise ConfigError("convex regime needs an L estimate")
    return derive_convex_params(cfg.beta, cfg.mu, l_hat)


def make_solver(method: str, cfg: ExperimentConfig, problem, batch,
                params=None, l_hat: float | None = None):
    if method == "admm":
        return AdmmSolver(problem, params, batch)
    if method == "spg":
        return SpgSolver(problem, batch, l_hat=l_hat)
    if method == "ssg":
        alpha = cfg.alpha if cfg.regime == "strongly_convex" else None
        return SsgSolver(problem, batch, c=cfg.ssg_c, alpha=alpha)
    if method == "adasg":
        return AdaSgSolver(problem, batch, gamma=cfg.ada_gamma, eps=cfg.ada_eps)
    raise ConfigError(f"unknown method {method!r}")


def sparsity_fraction(u: np.ndarray, w: np.ndarray, tol: float = 1e-12) -> float:
    """Lumped-weight fraction of the domain where |u| exceeds tol."""
    if tol < 0.0:
        raise ValueError("tolerance must be nonnegative")
    u = np.asarray(u, dtype=float)
    return float(w[np.abs(u) > tol].sum() / w.sum())


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> list:
    """Run every configured method x run combination on derived seeds.

    All methods share the frozen evaluation sample set and the batch
    schedule, hence identical oracle budgets per iteration.
    Returns one RunRecord per (method, run); failed runs are logged and
    skipped so that the remaining runs still complete.
    """
    problem = build_problem(cfg)
    eval_set = FrozenEvalSet(problem, cfg.eval_samples, (cfg.seed, _EVAL_TAG))
    batch = batch_schedule(cfg)

    needs_l = cfg.regime == "convex" or "spg" in cfg.methods
    l_hat = _estimate_l_hat(cfg, problem) if needs_l else None
    params = make_params(cfg, l_hat) if "admm" in cfg.methods else None

    w = problem.weights
    records = []
    for method in cfg.methods:
        solver = make_solver(method, cfg, problem, batch, params=params, l_hat=l_hat)
        for run_idx in range(cfg.runs):
            rng, run_seed = _run_rng(cfg, method, run_idx)
            rows = []

            def hook(k, sfo_calls, elapsed, state, _rows=rows,
                     _method=method, _seed=run_seed):
                u, z = solver.views(state)
                # objective at the feasible iterate u; z is reported through
                # sparsity/feasibility (the split pair can undercut the optimum)
                _rows.append(RunRow(
                    k=k, sfo_calls=sfo_calls, wall_seconds=elapsed,
                    objective=eval_set.objective(u),
                    feasibility=wnorm(u - z, w),
                    sparsity=sparsity_fraction(z, w),
                    method=_method, run_seed=_seed))

            try:
                run_solver(solver, cfg.K, rng, hook=hook)
            except Exception:
                logger.exception("run failed: method=%s run=%d", method, run_idx)
                continue
            records.append(RunRecord(method=method, run_seed=run_seed, rows=rows))

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        emit_csv([r for rec in records for r in rec.rows], out / "records.csv")
        _write_summary(records, out / "summary.json")
    return records


def _write_summary(records, path):
    summary = {}
    for rec in records:
        final = rec.rows[-1]
        entry = summary.setdefault(rec.method, {"final_objectives": [],
                                                "final_feasibility": [],
                                                "final_sparsity": [],
                                                "sfo_calls": final.sfo_calls})
        entry["final_objectives"].append(final.objective)
        entry["final_feasibility"].append(final.feasibility)
        entry["final_sparsity"].append(final.sparsity)
    for entry in summary.values():
        entry["mean_final_objective"] = float(np.mean(entry["final_objectives"]))
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)


def envelope(records) -> EnvelopeStats:
    """Per-iteration min/mean/max of the objective over runs of one method."""
    if len(records) < 2:
        raise ValueError("envelope needs at least 2 runs")
    methods = {rec.method for rec in records}
    if len(methods) > 1:
        raise ValueError(f"envelope mixes methods: {sorted(methods)}")
    ks = np.array([row.k for row in records[0].rows])
    objs = np.array([[row.objective for row in rec.rows] for rec in records])
    if objs.shape[1] != ks.size:
        raise ValueError("runs have mismatched iteration counts")
    return EnvelopeStats(k=ks, min=objs.min(axis=0), mean=objs.mean(axis=0),
                         max=objs.max(axis=0))


def mean_objective_by_k(records, method: str) -> tuple[np.ndarray, np.ndarray]:
    recs = [r for r in records if r.method == method]
    if not recs:
        raise ValueError(f"no records for method {method!r}")
    ks = np.array([row.k for row in recs[0].rows])
    objs = np.array([[row.objective for row in rec.rows] for rec in recs])
    return ks, objs.mean(axis=0)


def mean_feasibility_by_k(records, method: str) -> tuple[np.ndarray, np.ndarray]:
    recs = [r for r in records if r.method == method]
    if not recs:
        raise ValueError(f"no records for method {method!r}")
    ks = np.array([row.k for row in recs[0].rows])
    feas = np.array([[row.feasibility for row in rec.rows] for rec in recs])
    return ks, feas.mean(axis=0)


def fit_loglog_slope(k: np.ndarray, values: np.ndarray,
                     k_range: tuple[int, int]) -> float:
    """Least-squares slope of log(values) vs log(k) over k in [k_range]."""
    k = np.asarray(k, dtype=float)
    values = np.asarray(values, dtype=float)
    mask = (k >= k_range[0]) & (k <= k_range[1]) & (values > 0.0)
    if mask.sum() < 5:
        raise ValueError(f"only {int(mask.sum())} positive points in range; "
                         "need at least 5 for a slope fit")
    slope, _ = np.polyfit(np.log(k[mask]), np.log(values[mask]), 1)
    return float(slope)


def fit_rate_slope(records, k_range: tuple[int, int],
                   reference_objective: float, method: str = "admm",
                   quantity: str = "gap") -> float:
    """Log-log slope of the run-averaged objective gap (or feasibility)."""
    if quantity == "gap":
        ks, mean_obj = mean_objective_by_k(records, method)
        values = mean_obj - reference_objective
    elif quantity == "feasibility":
        ks, values = mean_feasibility_by_k(records, method)
    else:
        raise ValueError(f"unknown quantity {quantity!r}")
    return fit_loglog_slope(ks, values, k_range)


def sparsity_table(cfg: ExperimentConfig, beta_list) -> dict:
    """Final-iterate sparsity per batch rule (growing vs constant-1) and beta.

    Returns {rule_name: [fraction per beta]}; warns if a row is not monotone
    non-increasing in beta.
    """
    beta_list = list(beta_list)
    if not beta_list:
        raise ValueError("beta_list must be nonempty")
    rules = {
        "paper_power": batch_schedule(cfg),
        "constant_1": BatchSchedule(rule="constant", floor=1),
    }
    table = {}
    for name, batch in rules.items():
        fractions = []
        for beta in beta_list:
            beta_cfg = replace(cfg, beta=beta)
            problem = build_problem(beta_cfg)
            l_hat = _estimate_l_hat(beta_cfg, problem) if cfg.regime == "convex" else None
            params = make_params(beta_cfg, l_hat)
            per_run = []
            for run_idx in range(cfg.runs):
                rng, _ = _run_rng(beta_cfg, "admm", run_idx)
                solver = AdmmSolver(problem, params, batch)
                state = run_solver(solver, cfg.K, rng)
                per_run.append(sparsity_fraction(state.z, problem.weights))
            fractions.append(float(np.mean(per_run)))
        if any(b > a + 1e-9 for a, b in zip(fractions, fractions[1:])):
            logger.warning("sparsity not monotone for rule %s: %s", name, fractions)
        table[name] = fractions
    return table


def emit_csv(rows, path) -> None:
    """Write telemetry rows with the canonical header; floats use repr
    (shortest round-trip), so re-runs are byte-identical."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            for row in rows:
                writer.writerow([
                    row.k, row.sfo_calls, repr(row.wall_seconds),
                    repr(row.objective), repr(row.feasibility),
                    repr(row.sparsity), row.method, row.run_seed,
                ])
    except OSError as exc:
        raise OSError(f"failed writing CSV to {path}: {exc}") from exc


def load_csv(path) -> list:
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != CSV_HEADER:
                raise ValueError(f"unexpected CSV header in {path}: {header}")
            return [RunRow(k=int(r[0]), sfo_calls=int(r[1]),
                           wall_seconds=float(r[2]), objective=float(r[3]),
                           feasibility=float(r[4]), sparsity=float(r[5]),
                           method=r[6], run_seed=int(r[7]))
                    for r in reader]
    except OSError as exc:
        raise OSError(f"failed reading CSV from {path}: {exc}") from exc


@dataclass
class CheckReport:
    name: str
    passed: bool
    details: list


def grad_check(mesh_h: float = 2.0 ** -4, alpha: float = 1e-5, beta: float = 1e-5,
               seed: int = 0, n_checks: int = 3, fd_step: float = 1e-4,
               rel_tol: float = 1e-5) -> CheckReport:
    """Central finite differences of the per-sample smooth value against the
    adjoint gradient, at random controls and directions."""
    mesh = fem.build_mesh(mesh_h)
    problem = EllipticControlProblem(mesh, alpha, beta, solve_method="cg")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    w = problem.weights
    details = []
    for i in range(n_checks):
        xi = problem.draw_sample(rng)
        u = rng.uniform(-2.0, 2.0, size=problem.dim)
        d = rng.standard_normal(problem.dim)
        d /= wnorm(d, w)
        fd = (problem.smooth_value(u + fd_step * d, xi)
              - problem.smooth_value(u - fd_step * d, xi)) / (2.0 * fd_step)
        directional = wdot(problem.grad(u, xi), d, w)
        rel_err = abs(fd - directional) / max(abs(fd), 1e-300)
        details.append({"check": i, "fd": fd, "directional": directional,
                        "rel_err": rel_err, "ok": rel_err <= rel_tol})
    return CheckReport(name="grad_check",
                       passed=all(d["ok"] for d in details), details=details)


def fem_verify(h_list=(2.0 ** -3, 2.0 ** -4, 2.0 ** -5),
               order_range: tuple[float, float] = (1.8, 2.2)) -> CheckReport:
    """Manufactured-solution convergence study: a == 1, exact state
    sin(pi x1) sin(pi x2), forcing 2 pi^2 sin sin."""
    exact = lambda x1, x2: np.sin(np.pi * x1) * np.sin(np.pi * x2)
    forcing = lambda x1, x2: 2.0 * np.pi ** 2 * exact(x1, x2)
    errors = []
    for h in h_list:
        mesh = fem.build_mesh(h)
        ops = fem.assemble(mesh, np.zeros(4))
        y = fem.solve_state(ops, fem.interpolate(mesh, forcing), method="cg")
        errors.append(fem.l2_error(y, exact, mesh, ops.lumped))
    orders = [math.log2(e0 / e1) for e0, e1 in zip(errors, errors[1:])]
    ok = all(order_range[0] <= o <= order_range[1] for o in orders)
    return CheckReport(name="fem_verify", passed=ok,
                       details=[{"h": list(h_list), "errors": errors,
                                 "orders": orders}])
