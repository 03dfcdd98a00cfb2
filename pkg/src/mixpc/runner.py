"""Experiment orchestration: suites, bound checks, and CSV reports.

Each suite streams instances through a solver, computes the offline
baseline, evaluates every bound the run is supposed to satisfy, and emits
one report record per run.  Reports are deterministic given (instance
bytes, seed, config) except for the wall-time column.
"""

from __future__ import annotations

import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .adversary import (
    MpcResponder,
    UniformResponder,
    optimal_witness,
    tree_adversary,
)
from .ccfl import (
    CcflFractionalSolver,
    CcflInstance,
    ccfl_dual_certificate,
    gamma_trials,
)
from .core import violation
from .instances import OmpcInstance, gen_random_ccfl, gen_random_ompc
from .oracle import brute_force_zstar, ccfl_opt1, ompc_opt
from .rounding import mc_rounding
from .solver import OnlineOmpcSolver, dual_certificate, mu_for

__all__ = [
    "ExperimentRecord",
    "ExperimentReport",
    "ExperimentConfig",
    "run_experiment",
    "report_to_csv",
    "ompc_sigma",
    "ompc_phase_budget",
    "check_ompc_run",
    "check_ccfl_run",
    "suite_ompc_adversary",
    "suite_ompc_random",
    "suite_ccfl_random",
    "suite_ccfl_mc",
]

_E = float(np.e)

REPORT_COLUMNS = (
    "instance",
    "seed",
    "algorithm",
    "m",
    "n",
    "d",
    "rho",
    "kappa",
    "sigma",
    "online",
    "oracle",
    "ratio",
    "bound",
    "phases",
    "trials",
    "epochs",
    "witness",
    "wall_time_s",
)


@dataclass
class ExperimentRecord:
    instance: str
    seed: int
    algorithm: str
    m: int
    n: int
    d: int | None = None
    rho: float | None = None
    kappa: float | None = None
    sigma: float | None = None
    online: float | None = None
    oracle: float | None = None
    ratio: float | None = None
    bound: float | None = None
    phases: int | None = None
    trials: int | None = None
    epochs: int | None = None
    witness: float | None = None
    wall_time_s: float | None = None

    def as_row(self) -> list[str]:
        out = []
        for col in REPORT_COLUMNS:
            v = getattr(self, col)
            if v is None:
                out.append("")
            elif isinstance(v, float):
                out.append(repr(v))
            else:
                out.append(str(v))
        return out


@dataclass
class ExperimentReport:
    records: list[ExperimentRecord] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def report_to_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    buf.write(",".join(REPORT_COLUMNS) + "\n")
    for rec in report.records:
        buf.write(",".join(rec.as_row()) + "\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Derived constants and verification helpers
# ---------------------------------------------------------------------------


def ompc_sigma(instance: OmpcInstance) -> float:
    """Post-hoc ``e^2 ln(mu d^2 rho kappa)`` from the full stream."""
    mu = mu_for(instance.system.m)
    return _E**2 * math.log(
        mu * instance.d**2 * instance.system.rho * instance.kappa
    )


def ompc_phase_budget(instance: OmpcInstance) -> int:
    """Per-trial phase allowance ``n * ceil(log_mu(mu d^2 rho kappa))``."""
    mu = mu_for(instance.system.m)
    arg = mu * instance.d**2 * instance.system.rho * instance.kappa
    return instance.system.n * math.ceil(math.log(arg) / math.log(mu))


def _ompc_dual_feasible(
    instance: OmpcInstance, state, sigma: float
) -> tuple[float, float]:
    """Residuals of both dual families for one trial (<= 0 means feasible)."""
    y_scaled, z_scaled = dual_certificate(state, sigma)
    cty = np.zeros(instance.system.n)
    for row_id, yv in y_scaled.items():
        row = instance.rows[row_id]
        cty[row.indices] += row.values * yv
    ptz = instance.system.matrix.T @ z_scaled
    scale = max(1.0, float(np.abs(ptz).max()))
    fam1 = float((cty - ptz).max()) / scale
    fam2 = float(z_scaled.sum()) - 1.0
    return fam1, fam2


def check_ompc_run(
    instance: OmpcInstance,
    solution,
    opt_value: float,
    label: str,
    pd_tol: float = 1e-9,
    dual_tol: float = 1e-9,
) -> list[str]:
    """All bound checks for one solved stream; returns violation messages."""
    out: list[str] = []
    sigma = ompc_sigma(instance)
    m = instance.system.m
    comp_bound = 32.0 * sigma * math.log(_E * m)
    if solution.lambda_value > comp_bound * opt_value * (1 + 1e-9):
        out.append(
            f"{label}: online {solution.lambda_value} exceeds "
            f"{comp_bound} * OPT ({opt_value})"
        )
    budget = ompc_phase_budget(instance)
    for t, rec in enumerate(solution.trials):
        if rec.phases > budget:
            out.append(f"{label}: trial {t} used {rec.phases} phases > budget {budget}")
        gaps = np.array(rec.state.d_dual) - np.array(rec.state.d_est)
        if gaps.size and float(gaps.min()) < -pd_tol:
            out.append(
                f"{label}: trial {t} primal-dual gap {float(gaps.min())} < -{pd_tol}"
            )
        fam1, fam2 = _ompc_dual_feasible(instance, rec.state, sigma)
        if fam1 > dual_tol or fam2 > dual_tol:
            out.append(f"{label}: trial {t} dual infeasible ({fam1}, {fam2})")
        y_scaled, _ = dual_certificate(rec.state, sigma)
        weak = sum(y_scaled.values())
        if weak > opt_value * (1 + 1e-7) + 1e-12:
            out.append(f"{label}: trial {t} weak duality {weak} > OPT {opt_value}")
        if rec.failed:
            tl_f = rec.lambda_f / rec.gamma
            if tl_f > 1.0 + 3.0 * math.log(_E * m) + 1e-9:
                out.append(f"{label}: trial {t} failed above the mu-step envelope")
    lam_sum = sum(rec.lambda_f for rec in solution.trials)
    if solution.lambda_value > lam_sum * (1 + 1e-9) + 1e-12:
        out.append(f"{label}: aggregate violation exceeds per-trial sum")
    return out


def check_ccfl_run(
    instance: CcflInstance,
    solution,
    opt1_value: float,
    label: str,
    pd_tol: float = 1e-9,
    dual_tol: float = 1e-9,
) -> list[str]:
    out: list[str] = []
    m, n = instance.m, instance.n
    sigma = instance.sigma
    zz = solution.z_value
    frac_bound = 8.0 * sigma * (1.0 + 6.0 * math.log(_E * m * n)) * opt1_value
    if solution.cumulative_cost > frac_bound * (1 + 1e-9):
        out.append(
            f"{label}: cumulative fractional cost {solution.cumulative_cost} "
            f"exceeds {frac_bound}"
        )
    if solution.lp1_objective > solution.cumulative_cost * (1 + 1e-9):
        out.append(f"{label}: aggregate objective exceeds cumulative trial cost")
    p_dense = instance.dense_demand()
    a_dense = instance.dense_assign_cost()
    for t, st in enumerate(solution.trials):
        gaps = np.array(st.d_dual) - np.array(st.d_cost)
        if gaps.size and float(gaps.min()) < -pd_tol:
            out.append(
                f"{label}: trial {t} primal-dual gap {float(gaps.min())} < -{pd_tol}"
            )
        cert = ccfl_dual_certificate(st)
        szscale = max(1.0, zz)
        if float(cert.delta.sum()) - zz > dual_tol * szscale:
            out.append(f"{label}: trial {t} dual family-3 infeasible")
        beta_by_fac = np.zeros(m)
        for (i, _j), b in cert.beta.items():
            beta_by_fac[i] += b
        fam2 = beta_by_fac + zz * cert.gamma_ - cert.delta - instance.fixed_charge
        cscale = np.maximum(1.0, instance.fixed_charge)
        if float((fam2 / cscale).max()) > dual_tol:
            out.append(f"{label}: trial {t} dual family-2 infeasible")
        worst1 = -math.inf
        for (i, j), b in cert.beta.items():
            lhs = (
                st.gamma * cert.alpha[j]
                - b
                - p_dense[i, j] * cert.gamma_[i]
                - a_dense[i, j]
            )
            worst1 = max(worst1, lhs)
        if worst1 > dual_tol:
            out.append(f"{label}: trial {t} dual family-1 infeasible ({worst1})")
        weak = float(cert.alpha.sum())
        if weak > (opt1_value / st.gamma) * (1 + 1e-7) + 1e-12:
            out.append(
                f"{label}: trial {t} weak duality {weak} > OPT1/gamma "
                f"{opt1_value / st.gamma}"
            )
    return out


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------


def suite_ompc_adversary(
    ms: tuple[int, ...] = (4, 8, 16),
    ds: tuple[int, ...] = (8, 16),
    seed: int = 0,
    algorithm: str = "mpc",
    with_oracle: bool = True,
) -> ExperimentReport:
    """Tree-adversary grid; checks the witness and the forced lower bound."""
    report = ExperimentReport()
    for m in ms:
        for d in ds:
            t0 = time.perf_counter()
            if algorithm == "mpc":
                holder: dict = {}

                def factory(system, _h=holder):
                    r = MpcResponder(system)
                    _h["solver"] = r.solver
                    return r

            elif algorithm == "uniform":
                holder = {}

                def factory(system, _h=holder):
                    return UniformResponder(system.n)

            else:
                raise ValueError(f"unknown adversary algorithm {algorithm!r}")
            result = tree_adversary(m, d, factory)
            witness = optimal_witness(result)
            wviol = violation(result.system, witness)
            covered = min(row.coverage(witness) for row in result.transcript)
            lam = result.algorithm_value()
            label = f"adversary-m{m}-d{d}"
            if abs(wviol - 1.0) > 1e-12:
                report.violations.append(f"{label}: witness violation {wviol} != 1")
            if covered < 1.0 - 1e-12:
                report.violations.append(f"{label}: witness leaves a row uncovered")
            if lam < result.lower_bound - 1e-9:
                report.violations.append(
                    f"{label}: algorithm value {lam} below bound {result.lower_bound}"
                )
            inst = OmpcInstance(result.system, result.transcript)
            opt_val = None
            ratio = None
            if with_oracle:
                opt_val = ompc_opt(result.system, list(result.transcript)).value
                ratio = lam / opt_val
                if ratio < 1.0 - 1e-9:
                    report.violations.append(f"{label}: online beat the oracle")
            phases = trials = None
            if algorithm == "mpc":
                sol = holder["solver"].finish()
                phases = sum(rec.phases for rec in sol.trials)
                trials = len(sol.trials)
                if with_oracle:
                    report.violations.extend(
                        check_ompc_run(inst, sol, opt_val, label)
                    )
            report.records.append(
                ExperimentRecord(
                    instance=label,
                    seed=seed,
                    algorithm=algorithm,
                    m=m,
                    n=result.system.n,
                    d=inst.d,
                    rho=result.system.rho,
                    kappa=inst.kappa,
                    sigma=ompc_sigma(inst),
                    online=lam,
                    oracle=opt_val,
                    ratio=ratio,
                    bound=result.lower_bound,
                    phases=phases,
                    trials=trials,
                    witness=wviol,
                    wall_time_s=time.perf_counter() - t0,
                )
            )
    return report


def _ompc_random_instance(seed: int, index: int) -> tuple[OmpcInstance, dict]:
    g_m = 3 + (index * 7) % 18  # m in [3, 20]
    g_n = 4 + (index * 11) % 27  # n in [4, 30]
    g_rows = 3 + (index * 5) % 28  # rows in [3, 30]
    density = 0.3 + 0.5 * ((index * 13) % 10) / 9.0
    inst = gen_random_ompc(
        g_m, g_n, g_rows, density, (1.0, 4.0), seed=seed + index
    )
    return inst, {"m": g_m, "n": g_n, "rows": g_rows}


def suite_ompc_random(
    count: int = 50, seed: int = 0, with_checks: bool = True
) -> ExperimentReport:
    """Seeded random streams solved online and compared to the simplex."""
    report = ExperimentReport()
    for idx in range(count):
        inst, dims = _ompc_random_instance(seed, idx)
        t0 = time.perf_counter()
        solver = OnlineOmpcSolver(inst.system)
        for row in inst.rows:
            solver.offer(row)
        sol = solver.finish()
        opt = ompc_opt(inst.system, list(inst.rows))
        label = f"ompc-random-{idx}"
        sigma = ompc_sigma(inst)
        m = inst.system.m
        ratio = sol.lambda_value / opt.value
        if with_checks:
            report.violations.extend(check_ompc_run(inst, sol, opt.value, label))
            if ratio < 1.0 - 1e-9:
                report.violations.append(f"{label}: online beat the oracle")
        report.records.append(
            ExperimentRecord(
                instance=label,
                seed=seed + idx,
                algorithm="mpc-approx",
                m=m,
                n=inst.system.n,
                d=inst.d,
                rho=inst.system.rho,
                kappa=inst.kappa,
                sigma=sigma,
                online=sol.lambda_value,
                oracle=opt.value,
                ratio=ratio,
                bound=32.0 * sigma * math.log(_E * m),
                phases=sum(rec.phases for rec in sol.trials),
                trials=len(sol.trials),
                wall_time_s=time.perf_counter() - t0,
            )
        )
    return report


def _ccfl_random_instance(seed: int, index: int) -> CcflInstance:
    m = 4 + (index * 3) % 5  # m in [4, 8]
    n = 8 + (index * 7) % 5  # n in [8, 12]
    return gen_random_ccfl(m, n, seed=seed + index)


def suite_ccfl_random(
    count: int = 25, seed: int = 0, with_checks: bool = True
) -> ExperimentReport:
    """Random assignment instances at the brute-forced optimal cost guess."""
    report = ExperimentReport()
    for idx in range(count):
        inst = _ccfl_random_instance(seed, idx)
        t0 = time.perf_counter()
        zstar = brute_force_zstar(inst)
        opt1 = ccfl_opt1(inst, zstar)
        label = f"ccfl-random-{idx}"
        if opt1.status != "optimal":
            report.violations.append(f"{label}: oracle returned {opt1.status}")
            continue
        sol = gamma_trials(inst, zstar)
        sigma = inst.sigma
        bound = 8.0 * sigma * (1.0 + 6.0 * math.log(_E * inst.m * inst.n))
        if with_checks:
            report.violations.extend(
                check_ccfl_run(inst, sol, opt1.objective, label)
            )
            if opt1.objective < zstar * (1 - 1e-9):
                report.violations.append(f"{label}: OPT1 below Z")
        report.records.append(
            ExperimentRecord(
                instance=label,
                seed=seed + idx,
                algorithm="ccfl-fractional",
                m=inst.m,
                n=inst.n,
                rho=inst.rho,
                sigma=sigma,
                online=sol.cumulative_cost,
                oracle=opt1.objective,
                ratio=sol.cumulative_cost / opt1.objective,
                bound=bound,
                phases=sum(
                    sum(st.phases_per_client.values()) for st in sol.trials
                ),
                trials=len(sol.trials),
                wall_time_s=time.perf_counter() - t0,
            )
        )
    return report


def _mc_instance(m: int, n: int, seed: int) -> CcflInstance:
    # a uniform workload: facilities differ, clients are identical, demands
    # are light; every client then rides the per-facility row maximum, which
    # keeps the candidate probabilities x/y near one
    from .ccfl import CcflClient
    from .rng import rng_for

    g = rng_for(seed, "mc-instance", m, n)
    charges = 1.0 + g.random(m)
    demand = 0.01 + 0.04 * g.random(m)
    assign = 0.05 * g.random(m)
    fac = np.arange(m, dtype=np.int64)
    client = CcflClient(
        facilities=fac, demand=demand, raw_demand=demand, assign_cost=assign
    )
    return CcflInstance(charges, np.ones(m), tuple(client for _ in range(n)))


def suite_ccfl_mc(
    reps: int = 100_000,
    seed: int = 0,
    m: int = 5,
    n: int = 20,
    congestion_slack: float = 0.05,
) -> tuple[ExperimentReport, "object"]:
    """Monte-Carlo rounding statistics on one frozen fractional solution."""
    inst = _mc_instance(m, n, seed)
    # generous guess keeps the congestion term from steering the rates, so
    # the per-client fractional profile stays stationary across arrivals
    z_value = 20.0 * max(inst.entry_cost(j).max() for j in range(n))
    solver = CcflFractionalSolver(inst, z_value)
    x_per_client = np.zeros((n, m))
    y_per_client = np.zeros((n, m))
    for j in range(n):
        solver.offer(j)
        x_per_client[j] = solver.x_aggregate[:, j]
        y_per_client[j] = solver.y_aggregate
    t0 = time.perf_counter()
    stats = mc_rounding(inst, x_per_client, y_per_client, z_value, reps, seed)
    report = ExperimentReport()
    p0 = 1.0 / n**2
    step4_cap = p0 + 3.0 * math.sqrt(p0 * (1 - p0) / reps)
    worst_client = float(stats.step4_freq.max())
    if worst_client > step4_cap:
        report.violations.append(
            f"mc: step-4 frequency {worst_client} above {step4_cap}"
        )
    opened_cap = stats.opened_bound * (1.0 + 3.0 / math.sqrt(reps))
    if stats.mean_opened_cost > opened_cap:
        report.violations.append(
            f"mc: mean opened cost {stats.mean_opened_cost} above {opened_cap}"
        )
    cong_cap = stats.congestion_bound * (1.0 + congestion_slack)
    if stats.mean_max_candidate_congestion > cong_cap:
        report.violations.append(
            f"mc: mean max candidate congestion "
            f"{stats.mean_max_candidate_congestion} above {cong_cap}"
        )
    report.records.append(
        ExperimentRecord(
            instance=f"ccfl-mc-m{m}-n{n}",
            seed=seed,
            algorithm="rounding-mc",
            m=m,
            n=n,
            rho=inst.rho,
            sigma=inst.sigma,
            online=stats.mean_opened_cost,
            bound=opened_cap,
            witness=worst_client,
            wall_time_s=time.perf_counter() - t0,
        )
    )
    return report, stats


# ---------------------------------------------------------------------------
# Config-driven entry point
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    suite: str
    seed: int = 0
    count: int | None = None
    reps: int | None = None
    out: str | None = None
    bound_check: bool = True
    epoch_constant: float = 512.0


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Dispatch a suite by name and optionally write its CSV report."""
    if config.suite == "ompc-adversary":
        report = suite_ompc_adversary(seed=config.seed)
    elif config.suite == "ompc-random":
        report = suite_ompc_random(count=config.count or 50, seed=config.seed)
    elif config.suite == "ccfl-random":
        report = suite_ccfl_random(count=config.count or 25, seed=config.seed)
    elif config.suite == "ccfl-mc":
        report, _ = suite_ccfl_mc(reps=config.reps or 100_000, seed=config.seed)
    else:
        raise ValueError(f"unknown suite {config.suite!r}")
    if not config.bound_check:
        report.violations.clear()
    if config.out:
        with open(config.out, "w", encoding="utf-8") as fh:
            fh.write(report_to_csv(report))
    return report
