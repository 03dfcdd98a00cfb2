"""Online solver for mixed packing/covering programs.

Packing constraints are known offline; covering rows arrive one at a time
and every variable may only grow.  Each *trial* runs the multiplicative
update loop at a fixed scaling ``gamma``: while the active row is unmet,
all of its variables are multiplied by ``1 + eps * c_j / rate_j`` (at most
a factor ``mu``, exactly ``mu`` at the argmin), a dual coordinate collects
``e * eps`` per phase, and the trial aborts once the scaled violation
reaches ``3 ln(e m)``.  On abort the wrapper doubles ``gamma``, starts a
fresh trial, and replays the offending row; the solution is the sum of all
trials' variables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import CoveringRow, PackingSystem, violation

__all__ = [
    "OmpcTrialState",
    "TrialRecord",
    "OmpcSolution",
    "OnlineOmpcSolver",
    "init_trial",
    "process_constraint",
    "dual_certificate",
    "solve_online",
]

_E = float(np.e)

# floating-point guard: a row counts as satisfied at 1 - SAT_SLACK
SAT_SLACK = 1e-12


def mu_for(m: int) -> float:
    """Per-phase growth cap ``1 + 1/(3 ln(e m))``."""
    return 1.0 + 1.0 / (3.0 * math.log(math.e * m))


def fail_level_for(m: int) -> float:
    """Scaled-violation threshold ``3 ln(e m)`` that aborts a trial."""
    return 3.0 * math.log(math.e * m)


@dataclass
class OmpcTrialState:
    """Mutable per-trial solver state.

    ``pvx`` caches the scaled packing image of ``x``; ``z_running`` holds,
    per packing row, the running maximum of its softmax weight over all
    snapshots (initial point and every phase end); ``max_scaled_violation``
    tracks the largest scaled violation seen at those snapshots.
    """

    system: PackingSystem
    gamma: float
    mu: float
    x: np.ndarray
    pvx: np.ndarray
    z_running: np.ndarray
    duals_y: dict[int, float]
    max_scaled_violation: float
    phase_index: int = 0
    failed: bool = False
    rows_seen: list[int] = field(default_factory=list)
    phases_per_row: dict[int, int] = field(default_factory=dict)
    d_est: list[float] = field(default_factory=list)
    d_dual: list[float] = field(default_factory=list)

    @property
    def scaled_matrix(self) -> np.ndarray:
        return self.system.scaled(self.gamma)

    def lambda_value(self) -> float:
        """Unscaled worst packing row value of this trial's variables."""
        return violation(self.system, self.x)


def init_trial(
    system: PackingSystem,
    gamma: float,
    first_row: CoveringRow,
) -> OmpcTrialState:
    """Fresh trial with every variable at ``1 / (d1^2 rho kappa1)``.

    ``d1`` is the largest support over the packing rows and the first
    covering row; ``kappa1`` the first row's largest coefficient.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    d1 = max(system.d, first_row.nnz)
    kappa1 = first_row.max_coeff
    x0 = 1.0 / (d1 * d1 * system.rho * kappa1)
    x = np.full(system.n, x0)
    pt = system.scaled(gamma)
    pvx = pt @ x
    hi = pvx.max()
    w = np.exp(pvx - hi)
    z = w / w.sum()
    return OmpcTrialState(
        system=system,
        gamma=float(gamma),
        mu=mu_for(system.m),
        x=x,
        pvx=pvx,
        z_running=z,
        duals_y={},
        max_scaled_violation=float(hi),
    )


def _phase_cap(state: OmpcTrialState, row: CoveringRow) -> int:
    # provable budget: each phase multiplies some variable by mu, each
    # variable moves between its initial value and mu / min c; pad it.
    sys_ = state.system
    d1sq_rk = 1.0 / state.x.min() if state.x.min() > 0 else 1.0
    span = state.mu * max(d1sq_rk, 1.0) / min(row.min_coeff, 1.0)
    per_var = math.log(max(span, 2.0)) / math.log(state.mu)
    return max(64, int(4 * sys_.n * math.ceil(per_var)))


def process_constraint(
    state: OmpcTrialState, row: CoveringRow, row_id: int | None = None
) -> bool:
    """Run phases until the row is met; returns False if the trial failed.

    Variables whose packing column is all zero carry no penalty weight, so
    one of them (lowest index) is raised outright to cover the row.
    """
    if state.failed:
        raise RuntimeError("trial already failed; start a new trial")
    if np.any(row.indices >= state.system.n):
        raise ValueError("covering row references unknown variables")
    if row_id is None:
        row_id = len(state.rows_seen)
    state.rows_seen.append(row_id)
    state.duals_y.setdefault(row_id, 0.0)

    col_nnz = state.system.column_nonzeros()
    zero_cols = [t for t in range(row.nnz) if col_nnz[row.indices[t]] == 0]
    if zero_cols and row.coverage(state.x) < 1.0 - SAT_SLACK:
        t = zero_cols[0]
        j = int(row.indices[t])
        state.x[j] = max(state.x[j], 1.0 / row.values[t])
        state.phases_per_row[row_id] = state.phases_per_row.get(row_id, 0)
        return True

    pt = state.scaled_matrix
    cap = _phase_cap(state, row)
    fail_level = fail_level_for(state.system.m)
    while True:
        status, phases, dual_inc, max_tl, d_est, d_dual = _kernels.ompc_row_phases(
            pt,
            row.indices,
            row.values,
            state.x,
            state.pvx,
            state.z_running,
            state.max_scaled_violation,
            state.mu,
            fail_level,
            cap,
            SAT_SLACK,
        )
        state.phase_index += phases
        state.phases_per_row[row_id] = state.phases_per_row.get(row_id, 0) + phases
        state.duals_y[row_id] += dual_inc
        state.max_scaled_violation = float(max_tl)
        state.d_est.extend(d_est.tolist())
        state.d_dual.extend(d_dual.tolist())
        if status == _kernels.CAP_HIT:
            cap *= 2
            continue
        if status == _kernels.FAILED:
            state.failed = True
            return False
        return True


def dual_certificate(
    state: OmpcTrialState, sigma: float
) -> tuple[dict[int, float], np.ndarray]:
    """Scale the trial's duals into a feasible point of the dual program.

    With ``nu = ln(e m) + max`` scaled violation, returns
    ``y * gamma / (sigma nu)`` (keyed by covering-row id) and ``z / nu``;
    the pair satisfies both dual constraint families.
    """
    if not state.rows_seen:
        raise ValueError("trial processed no covering rows")
    nu = math.log(math.e * state.system.m) + state.max_scaled_violation
    scale = state.gamma / (sigma * nu)
    y_scaled = {i: v * scale for i, v in state.duals_y.items()}
    return y_scaled, state.z_running / nu


@dataclass(frozen=True)
class TrialRecord:
    gamma: float
    lambda_f: float
    failed: bool
    phases: int
    state: OmpcTrialState


@dataclass(frozen=True)
class OmpcSolution:
    x_total: np.ndarray
    lambda_value: float
    trials: tuple[TrialRecord, ...]

    @property
    def trial_count(self) -> int:
        return len(self.trials)


class OnlineOmpcSolver:
    """Streaming interface: feed covering rows, read back the aggregate x.

    The first row fixes ``d1``/``kappa1`` and the starting scale
    ``gamma = max p_kj / (d1 rho kappa1)``; afterwards every failed trial
    doubles ``gamma`` and replays the row that broke it.  Rows satisfied in
    earlier trials keep their coverage through the aggregate.
    """

    def __init__(self, system: PackingSystem):
        self.system = system
        self._x_closed = np.zeros(system.n)
        self._records: list[TrialRecord] = []
        self._state: OmpcTrialState | None = None
        self._first_row: CoveringRow | None = None
        self._rows_offered = 0
        # running stream statistics (post-hoc sigma inputs)
        self._cov_max_nnz = 0
        self._cov_cmin = math.inf
        self._cov_cmax = 0.0

    # -- stream statistics ------------------------------------------------

    @property
    def kappa(self) -> float:
        """Max/min nonzero covering coefficient over the rows seen so far."""
        if self._rows_offered == 0:
            return 1.0
        return self._cov_cmax / self._cov_cmin

    @property
    def d(self) -> int:
        """Largest support over packing rows and covering rows seen so far."""
        return max(self.system.d, self._cov_max_nnz)

    @property
    def mu(self) -> float:
        return mu_for(self.system.m)

    @property
    def sigma(self) -> float:
        """``e^2 ln(mu d^2 rho kappa)`` with the running d and kappa."""
        return (_E**2) * math.log(
            self.mu * self.d**2 * self.system.rho * self.kappa
        )

    # -- online protocol ---------------------------------------------------

    @property
    def x_total(self) -> np.ndarray:
        if self._state is None:
            return self._x_closed.copy()
        return self._x_closed + self._state.x

    def offer(self, row: CoveringRow) -> np.ndarray:
        """Process one covering row; returns the aggregate variable vector."""
        if self._state is None:
            self._first_row = row
            d1 = max(self.system.d, row.nnz)
            gamma0 = self.system.matrix.max() / (d1 * self.system.rho * row.max_coeff)
            self._state = init_trial(self.system, gamma0, row)
        row_id = self._rows_offered
        self._rows_offered += 1
        self._cov_max_nnz = max(self._cov_max_nnz, row.nnz)
        self._cov_cmin = min(self._cov_cmin, row.min_coeff)
        self._cov_cmax = max(self._cov_cmax, row.max_coeff)
        while not process_constraint(self._state, row, row_id):
            self._retire(failed=True)
            self._state = init_trial(
                self.system, self._records[-1].gamma * 2.0, self._first_row
            )
        return self.x_total

    def _retire(self, failed: bool) -> None:
        st = self._state
        rec = TrialRecord(
            gamma=st.gamma,
            lambda_f=st.lambda_value(),
            failed=failed,
            phases=st.phase_index,
            state=st,
        )
        self._records.append(rec)
        self._x_closed += st.x
        self._state = None

    def finish(self) -> OmpcSolution:
        """Close the active trial and package the run."""
        if self._state is not None:
            self._retire(failed=False)
        x = self._x_closed.copy()
        return OmpcSolution(
            x_total=x,
            lambda_value=violation(self.system, x),
            trials=tuple(self._records),
        )

    @property
    def trials(self) -> tuple[TrialRecord, ...]:
        return tuple(self._records)


def solve_online(
    system: PackingSystem, rows: "list[CoveringRow]"
) -> OmpcSolution:
    """Feed an ordered stream of covering rows through the doubling solver."""
    rows = list(rows)
    if not rows:
        raise ValueError("covering stream must be nonempty")
    solver = OnlineOmpcSolver(system)
    for row in rows:
        solver.offer(row)
    return solver.finish()
