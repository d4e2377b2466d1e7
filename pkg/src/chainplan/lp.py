"""Deterministic LP planning over a chain horizon.

The program chooses production P[s,d], shipments T[l,d] (denominated in the
units that enter the pipeline, i.e. product units downstream of a factory),
end-of-step stocks S[n,i], processed raw F[f,i], discarded overflow De[n,i]
and unmet demand Dd[r,i] to minimize total cost over steps 1..h, given a
deterministic demand table and a lead-time table (one lead per dispatch).

Constraints per node and step:
  * stock balance: S[n,i] = S[n,i-1] + arrivals - De[n,i]
                   - ratio_n * outbound_n(i) - demand + Dd[n,i]
  * post-arrival window: 0 <= S[n,i-1] + arrivals - De[n,i] <= stock_cap_n
  * processing: F[f,i] = ratio_f * outbound_f(i), F[f,i] <= processing_cap_f
  * bounds: 0 <= P <= production_cap, 0 <= T <= transport_cap,
    0 <= Dd <= demand, S >= 0, De >= 0

Arrivals at step i are the variables dispatched at i - lead plus the chain's
initial pipeline contents (constants, due steps 1..k). Costs are charged at
dispatch for P, T and F, per step for S, De and Dd; the sunk cost of initial
stock and initial pipeline material is excluded from the objective, matching
the simulator's accounting.

The builder produces a generic LpInstance; solve_lp wraps a sparse
dual-simplex/IPM solver (scipy HiGHS) behind that contract.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from . import stochastic
from .chain import ChainConfig, ScenarioSpec
from .simulator import EpisodeRealization


class SolverError(RuntimeError):
    """The LP solver failed for a reason other than infeasible/unbounded."""


@dataclass
class LpInstance:
    """min c@x + offset  s.t.  a_ub@x <= b_ub, a_eq@x = b_eq, lo <= x <= hi."""

    c: np.ndarray
    a_ub: sp.spmatrix | np.ndarray | None = None
    b_ub: np.ndarray | None = None
    a_eq: sp.spmatrix | np.ndarray | None = None
    b_eq: np.ndarray | None = None
    bounds: np.ndarray | None = None  # (n, 2), +-inf allowed
    offset: float = 0.0
    var_index: dict = field(default_factory=dict)  # label -> column
    meta: dict = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return len(self.c)


@dataclass
class LpSolution:
    status: str  # "optimal", "infeasible" or "unbounded"
    objective: float | None
    x: np.ndarray | None
    instance: LpInstance

    def value(self, label) -> float:
        """Value of one labeled variable in an optimal solution."""
        return float(self.x[self.instance.var_index[label]])


def solve_lp(instance: LpInstance) -> LpSolution:
    """Solve an LpInstance; statuses other than optimal/infeasible/unbounded
    raise SolverError."""
    bounds = instance.bounds
    if bounds is None:
        bounds = np.tile([0.0, np.inf], (instance.n_vars, 1))
    res = linprog(instance.c, A_ub=instance.a_ub, b_ub=instance.b_ub,
                  A_eq=instance.a_eq, b_eq=instance.b_eq,
                  bounds=bounds, method="highs")
    if res.status == 0:
        return LpSolution("optimal", float(res.fun) + instance.offset,
                          np.asarray(res.x), instance)
    if res.status == 2:
        return LpSolution("infeasible", None, None, instance)
    if res.status == 3:
        return LpSolution("unbounded", None, None, instance)
    raise SolverError(f"solver failed (status {res.status}): {res.message}")


# ---------------------------------------------------------------------------
# deterministic planning worlds
# ---------------------------------------------------------------------------

def forecast_tables(scenario: ScenarioSpec):
    """Average-world tables: unperturbed demands, average lead everywhere.

    Returns (demands (h, R), production_leads (h, n_sup), transport_leads
    (h, n_links)); row i-1 describes step/dispatch i.
    """
    chain = scenario.chain
    h = chain.horizon
    steps = np.arange(1, h + 1)
    base = stochastic.base_demand(scenario.demand, steps)
    demands = np.clip(
        np.broadcast_to(base[:, None], (h, len(chain.retailers))).copy(),
        scenario.demand.clip_min, scenario.demand.clip_max)
    avg = int(scenario.lead_time.average)
    prod = np.full((h, len(chain.suppliers)), avg, dtype=np.int64)
    tran = np.full((h, chain.n_links), avg, dtype=np.int64)
    return demands, prod, tran


def realized_tables(scenario: ScenarioSpec, realization: EpisodeRealization):
    """Tables of one realized episode (perfect information)."""
    h = scenario.chain.horizon
    return (realization.demands[1:h + 1],
            realization.production_leads[1:h + 1],
            realization.transport_leads[1:h + 1])


# ---------------------------------------------------------------------------
# chain LP builder
# ---------------------------------------------------------------------------

def build_lp(scenario: ScenarioSpec, demands: np.ndarray,
             production_leads: np.ndarray, transport_leads: np.ndarray) -> LpInstance:
    """Assemble the horizon LP for given demand and lead-time tables."""
    chain = scenario.chain
    h = chain.horizon
    q = chain.n_nodes
    suppliers = chain.suppliers
    retailers = chain.retailers
    n_sup = len(suppliers)
    n_links = chain.n_links
    factories = np.flatnonzero(chain.is_factory)
    n_fac = len(factories)
    link_src = [src for src, _ in chain.links]
    link_dst = [dst for _, dst in chain.links]
    ratio = chain.processing_ratio

    demands = np.asarray(demands, dtype=np.float64)
    if demands.shape != (h, len(retailers)):
        raise ValueError(f"demand table must have shape ({h}, {len(retailers)})")
    production_leads = np.asarray(production_leads, dtype=np.int64)
    transport_leads = np.asarray(transport_leads, dtype=np.int64)

    # column layout: S | P | T | F | De | Dd, entity-major, step-minor
    off_s = 0
    off_p = off_s + q * h
    off_t = off_p + n_sup * h
    off_f = off_t + n_links * h
    off_de = off_f + n_fac * h
    off_dd = off_de + q * h
    n_vars = off_dd + len(retailers) * h
    fac_pos = {int(f): k for k, f in enumerate(factories)}
    ret_pos = {int(r): k for k, r in enumerate(retailers)}
    sup_pos = {int(s): k for k, s in enumerate(suppliers)}

    def col_s(n, i):
        return off_s + n * h + i - 1

    def col_p(s_idx, d):
        return off_p + s_idx * h + d - 1

    def col_t(l, d):
        return off_t + l * h + d - 1

    def col_f(f, i):
        return off_f + fac_pos[f] * h + i - 1

    def col_de(n, i):
        return off_de + n * h + i - 1

    def col_dd(r_idx, i):
        return off_dd + r_idx * h + i - 1

    var_index = {}
    for n in range(q):
        for i in range(1, h + 1):
            var_index[("S", n, i)] = col_s(n, i)
            var_index[("De", n, i)] = col_de(n, i)
    for k, s in enumerate(suppliers):
        for d in range(1, h + 1):
            var_index[("P", int(s), d)] = col_p(k, d)
    for l in range(n_links):
        for d in range(1, h + 1):
            var_index[("T", l, d)] = col_t(l, d)
    for f in factories:
        for i in range(1, h + 1):
            var_index[("F", int(f), i)] = col_f(int(f), i)
    for k, r in enumerate(retailers):
        for i in range(1, h + 1):
            var_index[("Dd", int(r), i)] = col_dd(k, i)

    # variable arrivals bucketed by (node, arrival step); dispatch d >= 1
    arrivals = {}
    for k in range(n_sup):
        for d in range(1, h + 1):
            i_arr = d + int(production_leads[d - 1, k])
            if i_arr <= h:
                arrivals.setdefault((int(suppliers[k]), i_arr), []).append(col_p(k, d))
    for l in range(n_links):
        for d in range(1, h + 1):
            i_arr = d + int(transport_leads[d - 1, l])
            if i_arr <= h:
                arrivals.setdefault((link_dst[l], i_arr), []).append(col_t(l, d))

    # constant arrivals from the initial pipelines, due steps 1..k0
    pinned = np.zeros((q, h + 1))
    k0 = chain.initial_production.shape[1]
    for k in range(n_sup):
        for a in range(1, min(k0, h) + 1):
            pinned[suppliers[k], a] += chain.initial_production[k, a - 1]
    for l in range(n_links):
        for a in range(1, min(chain.initial_transport.shape[1], h) + 1):
            pinned[link_dst[l], a] += chain.initial_transport[l, a - 1]

    out_links = {n: chain.outgoing(n) for n in range(q)}

    eq_rows, eq_cols, eq_vals, eq_rhs = [], [], [], []
    ub_rows, ub_cols, ub_vals, ub_rhs = [], [], [], []

    def add_eq(cols, vals, rhs):
        r = len(eq_rhs)
        eq_rows.extend([r] * len(cols))
        eq_cols.extend(cols)
        eq_vals.extend(vals)
        eq_rhs.append(rhs)

    def add_ub(cols, vals, rhs):
        r = len(ub_rhs)
        ub_rows.extend([r] * len(cols))
        ub_cols.extend(cols)
        ub_vals.extend(vals)
        ub_rhs.append(rhs)

    for n in range(q):
        is_ret = n in ret_pos
        for i in range(1, h + 1):
            arr_cols = arrivals.get((n, i), [])
            rhs_const = pinned[n, i] + (chain.initial_stock[n] if i == 1 else 0.0)
            d_ni = float(demands[i - 1, ret_pos[n]]) if is_ret else 0.0

            # balance: S_i - S_{i-1} - arrivals + De + ratio*out - Dd = const - d
            cols = [col_s(n, i)]
            vals = [1.0]
            if i > 1:
                cols.append(col_s(n, i - 1))
                vals.append(-1.0)
            cols.extend(arr_cols)
            vals.extend([-1.0] * len(arr_cols))
            cols.append(col_de(n, i))
            vals.append(1.0)
            for l in out_links[n]:
                cols.append(col_t(l, i))
                vals.append(float(ratio[n]))
            if is_ret:
                cols.append(col_dd(ret_pos[n], i))
                vals.append(-1.0)
            add_eq(cols, vals, rhs_const - d_ni)

            # post-arrival window: 0 <= S_{i-1} + arrivals - De <= cap
            wcols = []
            wvals = []
            if i > 1:
                wcols.append(col_s(n, i - 1))
                wvals.append(1.0)
            wcols.extend(arr_cols)
            wvals.extend([1.0] * len(arr_cols))
            wcols.append(col_de(n, i))
            wvals.append(-1.0)
            cap = float(chain.stock_cap[n])
            if np.isfinite(cap):
                add_ub(wcols, wvals, cap - rhs_const)
            add_ub(wcols, [-v for v in wvals], rhs_const)

    for f in factories:
        f = int(f)
        for i in range(1, h + 1):
            cols = [col_f(f, i)] + [col_t(l, i) for l in out_links[f]]
            vals = [1.0] + [-float(ratio[f])] * len(out_links[f])
            add_eq(cols, vals, 0.0)

    # objective and bounds
    c = np.zeros(n_vars)
    bounds = np.empty((n_vars, 2))
    bounds[:, 0] = 0.0
    bounds[:, 1] = np.inf
    for n in range(q):
        c[col_s(n, 1):col_s(n, h) + 1] = chain.stock_cost[n]
        c[col_de(n, 1):col_de(n, h) + 1] = chain.excess_penalty
    for k, s in enumerate(suppliers):
        c[col_p(k, 1):col_p(k, h) + 1] = chain.production_cost[k]
        bounds[col_p(k, 1):col_p(k, h) + 1, 1] = chain.production_cap[k]
    for l in range(n_links):
        c[col_t(l, 1):col_t(l, h) + 1] = chain.transport_cost
        bounds[col_t(l, 1):col_t(l, h) + 1, 1] = chain.transport_cap[link_src[l]]
    for f in factories:
        f = int(f)
        c[col_f(f, 1):col_f(f, h) + 1] = chain.processing_cost[f]
        bounds[col_f(f, 1):col_f(f, h) + 1, 1] = chain.processing_cap[f]
    for k, r in enumerate(retailers):
        cols = slice(col_dd(k, 1), col_dd(k, h) + 1)
        c[cols] = chain.unmet_penalty
        bounds[cols, 1] = demands[:, k]

    a_eq = sp.csr_matrix((eq_vals, (eq_rows, eq_cols)), shape=(len(eq_rhs), n_vars))
    a_ub = sp.csr_matrix((ub_vals, (ub_rows, ub_cols)), shape=(len(ub_rhs), n_vars))
    return LpInstance(c=c, a_ub=a_ub, b_ub=np.asarray(ub_rhs),
                      a_eq=a_eq, b_eq=np.asarray(eq_rhs), bounds=bounds,
                      var_index=var_index,
                      meta={"scenario": scenario.name, "horizon": h,
                            "kind": "chain-plan"})


# ---------------------------------------------------------------------------
# plans, agents and bounds
# ---------------------------------------------------------------------------

@dataclass
class LpPlan:
    """Dispatch schedule extracted from an optimal chain LP solution.

    Row d holds the quantities dispatched at step d (row 0 unused);
    shipments are raw-denominated at the source, ready for the simulator.
    """

    production: np.ndarray      # (h+1, n_suppliers)
    shipments_raw: np.ndarray   # (h+1, n_links)
    objective: float
    scenario: str = ""

    def quantities_for(self, step: int):
        return self.production[step], self.shipments_raw[step]


def extract_lp_agent(scenario: ScenarioSpec, solution: LpSolution) -> LpPlan:
    """Turn an optimal LP solution into a replayable dispatch plan."""
    if solution.status != "optimal":
        raise SolverError(f"cannot extract a plan from a {solution.status} solution")
    chain = scenario.chain
    h = chain.horizon
    production = np.zeros((h + 1, len(chain.suppliers)))
    shipments = np.zeros((h + 1, chain.n_links))
    x = solution.x
    idx = solution.instance.var_index
    for k, s in enumerate(chain.suppliers):
        for d in range(1, h + 1):
            production[d, k] = x[idx[("P", int(s), d)]]
    for l, (src, _) in enumerate(chain.links):
        r = float(chain.processing_ratio[src])
        for d in range(1, h + 1):
            shipments[d, l] = r * x[idx[("T", l, d)]]
    np.maximum(production, 0.0, out=production)  # scrub solver -1e-13 noise
    np.maximum(shipments, 0.0, out=shipments)
    return LpPlan(production=production, shipments_raw=shipments,
                  objective=float(solution.objective), scenario=scenario.name)


def forecast_plan(scenario: ScenarioSpec) -> LpPlan:
    """Solve the average-world LP and extract the forecast-driven plan."""
    instance = build_lp(scenario, *forecast_tables(scenario))
    solution = solve_lp(instance)
    if solution.status != "optimal":
        raise SolverError(f"forecast LP is {solution.status} for {scenario.name}")
    return extract_lp_agent(scenario, solution)


def perfect_information_bound(scenario: ScenarioSpec,
                              realization: EpisodeRealization) -> float:
    """Optimal cost knowing the episode's demands and lead times upfront.

    Lower-bounds the realized cost of any agent on that episode.
    """
    instance = build_lp(scenario, *realized_tables(scenario, realization))
    solution = solve_lp(instance)
    if solution.status != "optimal":
        raise SolverError(f"perfect-information LP is {solution.status}")
    return float(solution.objective)


def write_lp_text(instance: LpInstance, path: str):
    """Export an instance in LP text format (CPLEX dialect)."""
    inv = {col: label for label, col in instance.var_index.items()}

    def name(j):
        label = inv.get(j)
        if label is None:
            return f"x{j}"
        return "_".join(str(p) for p in label)

    def expr(cols, vals):
        parts = []
        for c_, v in zip(cols, vals):
            sign = "+" if v >= 0 else "-"
            parts.append(f" {sign} {abs(v):.12g} {name(c_)}")
        return "".join(parts)

    lines = ["Minimize", " obj:" + expr(np.flatnonzero(instance.c),
                                        instance.c[np.flatnonzero(instance.c)])]
    lines.append("Subject To")
    if instance.a_eq is not None and instance.a_eq.shape[0]:
        a = sp.csr_matrix(instance.a_eq)
        for r in range(a.shape[0]):
            sl = slice(a.indptr[r], a.indptr[r + 1])
            lines.append(f" eq{r}:" + expr(a.indices[sl], a.data[sl])
                         + f" = {instance.b_eq[r]:.12g}")
    if instance.a_ub is not None and instance.a_ub.shape[0]:
        a = sp.csr_matrix(instance.a_ub)
        for r in range(a.shape[0]):
            sl = slice(a.indptr[r], a.indptr[r + 1])
            lines.append(f" ub{r}:" + expr(a.indices[sl], a.data[sl])
                         + f" <= {instance.b_ub[r]:.12g}")
    lines.append("Bounds")
    bounds = instance.bounds
    if bounds is None:
        bounds = np.tile([0.0, np.inf], (instance.n_vars, 1))
    for j in range(instance.n_vars):
        lo, hi = bounds[j]
        hi_s = "+inf" if not np.isfinite(hi) else f"{hi:.12g}"
        lines.append(f" {lo:.12g} <= {name(j)} <= {hi_s}")
    lines.append("End")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
