"""Capacitated multi-echelon supply-chain simulator.

Each step runs one fixed cycle:

  (a) advance the clock
  (b) land pipeline arrivals; anything above stock capacity is discarded
      at the excess penalty
  (c) retailers meet the step's demand from stock, shortfall is penalized
  (d) execute the action: suppliers start production batches and every
      non-retailer node ships to its successors; factories consume
      processing_ratio raw units per product unit shipped and pay the
      processing cost; production, processing and transport are all
      charged at dispatch time
  (e) stock cost accrues on end-of-step stocks
  (f) the next step's demands are drawn

Shipment and production quantities are fixed at execution time (d), against
the stocks left after arrivals, discards and demand of the same step; the
[-1, 1] action interface in `codec` scales cuts by exactly those stocks.

Demands and lead times for a whole episode are a pure function of
(scenario, seed), so different agents can be compared on identical
realizations and a planner can be handed the realization afterwards.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from . import stochastic
from .chain import ChainConfig, ScenarioSpec, validate_scenario
from .codec import Codec, RawAction

COST_TYPES = ("production", "processing", "transport", "stock", "excess", "unmet")


class ConfigError(ValueError):
    """Scenario or chain configuration violates the model contract."""


class ActionError(ValueError):
    """Action violates feasibility bounds at execution time."""


@dataclass(frozen=True)
class EpisodeRealization:
    """All randomness of one episode, indexed by step (row 0 unused)."""

    demands: np.ndarray          # (h+2, n_retailers), steps 1..h+1
    production_leads: np.ndarray  # (h+1, n_suppliers), dispatch steps 1..h
    transport_leads: np.ndarray   # (h+1, n_links), dispatch steps 1..h

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.demands).tobytes())
        h.update(np.ascontiguousarray(self.production_leads).tobytes())
        h.update(np.ascontiguousarray(self.transport_leads).tobytes())
        return h.hexdigest()


def realize_episode(scenario: ScenarioSpec, seed: int) -> EpisodeRealization:
    """Draw one episode's demands and lead times from labeled substreams."""
    chain = scenario.chain
    h = chain.horizon
    demand_rows = stochastic.demand_series(
        scenario.demand, seed, chain.retailers, np.arange(0, h + 2))
    demand_rows[0] = 0.0
    prod = stochastic.lead_series(
        scenario.lead_time, seed, stochastic.PRODUCTION_LEAD,
        chain.suppliers, np.arange(0, h + 1))
    tran = stochastic.lead_series(
        scenario.lead_time, seed, stochastic.TRANSPORT_LEAD,
        np.arange(chain.n_links), np.arange(0, h + 1))
    return EpisodeRealization(demands=demand_rows, production_leads=prod,
                              transport_leads=tran)


@dataclass
class ChainState:
    """Mutable simulation state between steps."""

    t: int
    stocks: np.ndarray           # per node
    production_pipe: np.ndarray  # (n_suppliers, l_max), col k due at t+1+k
    transport_pipe: np.ndarray   # (n_links, l_max), col k due at t+1+k
    next_demands: np.ndarray     # demand of step t+1, per retailer


@dataclass
class StepOutcome:
    observation: np.ndarray
    reward: float
    costs: dict
    done: bool
    trace: dict | None = None


class SupplyChainEnv:
    """One scenario's episode simulator with a [-1, 1] action interface."""

    def __init__(self, scenario: ScenarioSpec, tracing: bool = False,
                 factory_cuts: str = "raw"):
        errs = validate_scenario(scenario)
        if errs:
            raise ConfigError("invalid scenario: " + "; ".join(errs))
        self.scenario = scenario
        self.chain = scenario.chain
        self.codec = Codec(scenario.chain, scenario.demand, factory_cuts=factory_cuts)
        self.tracing = tracing
        chain = self.chain
        self._suppliers = chain.suppliers
        self._retailers = chain.retailers
        self._link_src = np.array([src for src, _ in chain.links], dtype=np.int64)
        self._link_dst = np.array([dst for _, dst in chain.links], dtype=np.int64)
        self._src_ratio = chain.processing_ratio[self._link_src]
        self._l_max = int(scenario.lead_time.maximum)
        self.state: ChainState | None = None
        self.realization: EpisodeRealization | None = None
        self.episode_costs: dict = {}
        self.trace_records: list = []

    @property
    def observation_dim(self) -> int:
        return self.codec.obs_dim

    @property
    def action_dim(self) -> int:
        return self.codec.action_dim

    def reset(self, seed: int) -> np.ndarray:
        """Start a fresh episode; returns the physical observation at t=0."""
        chain = self.chain
        self.realization = realize_episode(self.scenario, seed)
        prod_pipe = np.zeros((len(self._suppliers), self._l_max))
        k = chain.initial_production.shape[1]
        prod_pipe[:, :k] = chain.initial_production
        tran_pipe = np.zeros((chain.n_links, self._l_max))
        tran_pipe[:, :k] = chain.initial_transport
        self.state = ChainState(
            t=0,
            stocks=chain.initial_stock.copy(),
            production_pipe=prod_pipe,
            transport_pipe=tran_pipe,
            next_demands=self.realization.demands[1].copy(),
        )
        self.episode_costs = {name: 0.0 for name in COST_TYPES}
        self.trace_records = []
        return self.observe()

    def observe(self) -> np.ndarray:
        """Physical observation: stocks, per-node (due next, due later)
        pipeline totals, next-step demands, remaining steps."""
        st = self.state
        chain = self.chain
        q = chain.n_nodes
        obs = np.empty(self.codec.obs_dim)
        obs[:q] = st.stocks
        nxt = np.zeros(q)
        later = np.zeros(q)
        nxt[self._suppliers] = st.production_pipe[:, 0]
        later[self._suppliers] = st.production_pipe[:, 1:].sum(axis=1)
        np.add.at(nxt, self._link_dst, st.transport_pipe[:, 0])
        np.add.at(later, self._link_dst, st.transport_pipe[:, 1:].sum(axis=1))
        obs[q:3 * q:2] = nxt
        obs[q + 1:3 * q:2] = later
        obs[3 * q:3 * q + len(self._retailers)] = st.next_demands
        obs[-1] = chain.horizon - st.t
        return obs

    # ---- stepping ----

    def step(self, action: np.ndarray) -> StepOutcome:
        """Advance one step on a [-1, 1]^action_dim action vector."""
        action = np.asarray(action, dtype=np.float64)
        return self._advance(lambda stocks: self.codec.decode_action(action, stocks))

    def step_raw(self, action: RawAction) -> StepOutcome:
        """Advance one step on explicit quantities, validated at execution."""
        def decide(stocks):
            self._validate_action(action, stocks)
            return action
        return self._advance(decide)

    def step_plan(self, production: np.ndarray, shipments: np.ndarray) -> StepOutcome:
        """Advance one step on planned quantities, truncated proportionally
        to live availability and round-tripped through the codec."""
        def decide(stocks):
            raw = self._truncate_plan(production, shipments, stocks)
            encoded = self.codec.encode_plan(raw.production, raw.shipments, stocks)
            return self.codec.decode_action(encoded, stocks)
        return self._advance(decide)

    def _truncate_plan(self, production, shipments, stocks) -> RawAction:
        chain = self.chain
        production = np.minimum(np.asarray(production, dtype=np.float64),
                                chain.production_cap)
        shipments = np.asarray(shipments, dtype=np.float64).copy()
        for node in range(chain.n_nodes):
            out = chain.outgoing(node)
            if not out:
                continue
            base = self.codec.raw_outbound_limit(node, stocks)
            total = shipments[out].sum()
            if total > base:
                shipments[out] *= 0.0 if total == 0 else base / total
        return RawAction(production=production, shipments=shipments)

    def _validate_action(self, action: RawAction, stocks: np.ndarray):
        chain = self.chain
        production = np.asarray(action.production, dtype=np.float64)
        shipments = np.asarray(action.shipments, dtype=np.float64)
        if production.shape != (len(self._suppliers),):
            raise ActionError("production vector has wrong length")
        if shipments.shape != (chain.n_links,):
            raise ActionError("shipment vector has wrong length")
        if np.any(production < 0) or np.any(shipments < 0):
            raise ActionError("negative production or shipment quantity")
        over = production > chain.production_cap * (1 + 1e-12) + 1e-9
        if np.any(over):
            s = int(np.flatnonzero(over)[0])
            raise ActionError(f"production above capacity for supplier {s}")
        for node in range(chain.n_nodes):
            out = chain.outgoing(node)
            if not out:
                continue
            base = self.codec.raw_outbound_limit(node, stocks)
            total = shipments[out].sum()
            if total > base * (1 + 1e-12) + 1e-9:
                raise ActionError(
                    f"outbound quantity {total:g} above available {base:g} at node {node}")

    def _advance(self, decide) -> StepOutcome:
        chain = self.chain
        st = self.state
        if st is None:
            raise RuntimeError("reset() must be called before step()")
        if st.t >= chain.horizon:
            raise RuntimeError("episode is finished; call reset()")
        t = st.t + 1
        st.t = t

        # (b) pipeline arrivals, overflow discarded at the excess penalty
        stocks_before = st.stocks.copy() if self.tracing else None
        arrived = np.zeros(chain.n_nodes)
        arrived[self._suppliers] = st.production_pipe[:, 0]
        np.add.at(arrived, self._link_dst, st.transport_pipe[:, 0])
        st.production_pipe[:, :-1] = st.production_pipe[:, 1:]
        st.production_pipe[:, -1] = 0.0
        st.transport_pipe[:, :-1] = st.transport_pipe[:, 1:]
        st.transport_pipe[:, -1] = 0.0
        post = st.stocks + arrived
        discarded = np.maximum(post - chain.stock_cap, 0.0)
        st.stocks = np.minimum(post, chain.stock_cap)

        # (c) retailers meet demand
        demand = st.next_demands
        met = np.minimum(st.stocks[self._retailers], demand)
        st.stocks[self._retailers] -= met
        unmet = demand - met

        # (d) execute the action against post-arrival post-demand stocks
        action = decide(st.stocks)
        production = np.asarray(action.production, dtype=np.float64)
        shipments = np.asarray(action.shipments, dtype=np.float64)
        consumed = np.zeros(chain.n_nodes)
        np.add.at(consumed, self._link_src, shipments)
        st.stocks = st.stocks - consumed
        np.maximum(st.stocks, 0.0, out=st.stocks)  # guards -1e-16 round-off only
        leads_p = self.realization.production_leads[t]
        for i, s in enumerate(self._suppliers):
            if production[i] > 0:
                st.production_pipe[i, leads_p[i] - 1] += production[i]
        shipped_units = shipments / self._src_ratio
        leads_t = self.realization.transport_leads[t]
        for l in range(chain.n_links):
            if shipped_units[l] > 0:
                st.transport_pipe[l, leads_t[l] - 1] += shipped_units[l]

        # (e) cost accounting; production/processing/transport at dispatch
        factory_src = chain.is_factory[self._link_src]
        costs = {
            "production": float(chain.production_cost @ production),
            "processing": float((chain.processing_cost[self._link_src] * shipments)[factory_src].sum()),
            "transport": float(chain.transport_cost * shipped_units.sum()),
            "stock": float(chain.stock_cost @ st.stocks),
            "excess": float(chain.excess_penalty * discarded.sum()),
            "unmet": float(chain.unmet_penalty * unmet.sum()),
        }
        reward = -(costs["production"] + costs["processing"] + costs["transport"]
                   + costs["stock"] + costs["excess"] + costs["unmet"])
        for name in COST_TYPES:
            self.episode_costs[name] += costs[name]

        # (f) draw the next step's demands
        st.next_demands = self.realization.demands[t + 1].copy()

        done = t >= chain.horizon
        trace = None
        if self.tracing:
            trace = {
                "step": t,
                "stocks_before": stocks_before,
                "arrived": arrived,
                "discarded": discarded,
                "demand": demand.copy(),
                "met": met,
                "unmet": unmet,
                "production": production.copy(),
                "shipments": shipments.copy(),
                "shipped_units": shipped_units,
                "consumed": consumed,
                "stocks_end": st.stocks.copy(),
                "costs": dict(costs),
                "reward": reward,
            }
            self.trace_records.append(trace)
        return StepOutcome(observation=self.observe(), reward=reward,
                           costs=costs, done=done, trace=trace)

    @property
    def total_cost(self) -> float:
        return float(sum(self.episode_costs.values()))


def write_trace_csv(env: SupplyChainEnv, path: str):
    """Per-episode trace export: one row per (step, node)."""
    import csv

    chain = env.chain
    names = chain.node_names
    sup_pos = {int(s): i for i, s in enumerate(chain.suppliers)}
    ret_pos = {int(r): i for i, r in enumerate(chain.retailers)}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("# chainplan trace v1: quantities per step and node; "
                 "cost columns are node-attributed, reward is the full step reward\n")
        writer = csv.writer(fh)
        writer.writerow(["step", "node", "stock", "arrived", "shipped", "produced",
                         "demand", "unmet", "discarded",
                         "cost_production", "cost_processing", "cost_transport",
                         "cost_stock", "cost_excess", "cost_unmet", "reward"])
        for rec in env.trace_records:
            for n in range(chain.n_nodes):
                out = chain.outgoing(n)
                shipped = float(rec["shipped_units"][out].sum()) if out else 0.0
                produced = float(rec["production"][sup_pos[n]]) if n in sup_pos else 0.0
                demand = float(rec["demand"][ret_pos[n]]) if n in ret_pos else 0.0
                unmet = float(rec["unmet"][ret_pos[n]]) if n in ret_pos else 0.0
                raw_out = float(rec["shipments"][out].sum()) if out else 0.0
                writer.writerow([
                    rec["step"], names[n],
                    f"{rec['stocks_end'][n]:.6f}", f"{rec['arrived'][n]:.6f}",
                    f"{shipped:.6f}", f"{produced:.6f}", f"{demand:.6f}",
                    f"{unmet:.6f}", f"{rec['discarded'][n]:.6f}",
                    f"{chain.production_cost[sup_pos[n]] * produced if n in sup_pos else 0.0:.6f}",
                    f"{chain.processing_cost[n] * raw_out if chain.is_factory[n] else 0.0:.6f}",
                    f"{chain.transport_cost * shipped:.6f}",
                    f"{chain.stock_cost[n] * rec['stocks_end'][n]:.6f}",
                    f"{chain.excess_penalty * rec['discarded'][n]:.6f}",
                    f"{chain.unmet_penalty * unmet:.6f}",
                    f"{rec['reward']:.6f}",
                ])
