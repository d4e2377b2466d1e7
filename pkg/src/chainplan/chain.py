"""Chain topology, cost and capacity parameters, scenario catalog and files.

A chain is a layered network: echelon 0 produces raw material, the last
echelon faces customer demand, and every node is connected to every node of
the adjacent downstream echelon. Factories convert `processing_ratio` units
of raw material into one unit of product at shipment time; all other nodes
move material unchanged.

Scenarios bundle a chain with a demand process and a lead-time process and
can be written to / read from INI files (sections [scenario], [chain],
[demand], [lead_time]).
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass

import numpy as np

from .stochastic import DemandSpec, LeadTimeSpec


def _as_float_array(value, length: int | None = None) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=np.float64))
    if length is not None and arr.size == 1:
        arr = np.full(length, float(arr[0]))
    return arr


def default_links(echelon_layout) -> tuple:
    """Full connectivity between adjacent echelons, ordered by (src, dst)."""
    layout = tuple(int(k) for k in echelon_layout)
    offsets = np.concatenate([[0], np.cumsum(layout)])
    links = []
    for e in range(len(layout) - 1):
        for src in range(offsets[e], offsets[e + 1]):
            for dst in range(offsets[e + 1], offsets[e + 2]):
                links.append((int(src), int(dst)))
    return tuple(sorted(links))


@dataclass(frozen=True, eq=False)
class ChainConfig:
    """Static description of one supply chain instance."""

    echelon_layout: tuple
    horizon: int
    stock_cost: np.ndarray        # per node, per unit per step
    stock_cap: np.ndarray         # per node
    initial_stock: np.ndarray     # per node
    production_cost: np.ndarray   # per supplier, per raw unit
    production_cap: np.ndarray    # per supplier, per step
    is_factory: np.ndarray        # per node, bool
    processing_cost: np.ndarray   # per node, per raw unit consumed (factories)
    processing_cap: np.ndarray    # per node, raw units per step (factories)
    processing_ratio: np.ndarray  # per node, raw units per product unit
    transport_cost: float         # per unit entering any transport pipeline
    transport_cap: np.ndarray     # per node, outbound units per step
    excess_penalty: float         # per unit discarded above stock_cap
    unmet_penalty: float          # per unit of unmet demand
    links: tuple                  # ordered (src, dst) pairs
    initial_production: np.ndarray  # (n_suppliers, k): arrivals due steps 1..k
    initial_transport: np.ndarray   # (n_links, k): arrivals due steps 1..k

    # ---- derived topology ----

    @property
    def n_nodes(self) -> int:
        return int(sum(self.echelon_layout))

    @property
    def echelon_of(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.echelon_layout)), self.echelon_layout)

    @property
    def suppliers(self) -> np.ndarray:
        return np.flatnonzero(self.echelon_of == 0)

    @property
    def retailers(self) -> np.ndarray:
        return np.flatnonzero(self.echelon_of == len(self.echelon_layout) - 1)

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def link_index(self) -> dict:
        return {link: i for i, link in enumerate(self.links)}

    def successors(self, node: int) -> list:
        return [dst for (src, dst) in self.links if src == node]

    def outgoing(self, node: int) -> list:
        """Indices into `links` of the node's outbound links, dst-ascending."""
        return [i for i, (src, _) in enumerate(self.links) if src == node]

    def incoming(self, node: int) -> list:
        return [i for i, (_, dst) in enumerate(self.links) if dst == node]

    @property
    def node_names(self) -> tuple:
        roles = {0: "supplier", len(self.echelon_layout) - 1: "retailer"}
        if len(self.echelon_layout) == 4:
            roles[1] = "factory"
            roles[2] = "wholesaler"
        names = []
        counter = {}
        for n in range(self.n_nodes):
            e = int(self.echelon_of[n])
            role = roles.get(e, f"stage{e}")
            counter[role] = counter.get(role, 0) + 1
            names.append(f"{role}{counter[role]}")
        return tuple(names)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ChainConfig):
            return NotImplemented
        for name in self.__dataclass_fields__:
            a, b = getattr(self, name), getattr(other, name)
            if isinstance(a, np.ndarray):
                if not (np.shape(a) == np.shape(b) and np.array_equal(a, b)):
                    return False
            elif a != b:
                return False
        return True


def build_chain(echelon_layout, horizon, *, stock_cost=1.0, stock_cap=np.inf,
                initial_stock=0.0, production_cost=0.0, production_cap=0.0,
                factories=(), processing_cost=0.0, processing_cap=0.0,
                processing_ratio=1.0, transport_cost=0.0, transport_cap=None,
                excess_penalty=0.0, unmet_penalty=0.0, links=None,
                initial_production=None, initial_transport=None) -> ChainConfig:
    """Convenience constructor broadcasting scalars to per-node/per-link arrays."""
    layout = tuple(int(k) for k in echelon_layout)
    q = sum(layout)
    n_sup = layout[0]
    links = tuple(links) if links is not None else default_links(layout)
    is_factory = np.zeros(q, dtype=bool)
    is_factory[list(factories)] = True
    ratio = _as_float_array(processing_ratio, q).copy()
    ratio[~is_factory] = 1.0
    proc_cost = _as_float_array(processing_cost, q).copy()
    proc_cost[~is_factory] = 0.0
    proc_cap = _as_float_array(processing_cap, q).copy()
    proc_cap[~is_factory] = 0.0
    stock_cap_arr = _as_float_array(stock_cap, q)
    if initial_production is None:
        initial_production = np.zeros((n_sup, 0))
    if initial_transport is None:
        initial_transport = np.zeros((len(links), 0))
    return ChainConfig(
        echelon_layout=layout,
        horizon=int(horizon),
        stock_cost=_as_float_array(stock_cost, q),
        stock_cap=stock_cap_arr,
        initial_stock=_as_float_array(initial_stock, q),
        production_cost=_as_float_array(production_cost, n_sup),
        production_cap=_as_float_array(production_cap, n_sup),
        is_factory=is_factory,
        processing_cost=proc_cost,
        processing_cap=proc_cap,
        processing_ratio=ratio,
        transport_cost=float(transport_cost),
        transport_cap=(stock_cap_arr.copy() if transport_cap is None
                       else _as_float_array(transport_cap, q)),
        excess_penalty=float(excess_penalty),
        unmet_penalty=float(unmet_penalty),
        links=links,
        initial_production=np.atleast_2d(np.asarray(initial_production, dtype=np.float64)),
        initial_transport=np.atleast_2d(np.asarray(initial_transport, dtype=np.float64)),
    )


def validate_config(config: ChainConfig) -> list[str]:
    """All contract violations in a config, empty when valid."""
    errs = []
    layout = config.echelon_layout
    if len(layout) < 2 or any(k < 1 for k in layout):
        errs.append("echelon layout needs at least two echelons of >= 1 node")
        return errs
    q = config.n_nodes
    if config.horizon < 1:
        errs.append("horizon must be at least 1")

    def check_per_node(name, arr, length):
        arr = np.asarray(arr)
        if arr.shape != (length,):
            errs.append(f"{name} must have shape ({length},)")
            return None
        if not np.all(np.isfinite(arr) | (arr == np.inf)):
            errs.append(f"{name} contains nan")
        if np.any(np.asarray(arr) < 0):
            errs.append(f"{name} contains negative values")
        return arr

    check_per_node("stock_cost", config.stock_cost, q)
    stock_cap = check_per_node("stock_cap", config.stock_cap, q)
    initial_stock = check_per_node("initial_stock", config.initial_stock, q)
    check_per_node("production_cost", config.production_cost, len(config.suppliers))
    check_per_node("production_cap", config.production_cap, len(config.suppliers))
    check_per_node("processing_cost", config.processing_cost, q)
    check_per_node("processing_cap", config.processing_cap, q)
    check_per_node("transport_cap", config.transport_cap, q)
    if stock_cap is not None and initial_stock is not None:
        for n in np.flatnonzero(initial_stock > stock_cap):
            errs.append(f"initial stock exceeds stock capacity at node {n}")
    if config.transport_cost < 0 or config.excess_penalty < 0 or config.unmet_penalty < 0:
        errs.append("cost rates must be non-negative")

    ech = config.echelon_of
    last = len(layout) - 1
    for n in range(q):
        ratio = config.processing_ratio[n]
        if config.is_factory[n]:
            if ech[n] == 0:
                errs.append(f"supplier flagged as factory at node {n}")
            if ech[n] == last:
                errs.append(f"retailer flagged as factory at node {n}")
            if ratio < 1:
                errs.append(f"factory processing ratio below 1 at node {n}")
            if config.processing_cap[n] <= 0:
                errs.append(f"factory with non-positive processing capacity at node {n}")
        elif ratio != 1:
            errs.append(f"non-factory node {n} with processing ratio != 1")

    seen = set()
    for (src, dst) in config.links:
        if not (0 <= src < q and 0 <= dst < q):
            errs.append(f"link ({src}, {dst}) references unknown node")
            continue
        if (src, dst) in seen:
            errs.append(f"duplicate link ({src}, {dst})")
        seen.add((src, dst))
        if ech[dst] != ech[src] + 1:
            errs.append(f"non-adjacent echelon link ({src}, {dst})")

    n_init_p = config.initial_production.shape[1] if config.initial_production.ndim == 2 else -1
    if config.initial_production.shape[0] != len(config.suppliers):
        errs.append("initial_production must have one row per supplier")
    if config.initial_transport.shape[0] != len(config.links):
        errs.append("initial_transport must have one row per link")
    elif config.initial_transport.ndim == 2 and config.initial_transport.shape[1] != n_init_p:
        errs.append("initial_production and initial_transport must cover the same steps")
    if np.any(config.initial_production < 0) or np.any(config.initial_transport < 0):
        errs.append("initial pipeline quantities must be non-negative")
    return errs


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    """A named experiment: chain instance + demand process + lead-time process."""

    name: str
    chain: ChainConfig
    demand: DemandSpec
    lead_time: LeadTimeSpec
    description: str = ""

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScenarioSpec):
            return NotImplemented
        return (self.name == other.name and self.chain == other.chain
                and self.demand == other.demand and self.lead_time == other.lead_time)


def validate_scenario(spec: ScenarioSpec) -> list[str]:
    errs = validate_config(spec.chain)
    errs += spec.demand.validate()
    errs += spec.lead_time.validate()
    if not errs:
        k = spec.chain.initial_production.shape[1]
        if k != spec.lead_time.average:
            errs.append("initial pipelines must cover arrival steps 1..average lead time")
    return errs


# ---------------------------------------------------------------------------
# scenario catalog
# ---------------------------------------------------------------------------

SCENARIO_NAMES = (
    "N0", "N20", "N40", "N60",
    "N0cl", "N20cl", "N40cl", "N60cl",
    "rN0", "rN50", "rN100", "rU200",
    "rN0cl", "rN50cl", "rN100cl", "rU200cl",
    "N20stc",
)


def base_chain(horizon: int = 360, stock_cost=1.0, lead_average: int = 2) -> ChainConfig:
    """Two nodes per echelon, capacities and costs of the benchmark chain."""
    layout = (2, 2, 2, 2)
    links = default_links(layout)
    # initial in-transit material: per-destination totals, split evenly
    # across the destination's incoming links, due at steps 1..lead_average
    dest_totals = {2: 600.0, 3: 840.0, 4: 240.0, 5: 240.0, 6: 240.0, 7: 240.0}
    per_link = np.array([dest_totals[dst] / 2.0 for (_, dst) in links])
    initial_transport = np.repeat(per_link[:, None], lead_average, axis=1)
    initial_production = np.repeat(np.array([[600.0], [840.0]]), lead_average, axis=1)
    return build_chain(
        layout, horizon,
        stock_cost=stock_cost,
        stock_cap=[1600, 1800, 6400, 7200, 1600, 1800, 1600, 1800],
        initial_stock=800.0,
        production_cost=[6, 4],
        production_cap=[600, 840],
        factories=(2, 3),
        processing_cost=[0, 0, 12, 10, 0, 0, 0, 0],
        processing_cap=[0, 0, 840, 960, 0, 0, 0, 0],
        processing_ratio=[1, 1, 3, 3, 1, 1, 1, 1],
        transport_cost=2.0,
        excess_penalty=10.0,
        unmet_penalty=216.0,
        initial_production=initial_production,
        initial_transport=initial_transport,
    )


def _seasonal(perturbation: str = "none", sigma: float = 0.0, horizon: int = 360) -> DemandSpec:
    return DemandSpec(kind="seasonal", sin_min=100.0, sin_max=300.0, peaks=2,
                      period=float(horizon), clip_min=0.0, clip_max=400.0,
                      perturbation=perturbation, sigma=sigma)


def _regular(perturbation: str = "none", sigma: float = 0.0,
             low: float = 0.0, high: float = 0.0) -> DemandSpec:
    return DemandSpec(kind="regular", level=200.0, clip_min=0.0, clip_max=400.0,
                      perturbation=perturbation, sigma=sigma, low=low, high=high)


def get_scenario(name: str) -> ScenarioSpec:
    """Catalog lookup; raises KeyError for unknown names."""
    if name not in SCENARIO_NAMES:
        raise KeyError(f"unknown scenario {name!r}; known: {', '.join(SCENARIO_NAMES)}")
    core = name[:-2] if name.endswith("cl") else name
    constant_lead = name.endswith("cl")
    stock_cost = 1.0
    if name == "N20stc":
        core = "N20"
        constant_lead = False
        stock_cost = [1, 2, 1, 2, 5, 6, 5, 6]
    chain = base_chain(stock_cost=stock_cost)
    if core.startswith("rN"):
        sigma = float(core[2:])
        demand = _regular() if sigma == 0 else _regular("gaussian", sigma=sigma)
    elif core.startswith("rU"):
        half = float(core[2:])
        demand = _regular("uniform", low=-half, high=half)
    else:
        sigma = float(core[1:])
        demand = _seasonal() if sigma == 0 else _seasonal("gaussian", sigma=sigma)
    lead = LeadTimeSpec(kind="constant" if constant_lead else "stochastic",
                        average=2, maximum=4)
    kind = "seasonal" if core.startswith("N") else "regular"
    noise = demand.perturbation if demand.perturbation != "none" else "no"
    desc = (f"{kind} demand, {noise} perturbation, "
            f"{'constant' if constant_lead else 'stochastic'} lead times")
    if name == "N20stc":
        desc += ", stage-graded stock costs"
    return ScenarioSpec(name=name, chain=chain, demand=demand, lead_time=lead,
                        description=desc)


# ---------------------------------------------------------------------------
# scenario files (INI)
# ---------------------------------------------------------------------------

def _fmt(values) -> str:
    out = []
    for v in np.atleast_1d(values):
        f = float(v)
        out.append(str(int(f)) if f == int(f) else repr(f))
    return ",".join(out)


def scenario_to_ini(spec: ScenarioSpec) -> str:
    """Serialize a scenario to INI text (round-trips through scenario_from_ini)."""
    chain = spec.chain
    cp = configparser.ConfigParser()
    cp["scenario"] = {"name": spec.name, "description": spec.description}
    dest_totals = np.zeros(chain.n_nodes)
    for i, (_, dst) in enumerate(chain.links):
        if chain.initial_transport.shape[1]:
            dest_totals[dst] += chain.initial_transport[i, 0]
    cp["chain"] = {
        "echelon_layout": ",".join(str(k) for k in chain.echelon_layout),
        "horizon": str(chain.horizon),
        "stock_cost": _fmt(chain.stock_cost),
        "stock_cap": _fmt(chain.stock_cap),
        "initial_stock": _fmt(chain.initial_stock),
        "production_cost": _fmt(chain.production_cost),
        "production_cap": _fmt(chain.production_cap),
        "is_factory": ",".join(str(int(b)) for b in chain.is_factory),
        "processing_cost": _fmt(chain.processing_cost),
        "processing_cap": _fmt(chain.processing_cap),
        "processing_ratio": _fmt(chain.processing_ratio),
        "transport_cost": _fmt(chain.transport_cost),
        "transport_cap": _fmt(chain.transport_cap),
        "excess_penalty": _fmt(chain.excess_penalty),
        "unmet_penalty": _fmt(chain.unmet_penalty),
        "initial_production": _fmt(chain.initial_production[:, 0]
                                   if chain.initial_production.shape[1] else
                                   np.zeros(len(chain.suppliers))),
        "initial_transport": _fmt(dest_totals),
    }
    d = spec.demand
    cp["demand"] = {
        "kind": d.kind,
        "sin_min": _fmt(d.sin_min), "sin_max": _fmt(d.sin_max),
        "peaks": str(d.peaks), "period": _fmt(d.period),
        "level": _fmt(d.level),
        "clip_min": _fmt(d.clip_min), "clip_max": _fmt(d.clip_max),
        "perturbation": d.perturbation,
        "sigma": _fmt(d.sigma), "low": _fmt(d.low), "high": _fmt(d.high),
    }
    lt = spec.lead_time
    cp["lead_time"] = {"kind": lt.kind, "average": str(lt.average),
                       "maximum": str(lt.maximum)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def _floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip() != ""]


def scenario_from_ini(text: str) -> ScenarioSpec:
    """Parse INI text into a ScenarioSpec; initial_transport is read as
    per-destination totals and split evenly across incoming links."""
    cp = configparser.ConfigParser()
    cp.read_string(text)
    ch = cp["chain"]
    layout = tuple(int(tok) for tok in ch["echelon_layout"].split(","))
    lt_sec = cp["lead_time"]
    lead = LeadTimeSpec(kind=lt_sec.get("kind", "stochastic"),
                        average=int(lt_sec.get("average", 2)),
                        maximum=int(lt_sec.get("maximum", 4)))
    links = default_links(layout)
    n_init = lead.average
    init_prod_per_sup = _floats(ch.get("initial_production", "0"))
    initial_production = np.repeat(
        np.asarray(init_prod_per_sup, dtype=np.float64)[:, None], n_init, axis=1)
    dest_totals = _floats(ch.get("initial_transport", "0"))
    if len(dest_totals) == 1:
        dest_totals = dest_totals * sum(layout)
    incoming_count = {dst: 0 for dst in range(sum(layout))}
    for (_, dst) in links:
        incoming_count[dst] += 1
    per_link = np.array([dest_totals[dst] / max(incoming_count[dst], 1)
                         for (_, dst) in links])
    initial_transport = np.repeat(per_link[:, None], n_init, axis=1)
    chain = build_chain(
        layout, int(ch["horizon"]),
        stock_cost=_floats(ch["stock_cost"]),
        stock_cap=_floats(ch["stock_cap"]),
        initial_stock=_floats(ch["initial_stock"]),
        production_cost=_floats(ch["production_cost"]),
        production_cap=_floats(ch["production_cap"]),
        factories=np.flatnonzero([int(tok) for tok in ch["is_factory"].split(",")]),
        processing_cost=_floats(ch["processing_cost"]),
        processing_cap=_floats(ch["processing_cap"]),
        processing_ratio=_floats(ch["processing_ratio"]),
        transport_cost=float(ch["transport_cost"]),
        transport_cap=_floats(ch["transport_cap"]),
        excess_penalty=float(ch["excess_penalty"]),
        unmet_penalty=float(ch["unmet_penalty"]),
        initial_production=initial_production,
        initial_transport=initial_transport,
    )
    de = cp["demand"]
    demand = DemandSpec(
        kind=de.get("kind", "seasonal"),
        sin_min=float(de.get("sin_min", 100)), sin_max=float(de.get("sin_max", 300)),
        peaks=int(de.get("peaks", 2)),
        period=float(de.get("period", chain.horizon)),
        level=float(de.get("level", 200)),
        clip_min=float(de.get("clip_min", 0)), clip_max=float(de.get("clip_max", 400)),
        perturbation=de.get("perturbation", "none"),
        sigma=float(de.get("sigma", 0)),
        low=float(de.get("low", 0)), high=float(de.get("high", 0)),
    )
    sc = cp["scenario"] if cp.has_section("scenario") else {}
    return ScenarioSpec(name=sc.get("name", "custom"), chain=chain, demand=demand,
                        lead_time=lead, description=sc.get("description", ""))


def load_scenario(name_or_path: str) -> ScenarioSpec:
    """Catalog name, packaged file name, or path to a scenario INI file."""
    if name_or_path in SCENARIO_NAMES:
        return get_scenario(name_or_path)
    with open(name_or_path, "r", encoding="utf-8") as fh:
        return scenario_from_ini(fh.read())
