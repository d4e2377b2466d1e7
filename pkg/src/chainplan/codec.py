"""Observation normalization and the [-1, 1] action interface.

Normalization maps a physical observation entry v with static maximum M to
2*(v/M) - 1 and clips to [-1, 1]; under stochastic lead times several
batches can land on the same due step, so pipeline entries may exceed their
nominal maxima and the clip keeps the interface bounded.

Action decoding uses stock cuts. Each action value a in [-1, 1] becomes a
fraction a' = (a+1)/2. Supplier production is a' * production_cap. For
shipments, every successor of a node gets a cut a' * B against the node's
live outbound base B (its stock; at factories min(stock, processing_cap),
raw-denominated by default). Cuts are sorted ascending: the successor with
the smallest cut receives its full cut and every later successor receives
the difference to the previous cut, so the total never exceeds B and the
remainder above the largest cut stays in stock. Ties go to the lower-index
successor. Shipment quantities are denominated in the units the source
consumes (raw at factories); the transport pipeline receives
quantity / processing_ratio.

encode_plan is the exact inverse: it maps feasible physical quantities back
to the [-1, 1] vector that decodes to them against the same stocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import ChainConfig
from .stochastic import DemandSpec, LeadTimeSpec


class CodecError(ValueError):
    """Quantities passed to encode_plan violate a feasibility bound."""


@dataclass(frozen=True)
class RawAction:
    """Physical action: per-supplier production, per-link shipment quantities
    (denominated in source-node units, i.e. raw material at factories)."""

    production: np.ndarray
    shipments: np.ndarray


class Codec:
    """Pre-computed scales and link groups for one chain instance."""

    def __init__(self, chain: ChainConfig, demand: DemandSpec | None = None,
                 lead: LeadTimeSpec | None = None, *, demand_max: float = 400.0,
                 lead_max: int = 4, factory_cuts: str = "raw"):
        if factory_cuts not in ("raw", "product"):
            raise ValueError("factory_cuts must be 'raw' or 'product'")
        self.chain = chain
        self.factory_cuts = factory_cuts
        if demand is not None:
            demand_max = demand.clip_max
        if lead is not None:
            lead_max = lead.maximum
        q = chain.n_nodes
        n_sup = len(chain.suppliers)
        self.n_suppliers = n_sup
        self.obs_dim = 3 * q + len(chain.retailers) + 1
        self.action_dim = n_sup + chain.n_links

        scales = np.empty(self.obs_dim)
        scales[:q] = chain.stock_cap
        is_sup = np.zeros(q, dtype=bool)
        is_sup[chain.suppliers] = True
        nxt = np.zeros(q)
        nxt[chain.suppliers] = chain.production_cap
        for (src, dst) in chain.links:
            nxt[dst] += chain.stock_cap[src]
        scales[q:3 * q:2] = nxt
        scales[q + 1:3 * q:2] = nxt * max(lead_max - 1, 1)
        scales[3 * q:3 * q + len(chain.retailers)] = demand_max
        scales[-1] = chain.horizon
        self.scales = scales

        # per-node contiguous slices into the action tail / link array
        self.groups = []
        pos = 0
        for node in range(q):
            out = chain.outgoing(node)
            if not out:
                continue
            assert out == list(range(pos, pos + len(out)))  # links sorted by (src, dst)
            self.groups.append((node, slice(pos, pos + len(out))))
            pos += len(out)

    # ---- observations ----

    def normalize_observation(self, obs: np.ndarray) -> np.ndarray:
        """Scale a physical observation into [-1, 1]."""
        return np.clip(2.0 * (np.asarray(obs, dtype=np.float64) / self.scales) - 1.0,
                       -1.0, 1.0)

    # ---- actions ----

    def raw_outbound_limit(self, node: int, stocks: np.ndarray) -> float:
        """Most source-denominated material the node may send this step."""
        stock = float(stocks[node])
        if self.chain.is_factory[node]:
            return min(stock, float(self.chain.processing_cap[node]))
        return stock

    def _cut_base(self, node: int, stocks: np.ndarray) -> float:
        base = self.raw_outbound_limit(node, stocks)
        if self.factory_cuts == "product" and self.chain.is_factory[node]:
            return base / float(self.chain.processing_ratio[node])
        return base

    def _to_cut_units(self, node: int, quantities: np.ndarray) -> np.ndarray:
        if self.factory_cuts == "product" and self.chain.is_factory[node]:
            return quantities / float(self.chain.processing_ratio[node])
        return quantities

    def _from_cut_units(self, node: int, cuts: np.ndarray) -> np.ndarray:
        if self.factory_cuts == "product" and self.chain.is_factory[node]:
            return cuts * float(self.chain.processing_ratio[node])
        return cuts

    def decode_action(self, action: np.ndarray, stocks: np.ndarray) -> RawAction:
        """Map a [-1, 1] vector onto feasible physical quantities."""
        a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
        frac = (a + 1.0) / 2.0
        production = frac[:self.n_suppliers] * self.chain.production_cap
        shipments = np.zeros(self.chain.n_links)
        for node, links in self.groups:
            base = self._cut_base(node, stocks)
            cuts = frac[self.n_suppliers + links.start:self.n_suppliers + links.stop] * base
            order = np.argsort(cuts, kind="stable")
            alloc = np.empty_like(cuts)
            alloc[order] = np.diff(np.concatenate(([0.0], cuts[order])))
            shipments[links] = self._from_cut_units(node, alloc)
        return RawAction(production=production, shipments=shipments)

    def encode_plan(self, production: np.ndarray, shipments: np.ndarray,
                    stocks: np.ndarray) -> np.ndarray:
        """Inverse of decode_action for feasible quantities against the same
        stocks; raises CodecError naming any violated bound."""
        production = np.asarray(production, dtype=np.float64)
        shipments = np.asarray(shipments, dtype=np.float64)
        if np.any(production < 0) or np.any(shipments < 0):
            raise CodecError("negative production or shipment quantity")
        action = np.empty(self.action_dim)
        cap = self.chain.production_cap
        over = production > cap * (1 + 1e-9) + 1e-9
        if np.any(over):
            s = int(np.flatnonzero(over)[0])
            raise CodecError(f"production {production[s]:g} above capacity "
                             f"{cap[s]:g} for supplier {s}")
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(cap > 0, production / np.where(cap > 0, cap, 1.0), 0.0)
        action[:self.n_suppliers] = 2.0 * frac - 1.0
        for node, links in self.groups:
            base = self._cut_base(node, stocks)
            q = self._to_cut_units(node, shipments[links])
            total = q.sum()
            if total > base * (1 + 1e-9) + 1e-9:
                raise CodecError(f"outbound quantity {total:g} above available "
                                 f"{base:g} at node {node}")
            sl = slice(self.n_suppliers + links.start, self.n_suppliers + links.stop)
            if base <= 0:
                action[sl] = -1.0
                continue
            order = np.lexsort((np.arange(len(q)), q))
            cuts = np.empty_like(q)
            cuts[order] = np.cumsum(q[order])
            action[sl] = np.clip(2.0 * (cuts / base) - 1.0, -1.0, 1.0)
        return action
