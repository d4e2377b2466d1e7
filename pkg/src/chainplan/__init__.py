"""chainplan: production-planning workbench for capacitated supply chains.

Simulates layered multi-echelon chains with seasonal stochastic demand and
stochastic lead times, builds deterministic LP plans (forecast-driven and
perfect-information bounds), trains a from-scratch PPO agent on the same
interface, and benchmarks all of them on shared demand/lead realizations.
"""

from .chain import (ChainConfig, ScenarioSpec, SCENARIO_NAMES, base_chain,
                    build_chain, get_scenario, load_scenario, scenario_from_ini,
                    scenario_to_ini, validate_config, validate_scenario)
from .codec import Codec, CodecError, RawAction
from .simulator import (ActionError, ChainState, ConfigError, EpisodeRealization,
                        StepOutcome, SupplyChainEnv, realize_episode)
from .stochastic import DemandSpec, LeadTimeSpec

__version__ = "0.1.0"

__all__ = [
    "ChainConfig", "ScenarioSpec", "SCENARIO_NAMES", "base_chain", "build_chain",
    "get_scenario", "load_scenario", "scenario_from_ini", "scenario_to_ini",
    "validate_config", "validate_scenario",
    "Codec", "CodecError", "RawAction",
    "ActionError", "ChainState", "ConfigError", "EpisodeRealization",
    "StepOutcome", "SupplyChainEnv", "realize_episode",
    "DemandSpec", "LeadTimeSpec",
    "__version__",
]
