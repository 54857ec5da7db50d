"""Privacy-preserving peer-to-peer energy trading: additive secret
sharing, Pedersen commitments, distributed market clearing, and a
deterministic five-phase protocol simulator with bit-exact traffic and
storage accounting."""

from .errors import GridShareError
from .harness import ScenarioConfig, run_scenario
from .market import MarketConfig, TAProfile, central_clearing, sample_profiles
from .numtheory import GroupParams, generate_group_params
from .pedersen import commit, product, verify_open
from .sharing import FixedPointCodec, reconstruct, split

__version__ = "0.1.0"

__all__ = [
    "FixedPointCodec",
    "GridShareError",
    "GroupParams",
    "MarketConfig",
    "ScenarioConfig",
    "TAProfile",
    "central_clearing",
    "commit",
    "generate_group_params",
    "product",
    "reconstruct",
    "run_scenario",
    "sample_profiles",
    "split",
    "verify_open",
    "__version__",
]
