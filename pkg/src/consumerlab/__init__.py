"""consumerlab: a deterministic agent-based laboratory for studying social
influence among foraging consumer agents.

Consumers search a bounded grid for products whose surface signatures
they can perceive but whose utilities they only learn by consuming.
Paired experiments (identical seeds, social rules on/off) feed a
statistics pipeline covering landscape difficulty, consumption and
value-space behavior.
"""

from .harness import (PairResult, RunConfig, RunResult, batch, init_world,
                      run, run_pair)
from .products import (ProductTopology, ProductType, generate_type_set,
                       layout_signature, random_topology, utility_from_edges,
                       valuation)

__version__ = "0.1.0"

__all__ = [
    "RunConfig", "RunResult", "PairResult", "run", "run_pair", "batch",
    "init_world", "ProductTopology", "ProductType", "random_topology",
    "layout_signature", "utility_from_edges", "valuation",
    "generate_type_set", "__version__",
]
