"""Quality-diversity search for the 0/1 knapsack problem.

Two archive-based algorithms place solutions on (last-item, weight) or
(last-item, profit) grids with a dominance-filtering rule that mirrors the
subproblem reuse of dynamic programming. The package also ships exact
solvers, an approximation scheme, baseline EAs, a benchmark instance
generator, and a batch experiment harness with CSV/JSON exports.
"""

from .archive import (
    ArchiveGrid,
    BucketSpec,
    CellRecord,
    InsertOutcome,
    MapSnapshot,
    MODE_LITERAL,
    MODE_STRICT,
    PROFIT_SPACE,
    WEIGHT_SPACE,
    bucket_index,
    insert_profit_based,
    insert_weight_based,
    population_size,
    select_parent,
    snapshot,
)
from .baselines import (
    BaselineConfig,
    penalized_fitness,
    run_mu_plus_one_ea,
    run_one_plus_one_ea,
)
from .core import (
    Evaluation,
    Instance,
    Solution,
    evaluate,
    is_feasible,
    standard_bit_mutation,
)
from .instances import (
    GeneratorSpec,
    generate,
    parse_instance,
    write_instance,
)
from .oracles import (
    OracleResult,
    brute_force_opt,
    brute_force_optimal_set,
    dp_by_profit,
    dp_by_weight,
    fptas,
)
from .qd import (
    PrefixMonitorResult,
    RunResult,
    TerminationCriteria,
    expected_bound_fpras,
    expected_bound_profit,
    expected_bound_weight,
    fpras_gamma,
    run_prefix_monitor,
    run_profit_map_elites,
    run_weight_map_elites,
)

__version__ = "0.1.0"
