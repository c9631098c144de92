"""Clause sketches, simultaneous welfare protocols and a truthful mechanism for XOS auctions."""

from .errors import BudgetExceededError, DecisionSpecError, DimensionError, InvalidReportError, NotBinaryError
from .valuations import (
    Allocation,
    Clause,
    Instance,
    ItemSet,
    Valuation,
    argmax_clause,
    dump_instance,
    eval_clause,
    eval_valuation,
    load_instance,
)
from .welfare import (
    WelfareResult,
    alice_only_allocation,
    brute_force_partitions,
    sw_star_additive_pair,
    sw_star_n,
    sw_star_xos_pair,
)
from .sketch import (
    Sketch,
    SketchParams,
    compute_sketch,
    is_swap_optimal,
    objective_binary,
    objective_general,
    sketch_exact,
    sketch_local_search,
    verify_exchange_lemma_binary,
    verify_exchange_lemma_general,
)
from .protocols import (
    DecisionSpec,
    ProtocolOutcome,
    Transcript,
    baseline_grand_bundle,
    run_protocol1,
    run_protocol2,
    run_protocol3,
    run_protocol4,
    run_protocol5,
    run_protocol6,
    wrapup_alice_only,
    wrapup_best_known,
    wrapup_best_known_decision,
)
from .mechanism import Report, best_response, expected_utility, mechanism_expected_welfare, run_mechanism
from .hardness import F1Params, gen_appendix_g, gen_f1, stats_appendix_g, verify_f1_exclusion

__version__ = "0.1.0"
