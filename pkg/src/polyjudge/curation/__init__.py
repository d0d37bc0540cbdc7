"""Dataset curation: held-out splitting, circulation-balanced selection,
bug-fix pair mining, tag statistics, and corpus ingestion."""

from .apr import AprPair, build_apr_pairs, opcode_counts, sequence_similarity
from .corpus import (
    CorpusBundle,
    CorpusFormatError,
    CorpusReport,
    LinkedRecord,
    load_corpus,
    parse_memory_limit,
    parse_time_limit,
)
from .flow import (
    CirculationInfeasibleError,
    Flow,
    FlowNetwork,
    SelectionParams,
    TaggedSample,
    build_flow_network,
    feasible_circulation,
    total_flow_range,
)
from .selection import (
    InconsistentFlowError,
    SearchResult,
    Selection,
    evaluate_tuple,
    search_params,
    select_samples,
)
from .splitting import SplitConfig, SplitInfeasibleError, SplitResult, split_by_label, split_heldout
from .stats import BalanceComparison, TagStats, compare_with_random_baseline, tag_stats

__all__ = [
    "AprPair",
    "BalanceComparison",
    "CirculationInfeasibleError",
    "CorpusBundle",
    "CorpusFormatError",
    "CorpusReport",
    "Flow",
    "FlowNetwork",
    "InconsistentFlowError",
    "LinkedRecord",
    "SearchResult",
    "Selection",
    "SelectionParams",
    "SplitConfig",
    "SplitInfeasibleError",
    "SplitResult",
    "TagStats",
    "TaggedSample",
    "build_apr_pairs",
    "build_flow_network",
    "compare_with_random_baseline",
    "evaluate_tuple",
    "feasible_circulation",
    "load_corpus",
    "opcode_counts",
    "parse_memory_limit",
    "parse_time_limit",
    "search_params",
    "select_samples",
    "sequence_similarity",
    "split_by_label",
    "split_heldout",
    "tag_stats",
    "total_flow_range",
]
