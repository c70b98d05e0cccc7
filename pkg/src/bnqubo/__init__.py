"""Score-based Bayesian network structure learning compiled to QUBO.

Parent-set candidates are preselected with repeated greedy tree trainings,
one-hot encoded (optionally as a direct product of two sub-families) next to
pairwise order bits enforcing acyclicity, minimized with exhaustive search or
simulated annealing, and audited against brute-force oracles.
"""

from .cart import DecisionTree, score, train_cart, used_variables
from .data import (
    Dataset,
    GroundTruth,
    IngestConfig,
    IngestError,
    SyntheticSpec,
    generate_synthetic,
    ingest_csv,
)
from .encoder import (
    Encoding,
    PenaltyWeights,
    SplitEntry,
    SplitPlan,
    encode_basic,
    encode_split,
    optimize_split,
    optimize_split_plan,
    penalty_weights,
    split_family,
    transitivity_violations,
)
from .pscs import (
    Candidate,
    CandidateList,
    CandidateRecord,
    IncompleteCandidatesError,
    SearchLimits,
    coverage_holds,
    lookup_score,
    run_pscs,
    run_pscs_all,
)
from .qubo import BitLabel, Qubo
from .solver import CapExceededError, SolveResult, solve_anneal, solve_exhaustive
from .verify import (
    AuditReport,
    StructureSolution,
    audit,
    core_replacement_preserves_acyclicity,
    decode,
    oracle_restricted,
)

__version__ = "0.1.0"

__all__ = [
    "AuditReport",
    "BitLabel",
    "Candidate",
    "CandidateList",
    "CandidateRecord",
    "CapExceededError",
    "Dataset",
    "DecisionTree",
    "Encoding",
    "GroundTruth",
    "IncompleteCandidatesError",
    "IngestConfig",
    "IngestError",
    "PenaltyWeights",
    "Qubo",
    "SearchLimits",
    "SolveResult",
    "SplitEntry",
    "SplitPlan",
    "StructureSolution",
    "SyntheticSpec",
    "audit",
    "core_replacement_preserves_acyclicity",
    "coverage_holds",
    "decode",
    "encode_basic",
    "encode_split",
    "generate_synthetic",
    "ingest_csv",
    "lookup_score",
    "optimize_split",
    "optimize_split_plan",
    "oracle_restricted",
    "penalty_weights",
    "run_pscs",
    "run_pscs_all",
    "score",
    "solve_anneal",
    "solve_exhaustive",
    "split_family",
    "train_cart",
    "transitivity_violations",
    "used_variables",
]
