"""DF-based real-time economic dispatch with multi-node DER aggregation.

Library layout:

- caseio       grid cases, bid curves, DERA/T-DER construction, load profiles
- gridgen      deterministic synthetic networks
- sensitivity  ISF/PTDF, LODF, DC flows
- lpcore       LP container + HiGHS-backed solve with duals
- rted         DF-based dispatch, full model, self-dispatch, LMP extraction
- icci         iterative crucial constraint identification
- strategies   DF predictors (const / mer / knn / stgcn) and accuracy metric
- stgcn        dual-graph window construction and network forward pass
- harness      rolling market simulation, scoring, reports
- ledger       run ledger persistence
- cli          command-line entry points
"""

from .caseio import (
    BidCurve,
    Bus,
    CaseError,
    CaseParseError,
    CaseValidationError,
    Dera,
    Generator,
    Line,
    Load,
    LoadProfile,
    Segment,
    SystemCase,
    TDer,
    assign_tder_costs,
    build_deras,
    generate_bids,
    load_profile,
    parse_case,
    serialize_case,
)
from .sensitivity import (
    SensitivitySet,
    compute_isf,
    compute_lodf,
    dc_flows,
    select_vulnerable,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
