"""Executable consistency checkers (OSC, COC) and a write-order broadcast simulator."""

from .coc import CocOutcome, CocReport, detect_coc, detect_coc_with_fixed_orders, verify_lemma2_instance
from .history import History, HistoryBuilder, Operation, complete, is_well_formed, operations_of
from .osc import (
    Outcome,
    SubsetPolicy,
    Verdict,
    check_exhaustive,
    check_linearizable,
    check_osc,
    check_sequentially_consistent,
)
from .sim import SimConfig, run_simulation

__version__ = "0.1.0"
