"""Chart calculus for branched covering surface-knots.

A symbolic engine for charts (labeled oriented graphs presenting branched
covering surface-knots), the C-moves that relate them, and the 1-handle
rewrite calculus used to certify simplification bounds.

Layers:

* :mod:`chartcalc.braid` -- braid words over B_N and a complete word problem.
* :mod:`chartcalc.chart` -- disk charts as combinatorial maps (rotation systems).
* :mod:`chartcalc.moves` -- CI/CII/CIII move engine on disk charts.
* :mod:`chartcalc.states` -- covering states: free edges, nested loops, handles.
* :mod:`chartcalc.rules` -- the lemma-level rewrite rule catalogue and derivations.
* :mod:`chartcalc.planner` -- simplification pipelines, bound calculators, oracle.
* :mod:`chartcalc.scripts` -- built-in proof scripts and the replay checker.
* :mod:`chartcalc.cli` -- command line front end.
"""

from chartcalc.braid import BraidWord, Permutation
from chartcalc.states import CoveringState, HandleRecord
from chartcalc.errors import (
    CapExceeded,
    ChartCalcError,
    NoFreeEdge,
    NotApplicable,
    ParseError,
)

__all__ = [
    "BraidWord",
    "Permutation",
    "CoveringState",
    "HandleRecord",
    "ChartCalcError",
    "NotApplicable",
    "NoFreeEdge",
    "CapExceeded",
    "ParseError",
]

__version__ = "0.1.0"
