"""Hardness amplification reductions at toy scale: hard-set generators,
predictor extraction, weakly verifiable puzzles, read-once combiners and
commitment protocols, each checkable against exact enumeration."""

from .core import Estimate, MonotoneFn, PredicateOracle, SeedPath
from .combiners import ReadOnceFormula, build_amplifier, formula_accept_prob
from .predicate_single import Distinguisher, gen_single, verify_theorem1
from .predicate_multi import MultiDistinguisher, gen_multi
from .puzzles import GuessingPuzzle, gen_puzzle_solver
from .protocols import HidingSource, WeakCommitment, hiding_experiment, binding_experiment

__all__ = [
    "Estimate",
    "MonotoneFn",
    "PredicateOracle",
    "SeedPath",
    "ReadOnceFormula",
    "build_amplifier",
    "formula_accept_prob",
    "Distinguisher",
    "gen_single",
    "verify_theorem1",
    "MultiDistinguisher",
    "gen_multi",
    "GuessingPuzzle",
    "gen_puzzle_solver",
    "HidingSource",
    "WeakCommitment",
    "hiding_experiment",
    "binding_experiment",
]
__version__ = "0.1.0"
