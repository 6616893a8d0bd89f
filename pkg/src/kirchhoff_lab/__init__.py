"""Spectral laboratory for the Kirchhoff equation on the torus."""
__version__ = "0.1.0"

from .effective import (
    EffectiveState, effective_rhs, growth_report, integrate_effective, triple_diagnostics,
)
from .kirchhoff import hamiltonian, integrate_physical, kirchhoff_rhs
from .lattice import build_lattice, resonant_triples
from .nonres import check_melnikov, check_nonres, make_nonresonant, perturbation_margin
from .normal_form import full_chain
from .spectral import (
    ConjugatePair, PhysicalState, SpectralField, load_state, save_state, shell_observables,
    synth_from_targets, u_lambda,
)

__all__ = [
    "ConjugatePair", "EffectiveState", "PhysicalState", "SpectralField", "__version__",
    "build_lattice", "check_melnikov", "check_nonres", "effective_rhs", "full_chain", "growth_report",
    "hamiltonian", "integrate_effective", "integrate_physical", "kirchhoff_rhs", "load_state",
    "make_nonresonant", "perturbation_margin", "resonant_triples", "save_state",
    "shell_observables", "synth_from_targets", "triple_diagnostics", "u_lambda",
]
