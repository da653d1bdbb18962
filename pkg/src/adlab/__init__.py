"""adlab: numerical laboratory for superadiabatic approximation of
slowly driven matrix evolutions i*eps*dU/dt = H(t) U."""

from .approximation import (ApproximationBundle, Intertwiner, build_approximation,
                            build_intertwiner, dephased_growth, transition_amplitude)
from .chebgrid import TimeGrid
from .config import ExperimentConfig, load_config, parse_config
from .families import (GeneratorFamily, family_from_spec, family_to_spec,
                       intro_example, nilpotent_example, polynomial_family,
                       rotated_constant, two_level)
from .fitting import GrowthFit, fit
from .hierarchy import Hierarchy, build_hierarchy, effective_generator, fit_delta_decay
from .intro_model import (IntroClosedForm, IntroParams, closed_form_omega,
                          closed_form_transition, starred_projector_intertwining)
from .nilpotent import (NilpotentFamily, boundedness_dichotomy, evolve_nilpotent,
                        growth_exponent, nilpotent_family, shifted_nilpotent_bound)
from .propagate import (EvolutionResult, OmegaProfile, dyson_expand, evolve,
                        evolve_sampled, perturbation_bound_check)
from .spectral import (Contour, EigenGroup, SpectralDecomposition, contour_projector,
                       decompose, operator_norm, resolvent)

__version__ = "0.1.0"

__all__ = [
    "ApproximationBundle", "Contour", "EigenGroup", "EvolutionResult",
    "ExperimentConfig", "GeneratorFamily", "GrowthFit", "Hierarchy",
    "Intertwiner", "IntroClosedForm", "IntroParams", "NilpotentFamily",
    "OmegaProfile", "SpectralDecomposition", "TimeGrid",
    "build_approximation", "build_hierarchy", "build_intertwiner",
    "boundedness_dichotomy", "closed_form_omega", "closed_form_transition",
    "contour_projector", "decompose", "dephased_growth", "dyson_expand",
    "effective_generator", "evolve", "evolve_nilpotent", "evolve_sampled",
    "family_from_spec", "family_to_spec", "fit", "fit_delta_decay",
    "growth_exponent", "intro_example", "load_config", "nilpotent_example",
    "nilpotent_family", "operator_norm", "parse_config", "perturbation_bound_check",
    "polynomial_family", "resolvent", "rotated_constant",
    "shifted_nilpotent_bound", "starred_projector_intertwining",
    "transition_amplitude", "two_level",
]
