"""Theory graphs with realms.

A small kernel for theory presentations, views with proof obligations,
conservative developments and realms (a primitive face over several
equivalent conservative developments), plus a finite-model oracle used to
discharge or refute obligations at desk scale.
"""

from .errors import KernelError
from .graph import (
    Development,
    TheoryGraph,
    add_extension_edge,
    add_theory,
    development,
    is_conservative_development,
)
from .oracle import (
    FiniteStructure,
    enumerate_models,
    eval_formula,
    find_countermodel,
    holds,
    transport_model,
)
from .parser import parse_declaration, parse_formula, parse_source, parse_theory
from .realms import (
    Pillar,
    Realm,
    extend_realm,
    initial_realm,
    lift_view,
    merge_realms,
    trivial_realm,
    validate_realm,
)
from .syntax import Theory, theory_cons, theory_join
from .views import View, check_view, compose_views, translate_formula
from .workspace import Workspace, load, load_corpus, load_sources

__all__ = [
    "Development", "FiniteStructure", "KernelError", "Pillar", "Realm", "Theory",
    "TheoryGraph", "View", "Workspace", "add_extension_edge", "add_theory", "check_view",
    "compose_views", "development", "enumerate_models", "eval_formula", "extend_realm",
    "find_countermodel", "holds", "initial_realm", "is_conservative_development",
    "lift_view", "load", "load_corpus", "load_sources", "merge_realms", "parse_declaration",
    "parse_formula", "parse_source", "parse_theory", "theory_cons", "theory_join",
    "transport_model", "translate_formula", "trivial_realm", "validate_realm",
]
