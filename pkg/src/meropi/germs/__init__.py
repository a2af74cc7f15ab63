"""Exact algebra of meromorphic germs with linear poles."""

from .field import GQ, GaussianRational
from .germ import (
    Decomposition,
    MeroGerm,
    PolarTerm,
    decomposition_to_json,
    germ_to_json,
    independent,
    project_pi,
    reduce_dependent,
)
from .linform import (
    LinearForm,
    dependence_relation,
    form_rank,
    normalize_form,
    orth_complement,
    q_dot,
)
from .parse import germ_to_text, parse_form, parse_germ, poly_text
from .poly import APPROX, EXACT, Poly, poly_product

__all__ = [
    "APPROX",
    "EXACT",
    "Decomposition",
    "GQ",
    "GaussianRational",
    "LinearForm",
    "MeroGerm",
    "PolarTerm",
    "Poly",
    "decomposition_to_json",
    "dependence_relation",
    "form_rank",
    "germ_to_json",
    "germ_to_text",
    "independent",
    "normalize_form",
    "orth_complement",
    "parse_form",
    "parse_germ",
    "poly_product",
    "poly_text",
    "project_pi",
    "q_dot",
    "reduce_dependent",
]
