"""Verification engine for almost contact metric structures."""
from .acm import AcmStructure, AxiomError, PointEvaluation, Residual, StructureClass, classify, verify_axioms
from .exprjet import Jet2, ParseError, eval_jet2, parse_expression
from .fields import Chart, load_manifold, sample_points
from .report import RunConfig, run
from .zoo import EXAMPLES, HeisenbergParams, get_example, heisenberg_aqs

__all__ = [
    "AcmStructure", "AxiomError", "PointEvaluation", "Residual", "StructureClass", "classify",
    "verify_axioms", "Jet2", "ParseError", "eval_jet2", "parse_expression", "Chart",
    "load_manifold", "sample_points", "RunConfig", "run", "EXAMPLES", "HeisenbergParams",
    "get_example", "heisenberg_aqs",
]
