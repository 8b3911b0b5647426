"""Planning benchmarks over 3D scene graphs."""

from __future__ import annotations

from .domain import (
    AGENT,
    DomainSpec,
    Family,
    ProblemInstance,
    build_domain,
    build_problem,
    restrict_problem,
    sample_problem,
)
from .ground import StripsProblem, ground
from .planner import Plan, PlannerConfig, Status, solve, validate_plan
from .scenegraph import GeneratorParams, SceneGraph, generate_synthetic
from .scrub import ScrubResult, check_minimality, scrub

__version__ = "0.1.0"

__all__ = [
    "AGENT", "DomainSpec", "Family", "GeneratorParams", "Plan", "PlannerConfig",
    "ProblemInstance", "SceneGraph", "ScrubResult", "Status", "StripsProblem",
    "build_domain", "build_problem", "check_minimality", "generate_synthetic",
    "ground", "restrict_problem", "sample_problem", "scrub", "solve", "validate_plan",
]
