"""Cone-shaped query embeddings over incomplete knowledge graphs.

Subpackages split by concern:

cones        exact circular-sector algebra (classification, unions, rotations)
conditions   per-rotation predicates behind ontology axiom forms
autodiff     minimal reverse-mode differentiation on dense arrays
model        cone embedding operators, distances, and the training loss
queries      query ASTs, DNF rewriting, symbolic answering, dataset generation
planted      a small knowledge graph with planted relational patterns
training     batching, Adam, checkpoints, multi-seed runs
evaluation   filtered ranking metrics and reports
patterns     relational pattern mining on triple stores
axioms       axiom extraction from trained rotation parameters
cli          command-line entry points and run manifests
"""

from conequery.cones import (
    Cone,
    Multicone,
    Rotation,
    canonicalize,
    classify,
    compose,
    cone_from_axis,
    inverse,
    mc_complement,
    mc_contains,
    mc_equal,
    mc_intersect,
    mc_rotate,
    mc_subset,
    mc_union,
    rotate,
    wrap_angle,
)

__all__ = [
    "Cone",
    "Multicone",
    "Rotation",
    "canonicalize",
    "classify",
    "compose",
    "cone_from_axis",
    "inverse",
    "mc_complement",
    "mc_contains",
    "mc_equal",
    "mc_intersect",
    "mc_rotate",
    "mc_subset",
    "mc_union",
    "rotate",
    "wrap_angle",
]

__version__ = "0.1.0"
