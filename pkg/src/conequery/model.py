"""Cone-shaped query embeddings in the complex plane.

Every query is embedded, per dimension, as a closed circular-sector ("cone")
described by an axis angle in [-pi, pi) and an aperture in [0, 2*pi].
Entities are unit-circle points (aperture-zero cones).  The four geometric
operators map onto the logical connectives:

    existential edge -> per-dimension aperture-additive rotation
    intersection     -> attention over axes + shrunken minimum aperture
    union            -> list of disjunct cones (disjunctive normal form)
    negation         -> the complement cone (axis + pi, 2*pi - aperture)

All operators are written against :mod:`conequery.autodiff` primitives, so the
same code path serves evaluation (plain numpy arrays in, arrays out) and
training (tape-backed tensors in, gradients out).

Batching convention: a ``ConeBatch`` holds an axis array and an aperture array
of shape ``(batch, d)`` (broadcast-compatible shapes also work); a batch mixes
only queries of one structure, so the computation graph is shared.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import autodiff as ad
from .queries import (
    STRUCTURE_TEMPLATES,
    Intersection,
    Negation,
    Node,
    Nominal,
    Projection,
    Union,
    dnf_disjuncts,
)

__all__ = [
    "PI",
    "TWO_PI",
    "ROTATION_MODES",
    "ConeBatch",
    "ModelParams",
    "ParameterStore",
    "entity_points",
    "nominal_cone",
    "relation_rotation",
    "project_cone",
    "intersect_cones",
    "negate_cone",
    "embed_query",
    "embed_structure",
    "cone_entity_distance",
    "dnf_entity_distance",
    "margin_loss",
    "param_count",
    "param_breakdown",
    "intersection_net_param_count",
]

PI = math.pi
TWO_PI = 2.0 * math.pi

#: How an existential edge changes the aperture: "additive" adds the
#: relation's aperture offset (the default and the ablation winner),
#: "multiplicative" scales by it.
ROTATION_MODES = ("additive", "multiplicative")


class ConeBatch(NamedTuple):
    """Axis/aperture angle arrays (or tensors) of shape (..., d)."""

    axis: object
    aperture: object


# ---------------------------------------------------------------------------
# parameter store
# ---------------------------------------------------------------------------


def _net_shapes(d: int) -> dict[str, tuple[int, ...]]:
    """Intersection-network arrays: an attention MLP (2d -> 2d -> d) and a
    DeepSets pair (inner 2d -> d -> d, outer d -> d -> d)."""
    return {
        "attn_w1": (2 * d, 2 * d),
        "attn_b1": (2 * d,),
        "attn_w2": (2 * d, d),
        "attn_b2": (d,),
        "ds_in_w1": (2 * d, d),
        "ds_in_b1": (d,),
        "ds_in_w2": (d, d),
        "ds_in_b2": (d,),
        "ds_out_w1": (d, d),
        "ds_out_b1": (d,),
        "ds_out_w2": (d, d),
        "ds_out_b2": (d,),
    }


_NET_NAMES = tuple(_net_shapes(1))


@dataclass
class ModelParams:
    """A view of the parameter arrays, either plain numpy (evaluation) or
    tape-backed tensors (training).  Produced by ``ParameterStore.tensors``."""

    d: int
    rotation_mode: str
    entity_axis: object
    relation_axis: object
    relation_aperture: object
    attn_w1: object = None
    attn_b1: object = None
    attn_w2: object = None
    attn_b2: object = None
    ds_in_w1: object = None
    ds_in_b1: object = None
    ds_in_w2: object = None
    ds_in_b2: object = None
    ds_out_w1: object = None
    ds_out_b1: object = None
    ds_out_w2: object = None
    ds_out_b2: object = None

    @property
    def has_net(self) -> bool:
        return self.attn_w1 is not None


class ParameterStore:
    """Owns every parameter array of one model instance.

    Arrays (in fixed order, which seeding and checkpoints rely on):

    - ``entity_axis``        (n_entities, d) entity point angles, raw;
      wrapped into [-pi, pi) on read
    - ``relation_axis``      (n_relations, d) rotation angles, raw; wrapped
    - ``relation_aperture``  (n_relations, d) aperture offsets, raw; read
      through absolute value so the offset is always >= 0
    - intersection-network weights (see ``_net_shapes``)
    - ``margin``             (1,) the fixed loss margin, carried with the
      parameters (and counted in audits) but never updated by the optimizer
    """

    def __init__(self, n_entities: int, n_relations: int, d: int, *,
                 seed: int = 0, rotation_mode: str = "additive",
                 margin: float = 20.0, with_net: bool = True,
                 with_margin: bool = True):
        if rotation_mode not in ROTATION_MODES:
            raise ValueError(f"rotation_mode must be one of {ROTATION_MODES}")
        if min(n_entities, n_relations, d) <= 0:
            raise ValueError("n_entities, n_relations, d must be positive")
        self.n_entities = int(n_entities)
        self.n_relations = int(n_relations)
        self.d = int(d)
        self.rotation_mode = rotation_mode
        rng = np.random.default_rng(seed)
        self.arrays: dict[str, np.ndarray] = {
            "entity_axis": rng.uniform(-PI, PI, size=(n_entities, d)),
            "relation_axis": rng.uniform(-PI, PI, size=(n_relations, d)),
            "relation_aperture": rng.uniform(0.0, PI / 16.0, size=(n_relations, d)),
        }
        if with_net:
            for name, shape in _net_shapes(d).items():
                if name.endswith(("b1", "b2")):
                    self.arrays[name] = np.zeros(shape)
                else:
                    bound = math.sqrt(6.0 / (shape[0] + shape[1]))
                    self.arrays[name] = rng.uniform(-bound, bound, size=shape)
        if with_margin:
            self.arrays["margin"] = np.array([float(margin)])

    @property
    def margin(self) -> float:
        return float(self.arrays["margin"][0])

    def trainable_names(self) -> tuple[str, ...]:
        return tuple(n for n in self.arrays if n != "margin")

    def param_count(self) -> int:
        """Total number of scalar parameters actually allocated."""
        return sum(a.size for a in self.arrays.values())

    def tensors(self, tape: ad.Tape | None = None) -> ModelParams:
        """Plain-array view (tape=None) or tape-leaf view for a train step.

        When a tape is given, each trainable array becomes a leaf tensor;
        after ``tape.backward`` its ``.grad`` aligns with the stored array.
        """
        view: dict[str, object] = {}
        for name in self.trainable_names():
            view[name] = tape.leaf(self.arrays[name]) if tape else self.arrays[name]
        return ModelParams(d=self.d, rotation_mode=self.rotation_mode, **view)


# ---------------------------------------------------------------------------
# geometric operators
# ---------------------------------------------------------------------------


def entity_points(m: ModelParams, entity_ids) -> object:
    """Unit-circle point angles for entity ids, wrapped into [-pi, pi)."""
    ids = np.asarray(entity_ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= ad.values_of(m.entity_axis).shape[0]):
        raise ValueError("entity id out of range")
    return ad.wrap(ad.gather(m.entity_axis, ids))


def nominal_cone(m: ModelParams, entity_ids) -> ConeBatch:
    """The singleton set {e}: a cone at the entity's angles with aperture 0."""
    axis = entity_points(m, entity_ids)
    return ConeBatch(axis, np.zeros(ad.values_of(axis).shape))


def relation_rotation(m: ModelParams, relation_ids) -> tuple[object, object]:
    """Axis shift (wrapped) and nonnegative aperture offset for relation ids."""
    ids = np.asarray(relation_ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= ad.values_of(m.relation_axis).shape[0]):
        raise ValueError("relation id out of range")
    rot_axis = ad.wrap(ad.gather(m.relation_axis, ids))
    rot_aperture = ad.absval(ad.gather(m.relation_aperture, ids))
    return rot_axis, rot_aperture


def project_cone(m: ModelParams, cone: ConeBatch, relation_ids) -> ConeBatch:
    """Existential edge traversal: rotate the axis, widen the aperture.

    Additive mode adds the relation aperture offset and clamps to [0, 2*pi];
    multiplicative mode scales the aperture by the (nonnegative) offset
    instead.  Both keep the invariants axis in [-pi, pi), aperture in
    [0, 2*pi].
    """
    rot_axis, rot_aperture = relation_rotation(m, relation_ids)
    axis = ad.wrap(ad.add(cone.axis, rot_axis))
    if m.rotation_mode == "additive":
        aperture = ad.clamp(ad.add(cone.aperture, rot_aperture), 0.0, TWO_PI)
    else:
        aperture = ad.clamp(ad.multiply(cone.aperture, rot_aperture), 0.0, TWO_PI)
    return ConeBatch(axis, aperture)


def _boundary_features(cone: ConeBatch) -> object:
    """Concatenated [lower-boundary angles ; upper-boundary angles]."""
    half = ad.multiply(cone.aperture, 0.5)
    lower = ad.subtract(cone.axis, half)
    upper = ad.add(cone.axis, half)
    return ad.concat((lower, upper), axis=-1)


def _mlp(x, w1, b1, w2, b2):
    hidden = ad.relu(ad.add(ad.matmul(x, w1), b1))
    return ad.add(ad.matmul(hidden, w2), b2)


def intersect_cones(m: ModelParams, cones: Sequence[ConeBatch]) -> ConeBatch:
    """Intersection of >= 2 cones.

    The axis is the argument of an attention-weighted sum of the input axis
    unit vectors; the attention weights are a per-dimension softmax (across
    inputs) of an MLP over each cone's boundary angles.  The aperture is the
    per-dimension minimum input aperture scaled by a sigmoid factor in (0,1)
    from a DeepSets network, so it never exceeds any input aperture.  Both
    parts are order-independent by construction.
    """
    if len(cones) < 2:
        raise ValueError("intersection needs at least 2 inputs")
    if not m.has_net:
        raise ValueError("this parameter store was built without the intersection net")
    feats = [_boundary_features(c) for c in cones]

    scores = ad.stack(
        [_mlp(f, m.attn_w1, m.attn_b1, m.attn_w2, m.attn_b2) for f in feats], axis=0
    )
    attn = ad.softmax(scores, axis=0)  # (n, ..., d), convex across inputs
    axes = ad.stack([c.axis for c in cones], axis=0)
    x = ad.total(ad.multiply(attn, ad.cos(axes)), axis=0)
    y = ad.total(ad.multiply(attn, ad.sin(axes)), axis=0)
    axis = ad.wrap(ad.atan2(y, x))

    pooled = ad.mean(
        ad.stack(
            [_mlp(f, m.ds_in_w1, m.ds_in_b1, m.ds_in_w2, m.ds_in_b2) for f in feats],
            axis=0,
        ),
        axis=0,
    )
    factor = ad.sigmoid(_mlp(pooled, m.ds_out_w1, m.ds_out_b1, m.ds_out_w2, m.ds_out_b2))
    min_aperture = cones[0].aperture
    for c in cones[1:]:
        min_aperture = ad.minimum(min_aperture, c.aperture)
    return ConeBatch(axis, ad.multiply(min_aperture, factor))


def negate_cone(cone: ConeBatch) -> ConeBatch:
    """The complement cone: opposite axis, complementary aperture.

    An exact involution: wrapping the axis twice by pi returns the original
    angle, and 2*pi - (2*pi - ap) = ap.
    """
    axis = ad.wrap(ad.add(cone.axis, PI))
    aperture = ad.subtract(TWO_PI, cone.aperture)
    return ConeBatch(axis, aperture)


# ---------------------------------------------------------------------------
# query embedding along the computation graph
# ---------------------------------------------------------------------------


def _embed_node(m: ModelParams, node: Node, anchor_ids, relation_ids) -> ConeBatch:
    if isinstance(node, Nominal):
        return nominal_cone(m, anchor_ids(node.entity))
    if isinstance(node, Projection):
        child = _embed_node(m, node.child, anchor_ids, relation_ids)
        return project_cone(m, child, relation_ids(node.relation))
    if isinstance(node, Intersection):
        return intersect_cones(
            m, [_embed_node(m, c, anchor_ids, relation_ids) for c in node.children]
        )
    if isinstance(node, Negation):
        return negate_cone(_embed_node(m, node.child, anchor_ids, relation_ids))
    if isinstance(node, Union):
        raise ValueError("unions must be at the root; rewrite to DNF first")
    raise ValueError(f"unknown AST node: {node!r}")


_DNF_CACHE: dict[str, tuple[Node, ...]] = {}


def _structure_disjuncts(tag: str) -> tuple[Node, ...]:
    if tag not in _DNF_CACHE:
        _DNF_CACHE[tag] = tuple(dnf_disjuncts(STRUCTURE_TEMPLATES[tag]))
    return _DNF_CACHE[tag]


def embed_query(m: ModelParams, ast: Node) -> list[ConeBatch]:
    """Embed one grounded query; returns the disjunct cones (batch size 1).

    The AST is rewritten to disjunctive normal form internally, so unions
    appear only as the length of the returned list.
    """
    return [
        _embed_node(m, d, lambda e: np.array([e]), lambda r: np.array([r]))
        for d in dnf_disjuncts(ast)
    ]


def embed_structure(m: ModelParams, tag: str, anchors, relations) -> list[ConeBatch]:
    """Embed a batch of same-structure queries from id matrices.

    ``anchors`` is (batch, n_anchor_slots), ``relations`` (batch,
    n_relation_slots); returns one (batch, d) ConeBatch per DNF disjunct.
    """
    anchors = np.asarray(anchors, dtype=np.int64)
    relations = np.asarray(relations, dtype=np.int64)
    return [
        _embed_node(m, node, lambda e: anchors[:, e], lambda r: relations[:, r])
        for node in _structure_disjuncts(tag)
    ]


# ---------------------------------------------------------------------------
# distances and the training objective
# ---------------------------------------------------------------------------


def _point_l1(theta_a, theta_b):
    """L1 distance between unit-circle points given angle arrays, summed over
    the trailing dimension axis (i.e. over all 2d real coordinates)."""
    dcos = ad.absval(ad.subtract(ad.cos(theta_a), ad.cos(theta_b)))
    dsin = ad.absval(ad.subtract(ad.sin(theta_a), ad.sin(theta_b)))
    return ad.total(ad.add(dcos, dsin), axis=-1)


def cone_entity_distance(cone: ConeBatch, entity_angles, lam: float):
    """Combined outside+inside distance between cones and entity points.

    outside = min(L1 to the upper boundary, L1 to the lower boundary);
    inside  = min(L1 to the axis, L1 between upper boundary and axis);
    combined = outside + lam * inside.  Shapes broadcast; the trailing axis
    is reduced.
    """
    half = ad.multiply(cone.aperture, 0.5)
    upper = ad.add(cone.axis, half)
    lower = ad.subtract(cone.axis, half)
    outside = ad.minimum(
        _point_l1(upper, entity_angles), _point_l1(lower, entity_angles)
    )
    inside = ad.minimum(
        _point_l1(cone.axis, entity_angles), _point_l1(upper, cone.axis)
    )
    return ad.add(outside, ad.multiply(inside, float(lam)))


def dnf_entity_distance(disjuncts: Sequence[ConeBatch], entity_angles, lam: float):
    """Distance to a DNF embedding: the minimum over the disjunct cones."""
    if not disjuncts:
        raise ValueError("a DNF embedding needs at least one disjunct")
    dist = cone_entity_distance(disjuncts[0], entity_angles, lam)
    for cone in disjuncts[1:]:
        dist = ad.minimum(dist, cone_entity_distance(cone, entity_angles, lam))
    return dist


def margin_loss(pos_dist, neg_dist, margin: float):
    """-log sigmoid(margin - d_pos) - (1/k) sum_i log sigmoid(d_neg_i - margin),
    averaged over the batch.  ``pos_dist`` is (batch,), ``neg_dist`` (batch, k).
    """
    if ad.values_of(neg_dist).shape[-1] < 1:
        raise ValueError("need at least one negative sample")
    pos_term = ad.log(ad.sigmoid(ad.subtract(float(margin), pos_dist)))
    neg_term = ad.mean(ad.log(ad.sigmoid(ad.subtract(neg_dist, float(margin)))), axis=-1)
    return ad.multiply(ad.mean(ad.add(pos_term, neg_term)), -1.0)


# ---------------------------------------------------------------------------
# parameter accounting
# ---------------------------------------------------------------------------


def intersection_net_param_count(d: int) -> int:
    """11*d^2 + 7*d scalars: attention MLP 6d^2+3d, DeepSets 5d^2+4d."""
    return sum(int(np.prod(s)) for s in _net_shapes(d).values())


def param_breakdown(n_entities: int, n_relations: int, d: int, *,
                    net: bool = True, margin: bool = True) -> dict[str, int]:
    """Itemized scalar-parameter arithmetic (no arrays are allocated).

    entity angles n_entities*d; relation axis+aperture 2*n_relations*d;
    intersection net 11*d^2+7*d; plus the stored margin scalar.
    """
    parts = {
        "entity_angles": n_entities * d,
        "relation_angles": 2 * n_relations * d,
        "intersection_net": intersection_net_param_count(d) if net else 0,
        "margin_scalar": 1 if margin else 0,
    }
    parts["total"] = sum(parts.values())
    return parts


def param_count(params: "ParameterStore | int", n_relations: int | None = None,
                d: int | None = None, *, net: bool = True, margin: bool = True) -> int:
    """Total scalar parameter count.

    Either pass a ParameterStore (counts the allocated arrays) or the three
    integers (n_entities, n_relations, d) for the pure-arithmetic audit.
    """
    if isinstance(params, ParameterStore):
        return params.param_count()
    if n_relations is None or d is None:
        raise ValueError("pass a ParameterStore or (n_entities, n_relations, d)")
    return param_breakdown(int(params), n_relations, d, net=net, margin=margin)["total"]
