"""Tests for the cone-embedding model operators, distances, and accounting."""

import math

import numpy as np
import pytest

import conequery.autodiff as ad
from conequery.cones import (
    Cone,
    Rotation,
    cone_contains,
    cone_from_axis,
    rotate,
    wrap_angle,
)
from conequery.model import (
    PI,
    TWO_PI,
    ConeBatch,
    ParameterStore,
    _embed_node,
    cone_entity_distance,
    dnf_entity_distance,
    embed_query,
    embed_structure,
    entity_points,
    intersect_cones,
    intersection_net_param_count,
    margin_loss,
    negate_cone,
    nominal_cone,
    param_breakdown,
    param_count,
    project_cone,
)
from conequery.queries import (
    ALL_STRUCTURES,
    STRUCTURE_TEMPLATES,
    Intersection,
    Nominal,
    Projection,
    Union,
    ground,
    structure_slots,
)

from _helpers import angle_dist


def toy_store(n_entities=30, n_relations=4, d=6, seed=0, **kw) -> ParameterStore:
    return ParameterStore(n_entities, n_relations, d, seed=seed, **kw)


# ---------------------------------------------------------------------------
# nominal embedding
# ---------------------------------------------------------------------------


def test_nominal_angles_wrap_on_read():
    store = toy_store()
    store.arrays["entity_axis"][3] = 3 * PI / 4 + TWO_PI  # stored raw, out of range
    m = store.tensors()
    cone = nominal_cone(m, [3])
    assert np.allclose(cone.axis[0], 3 * PI / 4, atol=1e-12)
    assert np.all(cone.aperture == 0.0)


def test_nominal_distance_to_own_entity_is_zero():
    store = toy_store()
    m = store.tensors()
    cone = nominal_cone(m, [5])
    e = entity_points(m, [5])
    assert cone_entity_distance(cone, e, lam=0.3)[0] == 0.0


def test_entity_ids_validated():
    m = toy_store().tensors()
    with pytest.raises(ValueError):
        nominal_cone(m, [99])
    with pytest.raises(ValueError):
        project_cone(m, nominal_cone(m, [0]), [77])


# ---------------------------------------------------------------------------
# projection (existential edge)
# ---------------------------------------------------------------------------


def test_zero_relation_is_identity():
    store = toy_store(d=3)
    store.arrays["relation_axis"][0] = 0.0
    store.arrays["relation_aperture"][0] = 0.0
    m = store.tensors()
    cone = ConeBatch(np.array([[0.3, -1.2, 2.0]]), np.array([[0.0, 1.0, 6.0]]))
    out = project_cone(m, cone, [0])
    # identity up to the wrap's modulo arithmetic on the axis
    assert np.all(np.vectorize(angle_dist)(out.axis, cone.axis) < 1e-12)
    assert np.array_equal(out.aperture, cone.aperture)


def test_project_from_nominal_has_relation_aperture():
    store = toy_store()
    m = store.tensors()
    cone = nominal_cone(m, [2])
    out = project_cone(m, cone, [1])
    expected = np.abs(store.arrays["relation_aperture"][1])
    assert np.allclose(out.aperture[0], expected, atol=0)


def test_project_agrees_with_exact_rotation_per_dimension():
    rng = np.random.default_rng(7)
    store = toy_store(d=5)
    # widen the test surface: arbitrary raw relation parameters incl. clamping
    store.arrays["relation_axis"][:] = rng.uniform(-7, 7, size=(4, 5))
    store.arrays["relation_aperture"][:] = rng.uniform(-3, 7, size=(4, 5))
    m = store.tensors()
    for _ in range(40):
        axis = rng.uniform(-PI, PI, size=(1, 5))
        aperture = rng.uniform(0, TWO_PI, size=(1, 5))
        rid = int(rng.integers(4))
        out = project_cone(m, ConeBatch(axis, aperture), [rid])
        for j in range(5):
            rot = Rotation(
                wrap_angle(store.arrays["relation_axis"][rid, j]),
                1.0,
                abs(store.arrays["relation_aperture"][rid, j]),
            )
            want = rotate(rot, cone_from_axis(axis[0, j], aperture[0, j]))
            got_ax, got_ap = out.axis[0, j], out.aperture[0, j]
            if want.aperture() >= TWO_PI - 1e-9:
                assert got_ap >= TWO_PI - 1e-9
            else:
                assert angle_dist(got_ax, wrap_angle(want.axis())) < 1e-9
                assert abs(got_ap - want.aperture()) < 1e-9


def test_project_multiplicative_scales_aperture():
    store = toy_store(rotation_mode="multiplicative")
    store.arrays["relation_aperture"][2] = -0.5  # read through abs -> scale 0.5
    m = store.tensors()
    cone = ConeBatch(np.zeros((1, store.d)), np.full((1, store.d), 1.2))
    out = project_cone(m, cone, [2])
    assert np.allclose(out.aperture, 0.6, atol=1e-12)
    # a nominal (aperture 0) stays a point under pure scaling
    out2 = project_cone(m, nominal_cone(m, [0]), [2])
    assert np.all(ad.values_of(out2.aperture) == 0.0)


def test_project_commutes_when_unclamped():
    store = toy_store(d=4)
    store.arrays["relation_aperture"][:] = np.abs(store.arrays["relation_aperture"])
    m = store.tensors()
    cone = ConeBatch(np.full((1, 4), 0.2), np.full((1, 4), 0.5))
    ab = project_cone(m, project_cone(m, cone, [0]), [1])
    ba = project_cone(m, project_cone(m, cone, [1]), [0])
    assert np.allclose(
        np.vectorize(angle_dist)(ab.axis, ba.axis), 0.0, atol=1e-12
    )
    assert np.allclose(ab.aperture, ba.aperture, atol=1e-12)


# ---------------------------------------------------------------------------
# intersection
# ---------------------------------------------------------------------------


def test_intersect_identical_inputs_keep_axis():
    m = toy_store(seed=3).tensors()
    q = ConeBatch(
        np.random.default_rng(0).uniform(-PI, PI, size=(2, 6)),
        np.random.default_rng(1).uniform(0, TWO_PI, size=(2, 6)),
    )
    out = intersect_cones(m, [q, q])
    assert np.all(np.vectorize(angle_dist)(out.axis, q.axis) < 1e-12)


def test_intersect_aperture_never_exceeds_min():
    rng = np.random.default_rng(4)
    for seed in range(5):
        m = toy_store(seed=seed).tensors()
        cones = [
            ConeBatch(
                rng.uniform(-PI, PI, size=(3, 6)), rng.uniform(0, TWO_PI, size=(3, 6))
            )
            for _ in range(3)
        ]
        out = intersect_cones(m, cones)
        cap = np.minimum.reduce([ad.values_of(c.aperture) for c in cones])
        assert np.all(ad.values_of(out.aperture) <= cap)
        assert np.all(ad.values_of(out.aperture) >= 0.0)


def test_intersect_permutation_invariant():
    rng = np.random.default_rng(5)
    m = toy_store(seed=9).tensors()
    cones = [
        ConeBatch(rng.uniform(-PI, PI, size=(2, 6)), rng.uniform(0, TWO_PI, size=(2, 6)))
        for _ in range(3)
    ]
    a = intersect_cones(m, cones)
    b = intersect_cones(m, [cones[2], cones[0], cones[1]])
    assert np.all(np.vectorize(angle_dist)(a.axis, b.axis) < 1e-12)
    assert np.allclose(a.aperture, b.aperture, atol=1e-12)


def test_intersect_requires_two_inputs_and_net():
    m = toy_store().tensors()
    q = ConeBatch(np.zeros((1, 6)), np.ones((1, 6)))
    with pytest.raises(ValueError):
        intersect_cones(m, [q])
    bare = toy_store(with_net=False).tensors()
    with pytest.raises(ValueError):
        intersect_cones(bare, [q, q])


# ---------------------------------------------------------------------------
# negation
# ---------------------------------------------------------------------------


def test_negate_is_involution():
    rng = np.random.default_rng(6)
    cone = ConeBatch(rng.uniform(-PI, PI, size=(4, 6)), rng.uniform(0, TWO_PI, size=(4, 6)))
    back = negate_cone(negate_cone(cone))
    assert np.all(np.vectorize(angle_dist)(back.axis, cone.axis) < 1e-12)
    assert np.allclose(back.aperture, cone.aperture, atol=1e-12)


def test_negate_full_cone_gives_point():
    cone = ConeBatch(np.array([[0.5]]), np.array([[TWO_PI]]))
    out = negate_cone(cone)
    assert np.allclose(out.aperture, 0.0, atol=1e-12)
    assert angle_dist(out.axis[0, 0], wrap_angle(0.5 + PI)) < 1e-12


def test_negate_swaps_interior_membership():
    rng = np.random.default_rng(8)
    for _ in range(60):
        axis = rng.uniform(-PI, PI)
        ap = rng.uniform(0.3, TWO_PI - 0.3)
        out = negate_cone(ConeBatch(np.array([[axis]]), np.array([[ap]])))
        original = cone_from_axis(axis, ap)
        complement = cone_from_axis(float(out.axis[0, 0]), float(out.aperture[0, 0]))
        # a point strictly inside the original is outside the complement's interior
        inner = wrap_angle(axis + rng.uniform(-0.49, 0.49) * ap)
        margin = min(
            abs(wrap_angle(inner - (axis - ap / 2))), abs(wrap_angle(inner - (axis + ap / 2)))
        )
        assert cone_contains(original, inner)
        if margin > 1e-9:
            assert not cone_contains(
                Cone(complement.lower + 1e-12, complement.upper - 1e-12), inner
            )


# ---------------------------------------------------------------------------
# query embedding
# ---------------------------------------------------------------------------


def test_embed_1p_matches_manual_projection():
    store = toy_store()
    m = store.tensors()
    ast = ground(STRUCTURE_TEMPLATES["1p"], [4], [2])
    [cone] = embed_query(m, ast)
    manual = project_cone(m, nominal_cone(m, [4]), [2])
    assert np.array_equal(ad.values_of(cone.axis), ad.values_of(manual.axis))
    assert np.array_equal(ad.values_of(cone.aperture), ad.values_of(manual.aperture))


def test_embed_2u_has_two_1p_disjuncts():
    store = toy_store()
    m = store.tensors()
    ast = ground(STRUCTURE_TEMPLATES["2u"], [1, 2], [0, 3])
    disjuncts = embed_query(m, ast)
    assert len(disjuncts) == 2
    for (anchor, rel), cone in zip([(1, 0), (2, 3)], disjuncts):
        manual = project_cone(m, nominal_cone(m, [anchor]), [rel])
        assert np.array_equal(ad.values_of(cone.axis), ad.values_of(manual.axis))


def test_embed_up_disjuncts_are_2p_chains():
    store = toy_store()
    m = store.tensors()
    ast = ground(STRUCTURE_TEMPLATES["up"], [1, 2], [0, 1, 3])
    disjuncts = embed_query(m, ast)
    assert len(disjuncts) == 2
    for (anchor, rel), cone in zip([(1, 0), (2, 1)], disjuncts):
        manual = project_cone(m, project_cone(m, nominal_cone(m, [anchor]), [rel]), [3])
        assert np.array_equal(ad.values_of(cone.axis), ad.values_of(manual.axis))
        assert np.array_equal(ad.values_of(cone.aperture), ad.values_of(manual.aperture))


def test_embed_rejects_non_root_union():
    m = toy_store().tensors()
    bad = Intersection((Union((Nominal(0), Nominal(1))), Nominal(2)))
    with pytest.raises(ValueError):
        _embed_node(m, bad, lambda e: np.array([e]), lambda r: np.array([r]))


def test_embed_structure_batched_matches_single():
    store = toy_store()
    m = store.tensors()
    rng = np.random.default_rng(3)
    for tag in ALL_STRUCTURES:
        n_a, n_r = structure_slots(tag)
        anchors = rng.integers(0, store.n_entities, size=(5, n_a))
        relations = rng.integers(0, store.n_relations, size=(5, n_r))
        batched = embed_structure(m, tag, anchors, relations)
        assert len(batched) == (2 if tag in ("2u", "up") else 1)
        for cone in batched:
            av, pv = ad.values_of(cone.axis), ad.values_of(cone.aperture)
            assert av.shape == (5, store.d)
            assert np.all(av >= -PI) and np.all(av < PI)
            assert np.all(pv >= 0.0) and np.all(pv <= TWO_PI + 1e-12)
        # row 2 of the batch == the same query embedded alone
        ast = ground(STRUCTURE_TEMPLATES[tag], anchors[2], relations[2])
        single = embed_query(m, ast)
        for bc, sc in zip(batched, single):
            assert np.allclose(ad.values_of(bc.axis)[2], ad.values_of(sc.axis)[0], atol=0)
            assert np.allclose(
                ad.values_of(bc.aperture)[2], ad.values_of(sc.aperture)[0], atol=0
            )


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------


def _chord_l1(a, b):
    return abs(math.cos(a) - math.cos(b)) + abs(math.sin(a) - math.sin(b))


def test_distance_zero_on_upper_boundary_outside_part():
    cone = ConeBatch(np.array([[0.0]]), np.array([[1.0]]))
    point = np.array([[0.5]])  # exactly the upper boundary angle
    assert cone_entity_distance(cone, point, lam=0.0)[0] == 0.0


def test_distance_nonnegative_and_broadcasts():
    rng = np.random.default_rng(11)
    cone = ConeBatch(rng.uniform(-PI, PI, size=(4, 1, 3)), rng.uniform(0, TWO_PI, size=(4, 1, 3)))
    points = rng.uniform(-PI, PI, size=(4, 7, 3))
    dist = cone_entity_distance(cone, points, lam=0.4)
    assert dist.shape == (4, 7)
    assert np.all(dist >= 0.0)


def test_distance_decreases_approaching_the_cone():
    # sweep from the complement toward the boundary along one dimension,
    # staying within the region where the chord L1 metric is monotone
    cone = ConeBatch(np.array([[0.0]]), np.array([[1.0]]))
    sweep = np.linspace(1.8, 0.5, 60).reshape(-1, 1)
    dist = cone_entity_distance(cone, sweep, lam=0.5)
    assert np.all(np.diff(dist) <= 1e-12)


def test_chord_l1_metric_peaks_before_the_antipode():
    # known property of the L1 metric over (cos, sin) coordinates: the
    # distance to a point peaks at 3*pi/4 angular gap, not at pi, so global
    # monotonicity over the whole complement cannot hold
    singleton = ConeBatch(np.array([[0.0]]), np.array([[0.0]]))
    d_peak = cone_entity_distance(singleton, np.array([[3 * PI / 4]]), lam=0.7)[0]
    d_antipode = cone_entity_distance(singleton, np.array([[PI]]), lam=0.7)[0]
    assert d_peak > d_antipode
    assert abs(d_peak - _chord_l1(0.0, 3 * PI / 4)) < 1e-12


def test_dnf_distance_minimum_semantics():
    rng = np.random.default_rng(12)
    points = rng.uniform(-PI, PI, size=(3, 4))
    a = ConeBatch(rng.uniform(-PI, PI, size=(3, 4)), rng.uniform(0, TWO_PI, size=(3, 4)))
    b = ConeBatch(rng.uniform(-PI, PI, size=(3, 4)), rng.uniform(0, TWO_PI, size=(3, 4)))
    da = cone_entity_distance(a, points, lam=0.2)
    dd = dnf_entity_distance([a], points, lam=0.2)
    assert np.array_equal(da, dd)
    assert np.array_equal(dnf_entity_distance([a, a], points, lam=0.2), da)
    both = dnf_entity_distance([a, b], points, lam=0.2)
    assert np.all(both <= da + 1e-15)
    with pytest.raises(ValueError):
        dnf_entity_distance([], points, lam=0.2)


# ---------------------------------------------------------------------------
# loss
# ---------------------------------------------------------------------------


def test_loss_at_margin_is_two_log_two():
    val = margin_loss(np.array([20.0]), np.array([[20.0, 20.0, 20.0]]), margin=20.0)
    assert abs(val - 2.0 * math.log(2.0)) < 1e-12


def test_loss_vanishes_for_perfect_separation():
    val = margin_loss(np.array([0.0]), np.array([[1e6]]), margin=20.0)
    assert 0.0 < val < 1e-8


def test_loss_requires_negatives():
    with pytest.raises(ValueError):
        margin_loss(np.array([1.0]), np.zeros((1, 0)), margin=20.0)


def test_loss_gradients_flow_to_all_parameter_groups():
    store = toy_store()
    tape = ad.Tape()
    m = store.tensors(tape)
    anchors = np.array([[0, 1], [2, 3]])
    relations = np.array([[0, 1], [1, 2]])
    disjuncts = embed_structure(m, "2in", anchors, relations)
    pos = entity_points(m, np.array([4, 5]))
    neg = entity_points(m, np.array([[6, 7, 8], [9, 10, 11]]))
    pos_dist = dnf_entity_distance(disjuncts, pos, lam=0.5)
    axis = ad.values_of(disjuncts[0].axis)
    neg_dist = dnf_entity_distance(
        [ConeBatch(ad.reshape(c.axis, (2, 1, store.d)), ad.reshape(c.aperture, (2, 1, store.d)))
         for c in disjuncts],
        neg,
        lam=0.5,
    )
    loss = margin_loss(pos_dist, neg_dist, margin=2.0)
    tape.backward(loss)
    grads = {name: m_tensor.grad for name, m_tensor in (
        ("entity_axis", m.entity_axis),
        ("relation_axis", m.relation_axis),
        ("relation_aperture", m.relation_aperture),
        ("attn_w1", m.attn_w1),
        ("ds_out_w2", m.ds_out_w2),
    )}
    for name, g in grads.items():
        assert g is not None, f"no gradient reached {name}"
        assert np.all(np.isfinite(g))
    assert np.any(grads["entity_axis"] != 0.0)
    assert np.any(grads["relation_axis"] != 0.0)
    assert axis.shape == (2, store.d)


def test_eval_path_and_train_path_agree_bitwise():
    store = toy_store()
    anchors = np.array([[0, 1, 2], [3, 4, 5]])
    relations = np.array([[0, 1, 2], [1, 2, 3]])
    points = np.array([7, 8])

    def run(m):
        disjuncts = embed_structure(m, "3i", anchors, relations)
        e = entity_points(m, points)
        return ad.values_of(dnf_entity_distance(disjuncts, e, lam=0.3))

    assert np.array_equal(run(store.tensors()), run(store.tensors(ad.Tape())))


# ---------------------------------------------------------------------------
# parameter accounting
# ---------------------------------------------------------------------------


def test_param_count_desk_example():
    assert param_count(10, 2, 4, net=False, margin=False) == 56
    store = ParameterStore(10, 2, 4, with_net=False, with_margin=False)
    assert param_count(store) == 56


def test_param_count_formula_matches_allocation():
    store = toy_store(n_entities=7, n_relations=3, d=4)
    assert param_count(store) == param_breakdown(7, 3, 4)["total"]


def test_net_param_count_closed_form():
    for d in (1, 4, 32, 800):
        assert intersection_net_param_count(d) == 11 * d * d + 7 * d


def test_param_breakdown_components_sum():
    parts = param_breakdown(100, 9, 16)
    assert parts["total"] == (
        parts["entity_angles"] + parts["relation_angles"]
        + parts["intersection_net"] + parts["margin_scalar"]
    )
    assert parts["entity_angles"] == 1600
    assert parts["relation_angles"] == 288


def test_param_count_full_scale_audit():
    # arithmetic-only reproduction of the published full-scale total
    assert param_breakdown(36556, 22, 800)["total"] == 36_325_601


def test_param_count_requires_complete_arguments():
    with pytest.raises(ValueError):
        param_count(10)


def test_store_rejects_bad_configuration():
    with pytest.raises(ValueError):
        ParameterStore(10, 2, 4, rotation_mode="spiral")
    with pytest.raises(ValueError):
        ParameterStore(0, 2, 4)


def test_store_seeding_is_deterministic():
    a = toy_store(seed=42)
    b = toy_store(seed=42)
    c = toy_store(seed=43)
    for name in a.arrays:
        assert np.array_equal(a.arrays[name], b.arrays[name])
    assert not np.array_equal(a.arrays["entity_axis"], c.arrays["entity_axis"])
