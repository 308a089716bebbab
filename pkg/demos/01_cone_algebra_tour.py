#!/usr/bin/env python3
"""A guided tour of the exact cone algebra on the unit circle.

Run from the repository root:

    python3 demos/01_cone_algebra_tour.py

Everything here is exact interval arithmetic on angles — no embeddings, no
training.  The tour walks through cone construction, canonicalization,
the Boolean operations, and what rotations do and do not preserve.
"""

from conequery.cones import (
    EMPTY_MC,
    PI,
    TWO_PI,
    Cone,
    Rotation,
    canonicalize,
    classify,
    compose,
    format_multicone,
    full_cone,
    inverse,
    mc_complement,
    mc_contains,
    mc_equal,
    mc_intersect,
    mc_rotate,
    mc_union,
    rotate,
)


def show(title: str, value) -> None:
    text = format_multicone(value) if not isinstance(value, str) else value
    print(f"  {title:<46} {text}")


def header(title: str) -> None:
    print(f"\n== {title} ==")


def main() -> None:
    header("cones are angular intervals")
    quarter = Cone(0.0, 0.5 * PI)
    show("quarter circle C(0, pi/2)", canonicalize([quarter]))
    show("classify", classify(quarter))
    print(f"  contains pi/4? {mc_contains(canonicalize([quarter]), 0.25 * PI)}; "
          f"contains pi? {mc_contains(canonicalize([quarter]), PI)}")

    header("canonicalization merges and wraps")
    ragged = [Cone(5.0, 7.0), Cone(0.6, 1.1), Cone(1.0, 2.0)]
    show("raw pieces (5,7), (0.6,1.1), (1,2)", canonicalize(ragged))
    print("  the (5,7) piece crosses the +/-pi seam and (0.6,1.1) merges")
    print("  with (1,2); canonical forms are sorted, disjoint, non-touching")

    header("union / intersection / complement")
    a = canonicalize([Cone(0.0, 2.0)])
    b = canonicalize([Cone(1.5, 3.5)])
    show("a", a)
    show("b", b)
    show("a union b", mc_union(a, b))
    show("a intersect b", mc_intersect(a, b))
    show("complement of a", mc_complement(a))
    lhs = mc_complement(mc_union(a, b))
    rhs = mc_intersect(mc_complement(a), mc_complement(b))
    print(f"  De Morgan holds exactly: {mc_equal(lhs, rhs)}")
    show("a union empty (identity)", mc_union(a, EMPTY_MC))
    show("a intersect full (identity)",
         mc_intersect(a, canonicalize([full_cone()])))

    header("rotations act on axis and aperture")
    c = Cone(0.0, 1.0)
    show("start", canonicalize([c]))
    show("axis shift by pi/2: R(pi/2, 1, 0)",
         canonicalize([rotate(Rotation(0.5 * PI, 1.0, 0.0), c)]))
    show("widen by 0.8: R(0, 1, 0.8)",
         canonicalize([rotate(Rotation(0.0, 1.0, 0.8), c)]))
    show("scale aperture x3: R(0, 3, 0)",
         canonicalize([rotate(Rotation(0.0, 3.0, 0.0), c)]))
    show("scale x9 saturates to the full circle",
         canonicalize([rotate(Rotation(0.0, 9.0, 0.0), c)]))

    header("composition and inverse")
    r1 = Rotation(0.3, 1.0, 0.4)
    r2 = Rotation(-1.0, 1.0, 0.2)
    seq = rotate(r2, rotate(r1, c))
    one = rotate(compose(r1, r2), c)
    print(f"  applying r1 then r2 equals the composed rotation: "
          f"{mc_equal(canonicalize([seq]), canonicalize([one]))}")
    r = Rotation(0.7, 2.0, 0.0)
    back = rotate(inverse(r), rotate(r, c))
    print(f"  inverse(R(0.7, 2, 0)) = R(-0.7, 1/2, 0) undoes it exactly: "
          f"{mc_equal(canonicalize([back]), canonicalize([c]))}")
    print("  (inverses are exact within the pure shift or pure scale")
    print("  families; mixing scale and widening leaves a residual)")

    header("order matters once apertures can saturate")
    widen, shrink = Rotation(0.0, 2.0, 0.0), Rotation(0.0, 0.5, 0.0)
    base = Cone(0.0, PI)
    show("base C(0, pi)", canonicalize([base]))
    show("widen x2 then halve", canonicalize([rotate(shrink, rotate(widen, base))]))
    show("halve then widen x2", canonicalize([rotate(widen, rotate(shrink, base))]))
    print("  widening first saturates at the full circle and the information")
    print("  is gone; shrinking first round-trips back to C(0, pi)")

    header("distributing a rotation over a union")
    half_a = canonicalize([Cone(0.0, PI)])
    half_b = canonicalize([Cone(PI, TWO_PI)])
    shift = Rotation(0.3, 1.0, 0.2)
    ok = mc_equal(mc_rotate(shift, mc_union(half_a, half_b)),
                  mc_union(mc_rotate(shift, half_a), mc_rotate(shift, half_b)))
    print(f"  axis shifts + widening distribute over union: {ok}")
    lhs = mc_rotate(shrink, mc_union(half_a, half_b))
    rhs = mc_union(mc_rotate(shrink, half_a), mc_rotate(shrink, half_b))
    show("halving the union of two halves", lhs)
    show("union of the halved halves", rhs)
    print("  aperture scaling does not distribute: the union of the two")
    print("  halves is the full circle, which halving leaves untouched")


if __name__ == "__main__":
    main()
