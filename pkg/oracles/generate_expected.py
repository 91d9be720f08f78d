#!/usr/bin/env python3
"""Regenerate the catalog expected tables from closed-form parametrizations.

Deliberately independent of the morseflow package: everything here comes
from the parametrizations of the catalog surfaces, differentiated by
hand, so the shipped scenarios/*.expected.json files are reproducible
without trusting any code they are used to test. Run with no arguments
to rewrite the data files in src/morseflow/scenarios/.
"""

import json
import math
import os
import sys

HERE = os.path.dirname(os.path.abspath(__file__))
TARGET = os.path.join(HERE, "..", "src", "morseflow", "scenarios")


def eig2(a11, a12, a22):
    """Eigenvalues of a symmetric 2x2 matrix, ascending."""
    mean = 0.5 * (a11 + a22)
    disc = math.sqrt(max(0.0, (0.5 * (a11 - a22)) ** 2 + a12 * a12))
    return mean - disc, mean + disc


def sphere_height(dim):
    """Unit sphere S^dim in R^{dim+1} with a unit linear height a.x.

    Critical points are +-a with values +-1. In geodesic normal
    coordinates at +-a the height is +-cos(geodesic distance), so the
    intrinsic Hessian at the minimum is +1 times the metric (every
    eigenvalue 1) and -1 times the metric at the maximum; indices are 0
    and dim. Two critical points of index parity (+1, (-1)^dim) give
    Euler characteristic 1 + (-1)^dim. The single orbit class runs from
    the maximum to the minimum along great circles, and the round sphere
    has constant sectional curvature 1.
    """
    coef = 1.0 / math.sqrt(dim + 1)
    minimum = [-coef] * (dim + 1)
    maximum = [coef] * (dim + 1)
    if dim == 2:
        # The catalog's 2-sphere uses the coordinate height x3 (a = e3).
        minimum = [0.0, 0.0, -1.0]
        maximum = [0.0, 0.0, 1.0]
    return {
        "schema": "morseflow.scenario_expected.v1",
        "values": [-1.0, 1.0],
        "indices": [0, dim],
        "locations": [minimum, maximum],
        "lambda_min": {"0": 1.0},
        "euler_characteristic": 1 + (-1) ** dim,
        "directed_edges": [[1, 0]],
        "curvature_class": "constant_positive",
        "sectional_curvature": 1.0,
    }


def torus_upright(big_radius=2.0, tube_radius=1.0):
    """Torus of revolution about the x3 axis, height across the hole.

    Parametrize x = ((R + r cos v) cos u, (R + r cos v) sin u, r sin v)
    with f = x1 = (R + r cos v) cos u. Stationarity forces
    sin u = sin v = 0, so u, v lie in {0, pi}: four critical points
    (+-(R +- r), 0, 0). The metric is diag((R + r cos v)^2, r^2) and the
    coordinate Hessian at a critical point is
    diag(-(R + r cos v) cos u, -r cos v cos u), so the intrinsic
    eigenvalues are -cos u / (R + r cos v) and -cos u cos v / r.

    Orbits: the planes x3 = 0 and x2 = 0 are preserved by the flow
    (both the torus and f are symmetric under flipping either
    coordinate), and they intersect the torus in four circles:
      outer equator (v = 0):  f = (R + r) cos u, max -> min;
      tube circle u = 0:      f = R + r cos v, max -> upper saddle;
      inner equator (v = pi): f = (R - r) cos u, upper -> lower saddle;
      tube circle u = pi:     f = -(R + r cos v), lower saddle -> min.
    With ids in ascending critical value this is the edge list below.
    """
    R, r = big_radius, tube_radius
    points = []
    for u in (0.0, math.pi):
        for v in (0.0, math.pi):
            radius = R + r * math.cos(v)
            value = radius * math.cos(u)
            lam_u = -math.cos(u) / radius
            lam_v = -math.cos(u) * math.cos(v) / r
            eigs = sorted((lam_u, lam_v))
            points.append({
                "location": [value, 0.0, 0.0],
                "value": value,
                "eigenvalues": eigs,
                "index": sum(1 for e in eigs if e < 0),
            })
    points.sort(key=lambda p: p["value"])
    assert [p["value"] for p in points] == [-(R + r), -(R - r), R - r, R + r]
    chi = sum((-1) ** p["index"] for p in points)
    return {
        "schema": "morseflow.scenario_expected.v1",
        "values": [p["value"] for p in points],
        "indices": [p["index"] for p in points],
        "locations": [p["location"] for p in points],
        "lambda_min": {"0": points[0]["eigenvalues"][0]},
        "euler_characteristic": chi,
        "directed_edges": [[1, 0], [2, 1], [3, 0], [3, 2]],
        "curvature_class": "variable",
        "sectional_curvature": None,
    }


def clifford():
    """Product of two circles of radius 1/sqrt(2) in R^4, f = x1 + x3.

    With angles x = (cos a, sin a, cos b, sin b)/sqrt(2) the height is
    (cos a + cos b)/sqrt(2); critical points sit at a, b in {0, pi}. The
    metric is diag(1/2, 1/2) (hence flat: constant in the angle chart)
    and the coordinate Hessian diag(-cos a, -cos b)/sqrt(2), so each
    intrinsic eigenvalue is -sqrt(2) cos(angle). The flow decouples into
    the two angles; each angle runs 0 -> pi, giving the four edges
    max -> each saddle -> min.
    """
    c = math.sqrt(0.5)  # correctly rounded 1/sqrt(2)
    points = []
    for ca in (1.0, -1.0):
        for cb in (1.0, -1.0):
            value = (ca + cb) * c
            eigs = sorted((-math.sqrt(2.0) * ca, -math.sqrt(2.0) * cb))
            points.append({
                "location": [ca * c, 0.0, cb * c, 0.0],
                "value": value,
                "eigenvalues": eigs,
                "index": sum(1 for e in eigs if e < 0),
            })
    points.sort(key=lambda p: (p["value"], tuple(p["location"])))
    chi = sum((-1) ** p["index"] for p in points)
    return {
        "schema": "morseflow.scenario_expected.v1",
        "values": [p["value"] for p in points],
        "indices": [p["index"] for p in points],
        "locations": [p["location"] for p in points],
        "lambda_min": {"0": points[0]["eigenvalues"][0]},
        "euler_characteristic": chi,
        "directed_edges": [[1, 0], [2, 0], [3, 1], [3, 2]],
        "curvature_class": "flat",
        "sectional_curvature": 0.0,
    }


def build_all():
    return {
        "sphere2": sphere_height(2),
        "sphereM": sphere_height(4),
        "torus_upright": torus_upright(),
        "clifford": clifford(),
    }


def main():
    tables = build_all()
    for name, table in tables.items():
        path = os.path.join(TARGET, f"{name}.expected.json")
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(table, handle, indent=2)
            handle.write("\n")
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
