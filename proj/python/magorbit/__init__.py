"""Closed magnetic geodesics on the 2-sphere."""

import json

from ._core import (
    Curvature,
    Error,
    Metric,
    audit,
    continuation,
    find_orbits,
    integrate,
    latitude_radius,
    latitude_state,
    orthogonality_defect,
    reduced_field,
    reduced_zeros,
    run_cli,
    shoot,
)


def metric(spec):
    """Metric from a dict such as {"kind": "conformal_zonal", "coeffs": [0.1]}, or "round"."""
    if spec == "round":
        return Metric.round()
    return Metric.from_json(json.dumps(spec))


def curvature(spec):
    """Curvature from a number or a dict such as {"kind": "zonal", "coeffs": [1, 0.3]}."""
    if isinstance(spec, (int, float)):
        return Curvature.constant(float(spec))
    return Curvature.from_json(json.dumps(spec))


__all__ = [
    "Curvature",
    "Error",
    "Metric",
    "audit",
    "continuation",
    "curvature",
    "find_orbits",
    "integrate",
    "latitude_radius",
    "latitude_state",
    "metric",
    "orthogonality_defect",
    "reduced_field",
    "reduced_zeros",
    "run_cli",
    "shoot",
]
