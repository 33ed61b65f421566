import math

import numpy as np
import pytest

import magorbit


def test_latitude_circle_closes():
    m = magorbit.metric("round")
    k = magorbit.curvature(1.0)
    x0, v0 = magorbit.latitude_state(1.0)
    tr = magorbit.integrate(m, k, x0, v0, 1.0, samples=64)
    assert tr["x"].shape == (65, 3)
    assert np.linalg.norm(tr["x"][-1] - tr["x"][0]) < 1e-9
    assert tr["drift"] < 1e-9
    r = magorbit.latitude_radius(1.0)
    assert r == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert np.allclose(np.hypot(tr["x"][:, 0], tr["x"][:, 1]), r, atol=1e-9)


def test_two_orbits_and_reduction():
    m = magorbit.metric("round")
    k = magorbit.curvature({"kind": "zonal", "coeffs": [1.0, 0.01]})
    orbits = magorbit.find_orbits(m, k, seeds=40)
    assert len(orbits) == 2
    assert sorted(o["degree"] for o in orbits) == [-1, -1]
    rep = magorbit.reduced_zeros(1.0, magorbit.Curvature.height())
    assert rep["predicted_orbit_degrees"] == [-1, -1]
    w = np.array([0.6, 0.0, 0.8])
    r = magorbit.latitude_radius(1.0)
    c = -4 * math.pi**2 * r**3 / (4 * math.pi**2 * r**2 + 1)
    field = magorbit.reduced_field(1.0, magorbit.Curvature.height(), w)
    assert field @ w == pytest.approx(0.0, abs=1e-14)
    assert np.linalg.norm(field) == pytest.approx(abs(c) * 0.6, abs=1e-12)


def test_audit_and_errors():
    rep = magorbit.audit(magorbit.metric("round"), magorbit.curvature(1.0))
    verdicts = {h["name"]: h["verdict"] for h in rep["hypotheses"]}
    assert verdicts["cond_K_pos"] == "satisfied"
    assert verdicts["cond_K_pinch"] == "satisfied"
    with pytest.raises(magorbit.Error) as info:
        magorbit.metric({"kind": "conformal_zonal", "coefs": [0.1]})
    assert info.value.kind == "configuration error"
    assert "coefs" in str(info.value)


def test_cli_entry(tmp_path):
    code, out, err = magorbit.run_cli(["reduce", "--out", str(tmp_path)])
    assert code == 0, err
    assert (tmp_path / "reduction.json").exists()
    assert (tmp_path / "manifest.json").exists()
    code, _, err = magorbit.run_cli(["simulate", "--metric", "{bad", "--out", str(tmp_path)])
    assert code == 1
