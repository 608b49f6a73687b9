import numpy as np
import pytest
from scipy.integrate import quad

from densityridge import InputError, generate
from densityridge.datasets import (
    DATASETS,
    make_crescent,
    make_half_cylinder,
    make_helix,
    make_hemisphere,
    make_sphere,
    make_spiral,
    make_swiss_roll,
    spiral_arc_length,
    swiss_roll_arc_length,
)


@pytest.mark.parametrize("name", sorted(DATASETS))
def test_seed_determinism(name):
    a = generate(name, n=50, seed=7)
    b = generate(name, n=50, seed=7)
    c = generate(name, n=50, seed=8)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.truth, b.truth)
    assert not np.array_equal(a.X, c.X)
    assert a.truth.shape[0] == 50 and a.clean_points.shape == a.X.shape
    assert a.name == name and a.seed == 7


def test_generate_rejects_unknown_and_bad_args():
    with pytest.raises(InputError):
        generate("torus")
    with pytest.raises(InputError):
        make_spiral(n=0)
    with pytest.raises(InputError):
        make_spiral(noise_sd=-1.0)


def test_spiral_parameterization():
    ds = make_spiral(n=300, noise_sd=0.0, seed=1)
    t = ds.truth[:, 0]
    r = 2.0 * t / (2 * np.pi)
    np.testing.assert_allclose(ds.X, np.column_stack([r * np.cos(t), r * np.sin(t)]), atol=1e-12)
    # the curve ends at (2, 0) for t = 2 pi
    a = 2.0 / (2 * np.pi)
    th = 2 * np.pi
    np.testing.assert_allclose([a * th * np.cos(th), a * th * np.sin(th)], [2.0, 0.0], atol=1e-12)
    length, _ = quad(lambda s: a * np.sqrt(1 + s * s), 0, 2 * np.pi)
    assert spiral_arc_length(2 * np.pi) == pytest.approx(length, rel=1e-10)


def test_swiss_roll_geometry():
    ds = make_swiss_roll(n=400, noise_sd=0.0, seed=2)
    x, h, z = ds.X.T
    t = np.sqrt(x**2 + z**2)
    np.testing.assert_allclose(np.cos(t) * t, x, atol=1e-9)
    np.testing.assert_allclose(ds.truth[:, 1], h)
    t0 = 1.5 * np.pi
    for tt in (t0, 2 * np.pi, 4.5 * np.pi):
        expected, _ = quad(lambda s: np.sqrt(1 + s * s), t0, tt)
        assert swiss_roll_arc_length(tt) == pytest.approx(expected, abs=1e-9)
    np.testing.assert_allclose(ds.truth[:, 0], swiss_roll_arc_length(t), atol=1e-8)


def test_helix_and_degenerate_pitch():
    ds = make_helix(n=200, noise_sd=0.0, seed=3)
    np.testing.assert_allclose(ds.X[:, 0] ** 2 + ds.X[:, 1] ** 2, 1.0)
    flat = make_helix(n=100, noise_sd=0.0, seed=3, pitch=0.0)
    np.testing.assert_array_equal(flat.X[:, 2], 0.0)
    noisy = make_helix(n=100, noise_sd=0.0, seed=3)
    assert np.mean((noisy.X - noisy.clean_points) ** 2) == 0.0


def test_half_cylinder():
    ds = make_half_cylinder(n=300, noise_sd=0.0, seed=4)
    np.testing.assert_allclose(ds.X[:, 0] ** 2 + ds.X[:, 1] ** 2, 1.0)
    phi, h = ds.truth.T
    np.testing.assert_allclose(ds.X, np.column_stack([np.cos(phi), np.sin(phi), h]))
    assert np.all((phi >= 0) & (phi <= np.pi))


def test_sphere_and_hemisphere():
    ds = make_sphere(n=2000, noise_sd=0.0, seed=5)
    np.testing.assert_allclose(np.linalg.norm(ds.X, axis=1), 1.0)
    assert np.linalg.norm(ds.X.mean(axis=0)) < 3 / np.sqrt(2000)
    hemi = make_hemisphere(n=500, noise_sd=0.0, seed=5)
    assert np.all(hemi.X[:, 2] >= 0)
    noisy = make_sphere(n=2000, noise_sd=0.1, seed=5)
    assert np.std(np.linalg.norm(noisy.X, axis=1) - 1) == pytest.approx(0.1, rel=0.1)


def test_crescent():
    flat = make_crescent(n=300, noise_sd=0.0, seed=6, bend=0.0)
    np.testing.assert_array_equal(flat.X, flat.truth)
    assert np.all(np.abs(flat.X[:, 0]) <= 2.0) and np.all(np.abs(flat.X[:, 1]) <= 0.25)
    bent = make_crescent(n=300, noise_sd=0.0, seed=6)
    u, v = bent.truth.T
    np.testing.assert_allclose(bent.X[:, 1], v - 0.5 * u**2)


def test_points_are_read_only():
    ds = make_sphere(n=10, seed=0)
    with pytest.raises(ValueError):
        ds.X[0, 0] = 5.0
