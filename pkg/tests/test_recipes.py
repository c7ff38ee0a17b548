"""Built-in example instances: shapes, closed-form anchors, determinism."""

import math

import numpy as np
from scipy.special import ndtr

from bassmt.recipes import (
    CIRCLE_KINK,
    CIRCLE_SLOPES,
    arctan_instance,
    binary_instance,
    circle_alpha,
    circle_potential,
)


def test_binary_instance():
    mu, nu = binary_instance()
    assert mu.n_atoms == 1 and abs(mu.atoms[0, 0]) == 0.0
    assert np.allclose(np.sort(nu.atoms.ravel()), [-1.0, 1.0])
    assert np.allclose(nu.weights, 0.5)


class TestCirclePotential:
    def test_radial_profile_slopes(self):
        v = circle_potential()
        # h(r) has slope 1/2 inside the kink, 8/5 beyond
        for r0, slope in ((1.0, CIRCLE_SLOPES[0]), (5.0, CIRCLE_SLOPES[1])):
            x = np.array([[r0, 0.0]])
            g = v.grad(x)[0]
            assert abs(np.linalg.norm(g) - slope) < 1e-12
            assert abs(g[1]) < 1e-15

    def test_gradient_is_radial(self):
        v = circle_potential()
        x = np.array([[2.0, 1.5]])
        g = v.grad(x)[0]
        unit = x[0] / np.linalg.norm(x[0])
        assert abs(abs(g @ unit) - np.linalg.norm(g)) < 1e-12

    def test_value_at_origin_finite(self):
        v = circle_potential()
        assert np.isfinite(v.value(np.zeros((1, 2)))[0])

    def test_kink_location(self):
        assert CIRCLE_KINK == 3.17


def test_circle_alpha_uniform_on_circle():
    a = circle_alpha(radius=3.0, n_atoms=256)
    assert a.n_atoms == 256
    assert np.allclose(np.linalg.norm(a.atoms, axis=1), 3.0)
    assert np.allclose(a.weights, 1.0 / 256)


class TestArctanInstance:
    def test_mu_atoms_closed_form(self):
        mu, _, oracle = arctan_instance()
        # (arctan * gamma)(+-1), frozen from a 128-node reference quadrature
        assert np.allclose(
            np.sort(mu.atoms.ravel()),
            [-0.6080861478123456, 0.6080861478123456],
            atol=1e-9,
        )
        assert oracle is np.arctan

    def test_nu_quantile_inverts_the_image_cdf(self):
        _, nu, _ = arctan_instance()
        # F_nu(y) = (Phi(tan y - 1) + Phi(tan y + 1))/2; check Q(F(y)) = y
        for y in (-0.9, -0.2, 0.4, 1.1):
            u = 0.5 * (ndtr(math.tan(y) - 1.0) + ndtr(math.tan(y) + 1.0))
            assert abs(nu(np.array([u]))[0] - y) < 1e-10

    def test_nu_range_inside_halfpi(self):
        _, nu, _ = arctan_instance()
        vals = nu(np.linspace(1e-6, 1 - 1e-6, 201))
        assert vals.min() > -math.pi / 2 and vals.max() < math.pi / 2
        assert np.all(np.diff(vals) >= 0)
