"""Figure rendering: files appear, are valid PNGs, and reruns are identical."""

import numpy as np

from bassmt.martingale import sample_paths
from bassmt.measures import DiscreteMeasure
from bassmt.plots import (
    plot_circle_construction,
    plot_derivative_recovery,
    plot_measures,
    plot_paths,
)
from bassmt.recipes import binary_instance
from bassmt.solver import solve_bass_1d

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _is_png(path) -> bool:
    with open(path, "rb") as fh:
        return fh.read(8) == PNG_MAGIC


def test_plot_paths_1d(tmp_path):
    mu, nu = binary_instance()
    sol = solve_bass_1d(mu, nu)
    ens = sample_paths(sol, 40, n_steps=8, seed=0)
    out = plot_paths(ens, tmp_path / "p.png")
    assert _is_png(out)


def test_plot_paths_2d(tmp_path):
    rng = np.random.default_rng(0)
    times = np.linspace(0.0, 1.0, 5)
    from bassmt.martingale import PathEnsemble

    B = np.cumsum(rng.normal(size=(6, 5, 2)) * 0.5, axis=1)
    B[:, 0] = 0.0
    ens = PathEnsemble(
        n_paths=6, times=times, B=B, M=0.5 * B,
        covar=np.zeros(6), quad_var=np.zeros(6), seed=0,
    )
    assert _is_png(plot_paths(ens, tmp_path / "p2.png"))


def test_plot_measures_both_dims(tmp_path):
    mu, nu = binary_instance()
    alpha = DiscreteMeasure([[0.0]], [1.0])
    assert _is_png(plot_measures(mu, nu, alpha, tmp_path / "m1.png"))
    four = DiscreteMeasure([[1, 1], [1, -1], [-1, 1], [-1, -1]], [0.25] * 4)
    origin = DiscreteMeasure([[0.0, 0.0]], [1.0])
    assert _is_png(plot_measures(origin, four, origin, tmp_path / "m2.png"))


def test_plot_circle_and_recovery(tmp_path):
    rng = np.random.default_rng(1)
    ring = rng.normal(size=(300, 2))
    ring /= np.linalg.norm(ring, axis=1, keepdims=True)
    mu = DiscreteMeasure(ring * 0.99, np.full(300, 1 / 300))
    nu = DiscreteMeasure(ring * np.where(rng.random((300, 1)) < 0.5, 0.5, 1.6),
                         np.full(300, 1 / 300))
    assert _is_png(plot_circle_construction(mu, nu, tmp_path / "c.png"))
    grid = np.linspace(-3, 3, 50)
    assert _is_png(plot_derivative_recovery(
        grid, np.tanh(grid), np.arctan(grid), tmp_path / "d.png",
        labels=("recovered", "target"),
    ))


def test_figures_are_deterministic(tmp_path):
    mu, nu = binary_instance()
    alpha = DiscreteMeasure([[0.0]], [1.0])
    a = plot_measures(mu, nu, alpha, tmp_path / "a.png")
    b = plot_measures(mu, nu, alpha, tmp_path / "b.png")
    with open(a, "rb") as fa, open(b, "rb") as fb:
        assert fa.read() == fb.read()
