import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cuboidfit.priors import (
    GENERIC_CLASS,
    PriorTable,
    SIGMA_EIGENVALUE_FLOOR,
    SizePrior,
    UnknownClassError,
    fit_prior,
    geometric_median,
)


def grid_search_median(pts, levels=5, grid=21):
    """Brute-force oracle: refine a grid around the best cell."""
    lo = pts.min(axis=0) - 0.5
    hi = pts.max(axis=0) + 0.5
    best = None
    for _ in range(levels):
        axes = [np.linspace(lo[k], hi[k], grid) for k in range(pts.shape[1])]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, pts.shape[1])
        obj = np.linalg.norm(mesh[:, None, :] - pts[None], axis=2).sum(axis=1)
        best = mesh[np.argmin(obj)]
        span = (hi - lo) / (grid - 1)
        lo, hi = best - span, best + span
    return best


class TestGeometricMedian:
    def test_singleton(self):
        v = np.array([1.0, 2.0, 3.0])
        np.testing.assert_allclose(geometric_median([v]), v)

    def test_collinear_1d_is_middle(self):
        m = geometric_median(np.array([[0.0], [1.0], [10.0]]))
        np.testing.assert_allclose(m, [1.0], atol=1e-9)

    def test_matches_grid_oracle(self):
        rng = np.random.default_rng(0)
        for trial in range(20):
            pts = rng.normal(0, 1, size=(rng.integers(5, 50), 3))
            m = geometric_median(pts)
            oracle = grid_search_median(pts)
            assert np.linalg.norm(m - oracle) < 1e-3

    def test_objective_at_minimizer(self):
        rng = np.random.default_rng(1)
        pts = rng.normal(0, 2, size=(30, 3))
        m = geometric_median(pts)
        obj = lambda x: np.linalg.norm(pts - x, axis=1).sum()
        base = obj(m)
        assert all(base <= obj(p) + 1e-9 for p in pts)

    @settings(deadline=None, max_examples=20)
    @given(st.integers(0, 2**31 - 1))
    def test_translation_rotation_equivariance(self, seed):
        rng = np.random.default_rng(seed)
        pts = rng.normal(0, 1, size=(12, 3))
        shift = rng.normal(0, 5, 3)
        theta = rng.uniform(0, 2 * np.pi)
        c, s = np.cos(theta), np.sin(theta)
        R = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
        m = geometric_median(pts)
        m_shifted = geometric_median(pts + shift)
        m_rotated = geometric_median(pts @ R.T)
        np.testing.assert_allclose(m_shifted, m + shift, atol=1e-8)
        np.testing.assert_allclose(m_rotated, R @ m, atol=1e-8)

    def test_iterate_landing_on_data_point(self):
        # Median of this configuration IS the repeated central point.
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        np.testing.assert_allclose(geometric_median(pts), [0.0, 0.0], atol=1e-9)


class TestFitPrior:
    def test_identical_samples(self):
        d = np.array([4.5, 1.8, 1.5])
        prior = fit_prior("sedan", np.tile(d, (6, 1)))
        np.testing.assert_allclose(prior.mu, d, atol=1e-9)
        np.testing.assert_allclose(prior.sigma, SIGMA_EIGENVALUE_FLOOR * np.eye(3), atol=1e-12)

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            fit_prior("x", np.ones((3, 3)))

    def test_gaussian_consistency(self):
        rng = np.random.default_rng(3)
        true_mu = np.array([4.6, 1.8, 1.5])
        true_sigma = np.diag([0.3**2, 0.1**2, 0.08**2])
        n = 400
        samples = rng.multivariate_normal(true_mu, true_sigma, size=n)
        prior = fit_prior("sedan", samples)
        assert np.linalg.norm(prior.mu - samples.mean(axis=0)) < 3 * 0.3 / np.sqrt(n) * 3
        sample_cov = np.cov(samples.T)
        # geometric-median covariance is a shrunk but proportional estimate
        assert np.linalg.norm(prior.sigma - sample_cov) / np.linalg.norm(sample_cov) < 0.6

    def test_contamination_robustness(self):
        rng = np.random.default_rng(4)
        true_mu = np.array([4.6, 1.8, 1.5])
        wins = 0
        for trial in range(20):
            clean = rng.multivariate_normal(true_mu, np.diag([0.09, 0.01, 0.0064]), size=40)
            outliers = 10.0 * rng.multivariate_normal(true_mu, np.diag([0.09, 0.01, 0.0064]), size=10)
            data = np.vstack([clean, outliers])
            med_err = np.linalg.norm(fit_prior("c", data).mu - true_mu)
            mean_err = np.linalg.norm(data.mean(axis=0) - true_mu)
            if med_err < mean_err:
                wins += 1
        assert wins >= 19

    def test_sigma_floor(self):
        rng = np.random.default_rng(5)
        # nearly degenerate data (all on a line)
        base = rng.normal(0, 1, 3)
        samples = np.abs(np.array([4.0, 1.8, 1.4]) + np.outer(rng.normal(0, 0.1, 10), base))
        prior = fit_prior("c", samples)
        assert np.linalg.eigvalsh(prior.sigma).min() >= SIGMA_EIGENVALUE_FLOOR - 1e-15


class TestPriorTable:
    def make_table(self):
        rng = np.random.default_rng(6)
        priors = [
            fit_prior(name, np.abs(rng.normal([4.5, 1.8, 1.5], 0.2, size=(8, 3))))
            for name in ("sedan", "van", "bus")
        ]
        return PriorTable(priors)

    def test_lookup_present(self):
        table = self.make_table()
        assert table.lookup("sedan").class_name == "sedan"

    def test_unknown_with_fallback(self):
        table = self.make_table()
        generic = table.lookup("hovercraft")
        assert generic.class_name == GENERIC_CLASS
        assert np.all(generic.mu > 0)

    def test_unknown_without_fallback(self):
        table = self.make_table()
        with pytest.raises(UnknownClassError):
            table.lookup("hovercraft", fallback=False)

    def test_save_load_round_trip(self, tmp_path):
        table = self.make_table()
        path = tmp_path / "priors.json"
        table.save(str(path))
        again = PriorTable.load(str(path))
        for name in table.class_names():
            a, b = table.lookup(name), again.lookup(name)
            np.testing.assert_array_equal(a.mu, b.mu)
            np.testing.assert_array_equal(a.sigma, b.sigma)
        # bit-stable on re-save
        path2 = tmp_path / "priors2.json"
        again.save(str(path2))
        assert path.read_bytes() == path2.read_bytes()

    def test_default_table_loads(self):
        table = PriorTable.default()
        assert len(table) >= 3
        sedan = table.lookup("sedan")
        assert np.all(np.linalg.eigvalsh(sedan.sigma) > 0)

    def test_chol_factor_identity(self):
        prior = PriorTable.default().lookup("sedan")
        L = prior.chol_inv_factor()
        np.testing.assert_allclose(L @ L.T, prior.sigma_inv, atol=1e-10)


class TestSizePriorValidation:
    def test_rejects_nonsymmetric(self):
        with pytest.raises(ValueError):
            SizePrior("x", mu=[4, 2, 1.5], sigma=[[1, 0.5, 0], [0, 1, 0], [0, 0, 1]], n_samples=1)

    def test_rejects_nonpositive_mu(self):
        with pytest.raises(ValueError):
            SizePrior("x", mu=[0, 2, 1.5], sigma=np.eye(3), n_samples=1)
