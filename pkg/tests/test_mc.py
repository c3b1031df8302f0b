"""Monte Carlo engine, batch-means error bars and seeded streams."""

import math

import numpy as np
import pytest
import scipy.special
from hypothesis import given, settings
from hypothesis import strategies as st

from spinlab import exact, graphs, mc, stats
from spinlab.errors import InsufficientSamples, InvalidParameter
from spinlab.rng import make_rng


def edge_correlation(beta, N):
    """``E s1.s2`` for a single free edge."""
    if N == 1:
        return math.tanh(beta)
    if N == 2:
        return scipy.special.ive(1, beta) / scipy.special.ive(0, beta)
    if N == 3:
        return 1 / math.tanh(beta) - 1 / beta
    raise ValueError(N)


# -- rng ------------------------------------------------------------------------


def test_streams_reproducible_and_distinct():
    a = make_rng(5, 1).random(4)
    assert np.array_equal(a, make_rng(5, 1).random(4))
    assert not np.array_equal(a, make_rng(5, 2).random(4))
    assert not np.array_equal(a, make_rng(6, 1).random(4))
    with pytest.raises(InvalidParameter):
        make_rng(None)


# -- stats ----------------------------------------------------------------------


def test_batch_means_ar1():
    # AR(1) with phi = 0.4 and unit innovations: asymptotic variance 1 / (1 - phi)^2
    rng = np.random.default_rng(57)
    n, phi = 200_000, 0.4
    eps = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = eps[0]
    for i in range(1, n):
        x[i] = phi * x[i - 1] + eps[i]
    est = stats.estimate(x)
    assert est.stderr == pytest.approx(math.sqrt(1 / (1 - phi) ** 2 / n), rel=0.35)
    # integrated autocorrelation time (1 + phi) / (1 - phi)
    assert stats.effective_sample_size(x) == pytest.approx(n * (1 - phi) / (1 + phi), rel=0.35)


def test_batch_means_iid_and_errors():
    x = np.random.default_rng(1).standard_normal(64_000)
    est = stats.estimate(x)
    assert est.stderr == pytest.approx(1 / math.sqrt(64_000), rel=0.35)
    assert est.contains(0.0)
    with pytest.raises(InsufficientSamples):
        stats.estimate(np.ones(10))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=32, max_size=400))
def test_batch_means_average_matches_truncated_mean(xs):
    x = np.asarray(xs)
    bm = stats.batch_means(x, 16)
    size = len(x) // 16
    assert bm.shape == (16,)
    assert bm.mean() == pytest.approx(x[: 16 * size].mean(), abs=1e-12)


# -- sampling ------------------------------------------------------------------------


@pytest.mark.parametrize("N", [1, 2, 3, 5])
def test_uniform_sphere_points(N):
    pts = mc.uniform_sphere_point(N, make_rng(0), size=20_000)
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0)
    assert np.all(np.abs(pts.mean(axis=0)) < 0.05)


def test_chain_reproducible():
    g = graphs.cycle(5)
    cfg = mc.ChainConfig(sweeps=600, burn_in=100, seed=42)
    a = mc.run_chain(g, 3, 2.0, cfg)
    b = mc.run_chain(g, 3, 2.0, cfg)
    assert np.array_equal(a.samples, b.samples)
    c = mc.run_chain(g, 3, 2.0, cfg, replica=1)
    assert not np.array_equal(a.samples, c.samples)
    assert a.samples.shape == (500, 5, 3)
    assert np.allclose(np.linalg.norm(a.samples, axis=2), 1.0)


def test_threads_do_not_change_results():
    g = graphs.path(4)
    cfg = mc.ChainConfig(sweeps=400, burn_in=50, seed=9)
    one = mc.run_replicas(g, 2, 1.0, cfg, replicas=3, threads=1)
    many = mc.run_replicas(g, 2, 1.0, cfg, replicas=3, threads=3)
    for a, b in zip(one, many):
        assert np.array_equal(a.samples, b.samples)


def test_pinned_root_fixed():
    cfg = mc.ChainConfig(sweeps=300, burn_in=50, seed=1, root_pinned=True, root=2)
    chain = mc.run_chain(graphs.path(3), 3, 1.0, cfg)
    assert np.all(chain.samples[:, 1] == np.array([0.0, 0.0, 1.0]))


def test_config_validation():
    with pytest.raises(InvalidParameter):
        mc.ChainConfig(sweeps=10, burn_in=10)
    with pytest.raises(InvalidParameter):
        mc.ChainConfig(thin=0)
    with pytest.raises(InvalidParameter):
        mc.ChainConfig(proposal_width=-1.0)
    assert mc.ChainConfig().width(3.0) == pytest.approx(0.5)


@pytest.mark.parametrize("N, beta", [(1, 1.0), (2, 1.5), (3, 2.0), (3, 0.3)])
def test_edge_correlation(N, beta):
    cfg = mc.ChainConfig(sweeps=60_000, burn_in=2_000, seed=3)
    chain = mc.run_chain(graphs.generate("k2"), N, beta, cfg)
    est = mc.estimate_correlation(chain, 1, 2)
    assert est.contains(edge_correlation(beta, N), k=4.5)


@pytest.mark.parametrize("N", [2, 3])
def test_tree_correlation_multiplies(N):
    beta = 1.2
    cfg = mc.ChainConfig(sweeps=80_000, burn_in=2_000, seed=8)
    chain = mc.run_chain(graphs.path(3), N, beta, cfg)
    est = mc.estimate_correlation(chain, 1, 3)
    assert est.contains(edge_correlation(beta, N) ** 2, k=4.5)


def test_ising_cycle_against_enumeration():
    g = graphs.cycle(6)
    cfg = mc.ChainConfig(sweeps=80_000, burn_in=2_000, seed=4)
    chains = mc.run_replicas(g, 1, 0.7, cfg, replicas=2)
    est = mc.estimate_correlation(chains, 1, 4)
    assert est.contains(exact.exact_correlation(g, 0.7, 1, 4), k=4.5)
    assert mc.estimate_correlation(chains, 2, 2).mean == 1.0


def test_rescaled_distance_identity():
    cfg = mc.ChainConfig(sweeps=2_000, burn_in=100, seed=2)
    chain = mc.run_chain(graphs.path(3), 2, 5.0, cfg)
    c = mc.estimate_correlation(chain, 1, 3)
    d = mc.estimate_rescaled_distance(chain, 5.0, 1, 3)
    assert d.mean == pytest.approx(2 * 5.0 * (1 - c.mean))


def test_k_matrix_against_enumeration():
    g = graphs.cycle(4)
    beta = 0.6
    cfg = mc.ChainConfig(sweeps=100_000, burn_in=2_000, seed=12)
    est = mc.estimate_k_matrix(mc.run_chain(g, 1, beta, cfg), beta)
    K = exact.exact_k_matrix(g, beta)
    assert np.all(np.abs(est.mean - K) <= 4.5 * est.stderr + 1e-12)
    assert est.batch_means.shape == (32, 4, 4)


def test_acceptance_tuned_toward_half():
    cfg = mc.ChainConfig(sweeps=6_000, burn_in=4_000, seed=0)
    chain = mc.run_chain(graphs.cycle(6), 3, 20.0, cfg)
    assert 0.35 < chain.acceptance < 0.65


def test_insufficient_samples():
    cfg = mc.ChainConfig(sweeps=20, burn_in=10, seed=0)
    chain = mc.run_chain(graphs.path(3), 1, 1.0, cfg)
    with pytest.raises(InsufficientSamples):
        mc.estimate_correlation(chain, 1, 2)
    with pytest.raises(InsufficientSamples):
        mc.estimate_k_matrix(chain, 1.0)


def test_sample_file_round_trip(tmp_path):
    cfg = mc.ChainConfig(sweeps=200, burn_in=20, thin=3, seed=6)
    chain = mc.run_chain(graphs.cycle(4), 3, 1.0, cfg)
    path = tmp_path / "s.bin"
    mc.save_samples(chain, path)
    assert path.stat().st_size == 32 + chain.samples.size * 8
    assert np.array_equal(mc.load_samples(path), chain.samples)
    path.write_bytes(b"garbage" * 10)
    with pytest.raises(InvalidParameter):
        mc.load_samples(path)
