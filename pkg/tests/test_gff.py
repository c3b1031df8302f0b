"""Rooted free field and the low-temperature comparison."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinlab import gff, graphs, mc
from spinlab.errors import InvalidParameter, WrongN
from spinlab.graphs import greens_function
from spinlab.rng import make_rng


@st.composite
def rooted_graphs(draw, max_n=15):
    n = draw(st.integers(2, max_n))
    g = graphs.random_connected(n, draw(st.floats(0.1, 0.8)), make_rng(draw(st.integers(0, 2**32 - 1)), 7))
    return g, draw(st.integers(1, n))


@settings(max_examples=40, deadline=None)
@given(rooted_graphs())
def test_covariance_inverts_pinned_laplacian(gr):
    g, root = gr
    cov = gff.gff_covariance(g, root)
    keep = [i for i in range(g.n) if i != root - 1]
    assert np.allclose(cov[root - 1], 0.0) and np.allclose(cov[:, root - 1], 0.0)
    Lr = g.laplacian[np.ix_(keep, keep)]
    assert np.allclose(Lr @ cov[np.ix_(keep, keep)], np.eye(len(keep)), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(rooted_graphs())
def test_covariance_is_renormalized_green(gr):
    # E gamma_x gamma_y = u_{x root}(y) / d(x)
    g, root = gr
    cov = gff.gff_covariance(g, root)
    for x in range(1, g.n + 1):
        if x == root:
            continue
        u = greens_function(g, x, root)
        assert np.allclose(cov[x - 1], u.values / g.degree(x), atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(rooted_graphs(max_n=10))
def test_three_point_identity(gr):
    g, root = gr
    cov = gff.gff_covariance(g, root)
    for x, y in itertools.permutations(range(1, g.n + 1), 2):
        direct = cov[x - 1, x - 1] + cov[y - 1, y - 1] - 2 * cov[x - 1, y - 1]
        assert gff.moment_target(g, 2, x, y, root) == pytest.approx(direct, abs=1e-10)
        # independent of the root: it is the effective resistance between x and y
        assert direct == pytest.approx(graphs.renormalized_green(g, x, y), abs=1e-10)


def test_sample_covariance():
    g = graphs.cycle(5)
    field = gff.gff_sample(g, components=2, root=1, count=80_000, seed=3)
    assert field.samples.shape == (80_000, 5, 2)
    assert np.all(field.samples[:, 0] == 0.0)
    emp = np.einsum("tic,tjc->ij", field.samples, field.samples) / (2 * 80_000)
    assert np.allclose(emp, field.covariance, atol=0.03)
    again = gff.gff_sample(g, components=2, root=1, count=10, seed=3)
    assert np.array_equal(again.samples, gff.gff_sample(g, 2, 1, 10, 3).samples)


def test_path_targets():
    # path(3) rooted at 1: distances are resistances, times N - 1
    g = graphs.path(3)
    assert gff.moment_target(g, 3, 1, 3) == pytest.approx(4.0)
    assert gff.moment_target(g, 2, 2, 3) == pytest.approx(1.0)
    assert gff.moment_target(graphs.generate("k2"), 3, 1, 2) == pytest.approx(2.0)


def test_report_errors():
    with pytest.raises(WrongN):
        gff.wcon_report(graphs.generate("k2"), 1, [10, 50], 1, 2)
    with pytest.raises(InvalidParameter):
        gff.wcon_report(graphs.generate("k2"), 2, [50, 10], 1, 2)
    with pytest.raises(InvalidParameter):
        gff.gff_sample(graphs.path(3), 0)


def test_report_small_run_and_csv():
    cfg = mc.ChainConfig(sweeps=22_000, burn_in=2_000, thin=10, seed=4)
    rows = gff.wcon_report(graphs.generate("k2"), 3, [20.0, 80.0], 1, 2, cfg=cfg, fourth_moment=True)
    assert [r.beta for r in rows] == [20.0, 80.0]
    for r in rows:
        assert abs(r.moment_estimate - r.moment_target) < 5 * r.moment_stderr + 0.1
        assert 0 <= r.ks_stat < 0.1
        # Gaussian fourth moment is 3 sigma^4 with sigma^2 = 1 here
        assert r.fourth_spin == pytest.approx(3.0, rel=0.25)
    text = gff.rows_to_csv(rows)
    assert text.splitlines()[0] == ",".join(gff.CSV_FIELDS)
    assert len(text.splitlines()) == 3


def test_gaps_shrink_logic():
    def row(gap, se):
        return gff.ConvergenceRow(1.0, 1.0 + gap, se, 1.0, 0.0)

    assert gff.gaps_shrink([row(0.3, 0.01), row(0.1, 0.01), row(0.02, 0.01)])
    assert gff.gaps_shrink([row(0.05, 0.02), row(0.08, 0.02)])  # within noise
    assert not gff.gaps_shrink([row(0.01, 0.001), row(0.2, 0.001)])
