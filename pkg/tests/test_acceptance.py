"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import contextlib
import os
import shutil
import time

import numpy as np

from deepport.baselines import ViewSpec, black_litterman_mean, factor_model_fit, lasso, markowitz_moments
from deepport.cli import main
from deepport.data import depth_example, split_by_fraction, synth_market
from deepport.frontier import PipelineSettings, build_frontier, frontier_to_csv
from deepport.market_map import rank_communal, select_universe, train_autoencoder
from deepport.nn import TrainConfig, gradient, nested_relu_chain, offset_relu
from deepport.portfolio_map import TargetSeries, amend_target, calibrate, index_target, kfold_split

from conftest import ACCEPTANCE_LINES
from oracles import (
    bl_gradient_descent,
    fd_gradient,
    lasso_kkt_violation,
    max_prefix_sum,
    max_relative_error,
    preactivations,
    random_network,
    truncated_svd_error,
)


@contextlib.contextmanager
def criterion(number, title, max_seconds):
    start = time.perf_counter()
    status, detail = "FAIL", ""
    try:
        yield
        elapsed = time.perf_counter() - start
        if elapsed >= max_seconds:
            detail = f" (runtime {elapsed:.2f}s over {max_seconds}s budget)"
            raise AssertionError(f"criterion {number} took {elapsed:.2f}s, budget {max_seconds}s")
        status = "PASS"
        detail = f" ({elapsed:.2f}s)"
    except AssertionError as exc:
        detail = detail or f" ({exc})".replace("\n", " ")[:200]
        raise
    finally:
        line = f"criterion {number}: {status} {title}{detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)


def test_criterion_01_max_sum_identity():
    with criterion(1, "nested relu chain equals max prefix sum", 5):
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(10_000):
            xs = rng.uniform(-5, 5, int(rng.integers(1, 9)))
            worst = max(worst, abs(nested_relu_chain(xs) - max_prefix_sum(xs)))
        assert worst <= 1e-12, worst


def _clean_relu_inputs(rng, net, rows=6):
    out = []
    while len(out) < rows:
        x = rng.normal(size=(1, net.n_in))
        if all(np.all(np.abs(z) > 1e-3) for z in preactivations(net, x)):
            out.append(x[0])
    return np.array(out)


def test_criterion_02_gradients():
    with criterion(2, "analytic gradients match finite differences", 30):
        rng = np.random.default_rng(7)
        worst = 0.0
        for activation in ("tanh", "relu"):
            for i in range(50):
                net = random_network(rng, activation)
                X = rng.normal(size=(6, net.n_in)) if activation == "tanh" else _clean_relu_inputs(rng, net)
                Y = rng.normal(size=(6, net.n_out))
                cfg = TrainConfig(lam=0.05, penalty="l2" if i % 2 else "l1")
                if activation == "relu":
                    cfg = cfg.with_(penalty="l2")
                worst = max(worst, max_relative_error(gradient(net, X, Y, cfg), fd_gradient(net, X, Y, cfg)))
        assert worst <= 1e-5, worst


def test_criterion_03_depth_example():
    with criterion(3, "rectified asset beats the better raw asset", 1):
        m = depth_example(seed=0, n_periods=30, t_star=15)
        B, X2, X3 = (m.column(t) for t in ("B", "X2", "X3"))
        eps2 = np.linalg.norm(B - X2)
        eps3 = np.linalg.norm(B - X3)
        eps3_star = np.linalg.norm(B - offset_relu(X3))
        print(f"  eps2={eps2:.3f} eps3={eps3:.3f} eps3*={eps3_star:.3f}")
        assert eps3_star < eps2 < eps3
        assert (-X3 + 2 * offset_relu(X3))[15] >= B[15]


def test_criterion_04_black_litterman():
    with criterion(4, "Black-Litterman closed form", 10):
        rng = np.random.default_rng(11)
        for _ in range(20):
            n = int(rng.integers(1, 6))
            v = int(rng.integers(1, 4))
            mo = markowitz_moments(rng.normal(size=(30, n)))
            A = rng.normal(size=(v, v))
            views = ViewSpec(rng.normal(size=(v, n)), rng.normal(size=v), A @ A.T + 0.5 * np.eye(v),
                             float(rng.uniform(0.1, 5)))
            mu = black_litterman_mean(mo, views)
            ref = bl_gradient_descent(mo.mean, mo.covariance, views.P, views.q, views.Omega, views.lam)
            assert np.max(np.abs(mu - ref)) <= 1e-8
            zero = ViewSpec(views.P, views.q, views.Omega, 0.0)
            assert np.array_equal(black_litterman_mean(mo, zero), mo.mean)
            P = rng.normal(size=(n, n)) + 2 * np.eye(n)
            hard = ViewSpec(P, rng.normal(size=n), np.eye(n), 1e10)
            assert np.linalg.norm(P @ black_litterman_mean(mo, hard) - hard.q) <= 1e-4


def test_criterion_05_lasso():
    with criterion(5, "lasso optimality, sparsity path, unpenalized solve", 30):
        rng = np.random.default_rng(5)
        for i in range(100):
            T, K = int(rng.integers(15, 40)), int(rng.integers(2, 8))
            D = rng.normal(size=(T, K))
            w_true = rng.normal(size=K) * (rng.random(K) < 0.6)
            r = D @ w_true + 0.3 * rng.normal(size=T)
            lam_max = 2 * np.max(np.abs(D.T @ r))
            lam = float(rng.uniform(0, lam_max))
            assert lasso_kkt_violation(D, r, lasso(D, r, lam), lam) <= 1e-6
            if i < 20:
                zeros = [np.sum(lasso(D, r, g) == 0) for g in np.linspace(0, 1.1 * lam_max, 10)]
                assert all(a <= b for a, b in zip(zeros, zeros[1:])), zeros
                ref = np.linalg.solve(D.T @ D, D.T @ r)
                assert np.max(np.abs(lasso(D, r, 0.0) - ref)) <= 1e-8


def test_criterion_06_factor_model():
    with criterion(6, "factor model descent and rank-K recovery", 60):
        rng = np.random.default_rng(6)
        for _ in range(20):
            T, N = int(rng.integers(15, 40)), int(rng.integers(3, 10))
            K = int(rng.integers(1, min(N, 4) + 1))
            R = rng.normal(size=(T, N)) * 0.1
            fm = factor_model_fit(R, K, lam=float(rng.uniform(0, 0.5)), max_iters=40,
                                  seed=int(rng.integers(1000)))
            assert np.all(np.diff(fm.objective_trace) <= 1e-10), np.diff(fm.objective_trace).max()
        R = rng.normal(size=(40, 2)) @ rng.normal(size=(2, 10))
        assert truncated_svd_error(R, 2) <= 1e-20
        fm = factor_model_fit(R, 2, lam=0.0, max_iters=2000, rtol=0.0)
        assert fm.objective_trace[-1] <= 1e-6, fm.objective_trace[-1]


def test_criterion_07_end_to_end():
    with criterion(7, "end-to-end frontier on synthetic market", 120):
        m = synth_market(60, 220, 3, seed=7)
        y, spec, grid = index_target(m), split_by_fraction(m, 0.5), [15, 25, 45, 60]
        lin = build_frontier(m, y, spec, grid, PipelineSettings.linear_diagnostic())
        assert len(lin.points) == 4
        ins = np.array([p.in_sample_error for p in lin.points])
        assert np.all(np.diff(ins) <= 1e-10), ins
        deep_a = build_frontier(m, y, spec, grid, PipelineSettings())
        deep_b = build_frontier(m, y, spec, grid, PipelineSettings(jobs=4))
        assert len(deep_a.points) == 4
        assert all(np.isfinite([p.epsilon_m, p.epsilon_p]).all() for p in deep_a.points)
        assert frontier_to_csv(deep_a) == frontier_to_csv(deep_b)
        assert deep_a.points == deep_b.points


def test_criterion_08_amended_target():
    with criterion(8, "amended target semantics", 1):
        rng = np.random.default_rng(8)
        for _ in range(200):
            v = rng.uniform(-0.3, 0.3, int(rng.integers(1, 60)))
            v[rng.random(v.size) < 0.1] = -0.05
            a = amend_target(TargetSeries(v)).values
            kept = v[v >= -0.05]
            assert a.min() >= min(np.append(kept, 0.05))
            assert np.array_equal(amend_target(TargetSeries(a)).values, a)
            assert np.sum(a != v) == np.sum(v < -0.05)


def _tree_bytes(root):
    out = {}
    for base, _, files in os.walk(root):
        for f in files:
            p = os.path.join(base, f)
            with open(p, "rb") as fh:
                out[os.path.relpath(p, root)] = fh.read()
    return out


def test_criterion_09_determinism_and_partitions(tmp_path):
    with criterion(9, "byte-identical CLI runs and disjoint k-fold cover", 10):
        # same paths both times so the echoed config is identical too
        d = tmp_path / "run"
        trees = []
        for _ in range(2):
            if d.exists():
                shutil.rmtree(d)
            d.mkdir()
            assert main(["synth", "--assets", "25", "--periods", "60", "--seed", "3",
                         "-o", str(d / "m.csv")]) == 0
            assert main(["frontier", "-i", str(d / "m.csv"), "-o", str(d / "fr"), "--grid", "12,25",
                         "--seed", "3", "--ae-epochs", "30", "--pm-epochs", "30"]) == 0
            trees.append(_tree_bytes(d))
        assert trees[0] == trees[1] and len(trees[0]) == 8
        rng = np.random.default_rng(9)
        for _ in range(200):
            n = int(rng.integers(2, 500))
            k = int(rng.integers(2, n + 1))
            folds = kfold_split(n, k, seed=int(rng.integers(2**31)))
            allidx = np.concatenate(folds)
            assert allidx.size == n and np.array_equal(np.sort(allidx), np.arange(n))


def test_criterion_10_pipeline_shape():
    with criterion(10, "default widths, 10 + 15 selection, four folds", 30):
        m = synth_market(30, 80, 3, seed=10)
        net = train_autoencoder(m, cfg=TrainConfig(epochs=5, batch_size=16))
        assert len(net.layers) == 2 and net.sizes == (30, 5, 30)
        ranking = rank_communal(np.linspace(0, 1, 30), m.tickers)
        sel = select_universe(ranking, 25)
        assert sel[:10] == list(ranking.order[:10])
        assert set(sel[10:]) == set(ranking.order[15:]) and len(sel) == 25
        rep = calibrate(m.select(sel), index_target(m), cfg=TrainConfig(epochs=5, batch_size=16))
        assert len(rep.fold_errors) == 4
        assert rep.network.sizes == (25, 5, 1)
