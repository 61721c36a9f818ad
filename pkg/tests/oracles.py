"""Independent reference computations used by the tests.

Nothing here calls the code path it is used to check: gradients come from
finite differences of the loss, least squares from the normal equations,
Black-Litterman from iterative minimization, and so on.
"""

import numpy as np

from deepport.nn import Layer, Network


def random_network(rng, activation, max_layers=3, max_width=8, n_in=None):
    n_layers = int(rng.integers(1, max_layers + 1))
    sizes = [n_in or int(rng.integers(1, max_width + 1))]
    sizes += [int(rng.integers(1, max_width + 1)) for _ in range(n_layers)]
    layers = []
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        act = activation if i < n_layers - 1 else rng.choice([activation, "linear"])
        layers.append(Layer(rng.normal(0, 0.8, (b, a)), rng.normal(0, 0.3, b), str(act)))
    return Network(tuple(layers))


def preactivations(net, X):
    out, a = [], X
    for layer in net.layers:
        z = a @ layer.weight.T + layer.bias
        out.append(z)
        a = np.maximum(z, 0) if layer.activation == "relu" else (np.tanh(z) if layer.activation == "tanh" else z)
    return out


def _loss_extended(weights, biases, activations, X, Y, lam, penalty):
    """Penalized loss evaluated in extended precision, independently of the library."""
    a = np.asarray(X, dtype=np.longdouble)
    for W, b, act in zip(weights, biases, activations):
        z = a @ W.T + b
        a = np.maximum(z, 0) if act == "relu" else (np.tanh(z) if act == "tanh" else z)
    r = a - np.asarray(Y, dtype=np.longdouble)
    fit = np.sum(r * r) / r.shape[0]
    pen = sum(np.sum(np.abs(W)) if penalty == "l1" else np.sum(W * W) for W in weights)
    return fit + lam * pen


def fd_gradient(net, X, Y, cfg, h=1e-6):
    """Central finite differences of the penalized loss w.r.t. every parameter.

    Runs in extended precision so that roundoff stays well below the
    gradient entries even when the loss itself is large.
    """
    weights = [np.array(l.weight, dtype=np.longdouble) for l in net.layers]
    biases = [np.array(l.bias, dtype=np.longdouble) for l in net.layers]
    acts = [l.activation for l in net.layers]

    def f():
        return _loss_extended(weights, biases, acts, X, Y, cfg.lam, cfg.penalty)

    grads = []
    for li in range(len(net.layers)):
        pair = []
        for params in (weights[li], biases[li]):
            g = np.zeros(params.shape)
            for idx in np.ndindex(params.shape):
                base = params[idx]
                params[idx] = base + h
                up = f()
                params[idx] = base - h
                down = f()
                params[idx] = base
                g[idx] = float((up - down) / (2 * h))
            pair.append(g)
        grads.append(tuple(pair))
    return grads


def max_relative_error(analytic, numeric, floor=1e-6):
    """Largest elementwise ``|a - n| / max(|a|, |n|, floor)``."""
    worst = 0.0
    for (aw, ab), (nw, nb) in zip(analytic, numeric):
        for a, n in ((aw, nw), (ab, nb)):
            denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
            worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def max_prefix_sum(xs):
    """``max(0, x1, x1+x2, ..., x1+...+xn)`` by direct enumeration."""
    best, run = 0.0, 0.0
    for v in xs:
        run += v
        best = max(best, run)
    return best


def ols_mse_normal_equations(X, y):
    """In-sample MSE of the affine least-squares fit via ``A'A b = A'y``."""
    A = np.column_stack([X, np.ones(X.shape[0])])
    b = np.linalg.solve(A.T @ A, A.T @ y)
    r = y - A @ b
    return float(np.mean(r * r)), b


def bl_gradient_descent(mean, cov, P, q, Omega, lam, tol=1e-10, max_iter=200_000):
    """Minimize the Black-Litterman penalty by fixed-step gradient descent.

    Iterates until the gradient norm drops below ``tol``.
    """
    S_inv = np.linalg.inv(cov)
    O_inv = np.linalg.inv(Omega)
    H = 2 * (S_inv + lam * P.T @ O_inv @ P)
    step = 1.0 / np.linalg.eigvalsh(H)[-1]
    mu = mean.copy()
    for _ in range(max_iter):
        g = 2 * S_inv @ (mu - mean) + 2 * lam * P.T @ O_inv @ (P @ mu - q)
        if np.linalg.norm(g) < tol:
            break
        mu = mu - step * g
    return mu


def lasso_kkt_violation(D, r, w, lam):
    """Largest violation of the lasso optimality conditions at ``w``."""
    g = 2 * D.T @ (r - D @ w)
    nz = w != 0
    v_nz = np.abs(g[nz] - lam * np.sign(w[nz]))
    v_z = np.maximum(np.abs(g[~nz]) - lam, 0.0)
    return float(max(v_nz.max(initial=0.0), v_z.max(initial=0.0)))


def truncated_svd_error(X, k):
    """Squared Frobenius error of the best rank-k approximation."""
    s = np.linalg.svd(X, compute_uv=False)
    return float(np.sum(s[k:] ** 2))
