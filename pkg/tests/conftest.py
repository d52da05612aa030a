import numpy as np
import pytest

from sofic_pressure import nn


def symmetric_sinkhorn(W, p, tol=1e-14, max_iter=5000):
    """Scale a positive symmetric matrix to a symmetric joint law with marginals p."""
    d = np.sqrt(p / W.sum(axis=1))
    for _ in range(max_iter):
        row = (W * d[None, :]).sum(axis=1) * d
        if np.abs(row - p).max() < tol:
            break
        d = d * np.sqrt(p / row)
    else:
        raise RuntimeError("sinkhorn did not converge")
    return d[:, None] * W * d[None, :]


def random_reversible_chain(q, r, rng):
    """Random chain with one reversible kernel per generator, all sharing p."""
    p = rng.dirichlet(np.full(q, 4.0))
    p = np.maximum(p, 1e-3)
    p = p / p.sum()
    kernels = []
    for _ in range(r):
        W = rng.uniform(0.2, 1.0, size=(q, q))
        pi = symmetric_sinkhorn(W + W.T, p)
        kernels.append(pi / pi.sum(axis=1, keepdims=True))
    return nn.NNChain(p=p, K=tuple(kernels))


def random_interaction(q, r, rng, with_field=True):
    A = rng.normal(size=(q, q))
    B = rng.normal(size=q) if with_field else np.zeros(q)
    return nn.NNInteraction(q=q, B=B, Jmat=0.5 * (A + A.T), r=r)


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
