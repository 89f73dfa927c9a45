"""Pure numpy kernels for the two-layer ReLU Q-network.

Parameter layout, shared with the compiled kernels:

    W1 : (H, d)   b1 : (H,)
    W2 : (A, H)   b2 : (A,)

Loss over a batch is ``mean_j (Q(x_j)[a_j] - y_j)**2``; only the taken
action's output receives gradient.
"""

import math

import numpy as np

BACKEND = "python"


def q_forward(W1, b1, W2, b2, x):
    h = W1 @ x + b1
    np.maximum(h, 0.0, out=h)
    return W2 @ h + b2


def q_forward_batch(W1, b1, W2, b2, X):
    H = X @ W1.T + b1
    np.maximum(H, 0.0, out=H)
    return H @ W2.T + b2


def greedy(W1, b1, W2, b2, x):
    q = q_forward(W1, b1, W2, b2, x)
    a = int(q.argmax())
    return a, float(q[a])


def loss_and_grad(W1, b1, W2, b2, X, actions, targets):
    n = X.shape[0]
    Z = X @ W1.T + b1
    Hh = np.maximum(Z, 0.0)
    Q = Hh @ W2.T + b2
    rows = np.arange(n)
    err = Q[rows, actions] - targets
    loss = float(np.mean(err * err))

    g = (2.0 / n) * err
    dQ = np.zeros_like(Q)
    dQ[rows, actions] = g
    gW2 = dQ.T @ Hh
    gb2 = dQ.sum(axis=0)
    dZ = (dQ @ W2) * (Z > 0.0)
    gW1 = dZ.T @ X
    gb1 = dZ.sum(axis=0)
    return loss, gW1, gb1, gW2, gb2


def sgd_step(W1, b1, W2, b2, X, actions, targets, lr):
    loss, gW1, gb1, gW2, gb2 = loss_and_grad(W1, b1, W2, b2, X, actions, targets)
    if not math.isfinite(loss):
        return loss
    gsum = float(gW1.sum() + gb1.sum() + gW2.sum() + gb2.sum())
    if not math.isfinite(gsum):
        return math.nan
    W1 -= lr * gW1
    b1 -= lr * gb1
    W2 -= lr * gW2
    b2 -= lr * gb2
    return loss


def bellman_targets(tW1, tb1, tW2, tb2, R, S2, D, discount):
    nxt = q_forward_batch(tW1, tb1, tW2, tb2, S2).max(axis=1)
    return np.where(D, R, R + discount * nxt)


def dqn_update(W1, b1, W2, b2, tW1, tb1, tW2, tb2, S, A, R, S2, D, idx, discount, lr):
    y = bellman_targets(tW1, tb1, tW2, tb2, R[idx], S2[idx], D[idx], discount)
    return sgd_step(W1, b1, W2, b2, S[idx], A[idx], y, lr)
