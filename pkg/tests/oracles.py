"""Slow, loop-based reference implementations used as independent test oracles.

Nothing here touches basisformer.diffcore; everything is plain Python floats
over numpy arrays indexed element by element.
"""

import math

import numpy as np


def matmul_loop(A, B):
    m, k = A.shape
    k2, n = B.shape
    assert k == k2
    C = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            s = 0.0
            for p in range(k):
                s += A[i, p] * B[p, j]
            C[i, j] = s
    return C


def linear_loop(x, W, b):
    """x: (R, n_in) rows; W: (n_in, n_out)."""
    R, n_in = x.shape
    n_out = W.shape[1]
    out = np.zeros((R, n_out))
    for r in range(R):
        for o in range(n_out):
            s = b[o]
            for i in range(n_in):
                s += x[r, i] * W[i, o]
            out[r, o] = s
    return out


def relu_loop(x):
    return np.vectorize(lambda v: v if v > 0 else 0.0)(x)


def layernorm_loop(x, gamma, beta, eps):
    out = np.zeros_like(x)
    for r in range(x.shape[0]):
        row = x[r]
        n = len(row)
        mu = sum(row) / n
        var = sum((v - mu) ** 2 for v in row) / n
        for d in range(n):
            out[r, d] = (row[d] - mu) / math.sqrt(var + eps) * gamma[d] + beta[d]
    return out


def softmax_loop(row):
    m = max(row)
    e = [math.exp(v - m) for v in row]
    s = sum(e)
    return [v / s for v in e]


def cab_loop(a, b, p, H, D, eps=1e-5):
    """Cross-attention block reference.

    p holds numpy arrays: wq_W, wq_b, wk_W, wk_b, wv_W, wv_b, r_W, r_b,
    f1_W, f1_b, f2_W, f2_b, ln1_g, ln1_b, ln2_g, ln2_b.
    """
    A, B = a.shape[0], b.shape[0]
    q = linear_loop(a, p["wq_W"], p["wq_b"])
    k = linear_loop(b, p["wk_W"], p["wk_b"])
    v = linear_loop(b, p["wv_W"], p["wv_b"])
    concat = np.zeros((A, H * D))
    for h in range(H):
        for i in range(A):
            scores = []
            for j in range(B):
                s = 0.0
                for d in range(D):
                    s += q[i, h * D + d] * k[j, h * D + d]
                scores.append(s / math.sqrt(D))
            w = softmax_loop(scores)
            for d in range(D):
                concat[i, h * D + d] = sum(w[j] * v[j, h * D + d] for j in range(B))
    attn = linear_loop(concat, p["r_W"], p["r_b"])
    a_hat = layernorm_loop(attn + a, p["ln1_g"], p["ln1_b"], eps)
    hidden = relu_loop(linear_loop(a_hat, p["f1_W"], p["f1_b"]))
    ffn = linear_loop(hidden, p["f2_W"], p["f2_b"])
    return layernorm_loop(ffn + a_hat, p["ln2_g"], p["ln2_b"], eps)


def cab_params(cab):
    """Pull plain arrays out of a basisformer CAB module."""
    return {
        "wq_W": cab.wq.weight.data, "wq_b": cab.wq.bias.data,
        "wk_W": cab.wk.weight.data, "wk_b": cab.wk.bias.data,
        "wv_W": cab.wv.weight.data, "wv_b": cab.wv.bias.data,
        "r_W": cab.restore.weight.data, "r_b": cab.restore.bias.data,
        "f1_W": cab.ffn.layers[0].weight.data, "f1_b": cab.ffn.layers[0].bias.data,
        "f2_W": cab.ffn.layers[1].weight.data, "f2_b": cab.ffn.layers[1].bias.data,
        "ln1_g": cab.ln1.gamma.data, "ln1_b": cab.ln1.beta.data,
        "ln2_g": cab.ln2.gamma.data, "ln2_b": cab.ln2.beta.data,
    }


def aggregate_loop(c, zt):
    """c: (C, N, H), zt: (N, H, P) -> (C, H, P)."""
    C, N, H = c.shape
    P = zt.shape[2]
    out = np.zeros((C, H, P))
    for i in range(C):
        for h in range(H):
            for t in range(P):
                s = 0.0
                for j in range(N):
                    s += c[i, j, h] * zt[j, h, t]
                out[i, h, t] = s
    return out


def coef_dot_loop(rx, rz):
    """rx: (C, H, D), rz: (N, H, D) -> (C, N, H) plain inner products."""
    C, H, D = rx.shape
    N = rz.shape[0]
    out = np.zeros((C, N, H))
    for i in range(C):
        for j in range(N):
            for h in range(H):
                out[i, j, h] = sum(rx[i, h, d] * rz[j, h, d] for d in range(D))
    return out


def mlp_loop(x, layers, act=relu_loop):
    for n, (W, b) in enumerate(layers):
        x = linear_loop(x, W, b)
        if n < len(layers) - 1:
            x = act(x)
    return x


def second_diff_sq_loop(z):
    total = 0.0
    for row in z:
        for t in range(len(row) - 2):
            d = row[t] - 2 * row[t + 1] + row[t + 2]
            total += d * d
    return total


def infonce_loop(cx, cy, eps):
    C, N, H = cx.shape
    total = 0.0
    for i in range(C):
        for j in range(N):
            logits = [sum(cx[i, j, h] * cy[i, k, h] for h in range(H)) / eps for k in range(N)]
            m = max(logits)
            lse = m + math.log(sum(math.exp(v - m) for v in logits))
            total += -(logits[j] - lse)
    return total / (C * N)


def finite_diff(f, theta, h):
    """Central differences of scalar f over every entry of array theta (modified in place, restored)."""
    g = np.zeros_like(theta)
    flat = theta.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gf[i] = (fp - fm) / (2 * h)
    return g
