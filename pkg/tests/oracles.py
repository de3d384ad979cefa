"""Independent reference implementations used as test oracles.

Everything here is written with plain Python loops and the math module
only, deliberately avoiding the package's vectorized code paths so the
two routes cannot share a bug.
"""

import math


def brute_force_cooccurrence(records, k):
    """Pairwise co-presence indicator over the object block, as nested lists."""
    n = k + 2
    a = [[0.0] * n for _ in range(n)]
    for rec in records:
        cats = [c for c, count in rec.objects.items() if count >= 1]
        for i in cats:
            for j in cats:
                if i != j:
                    a[2 + i][2 + j] = 1.0
    return a


def recount_class_freq(records, k):
    """Per-class containment frequencies, counted one record at a time."""
    totals = [0, 0]
    contains = [[0] * k for _ in range(2)]
    for rec in records:
        totals[rec.label] += 1
        for cat in rec.objects:
            contains[rec.label][cat] += 1
    n = k + 2
    a = [[0.0] * n for _ in range(n)]
    for cls in range(2):
        for cat in range(k):
            freq = contains[cls][cat] / totals[cls]
            a[cls][2 + cat] = freq
            a[2 + cat][cls] = freq
    return a


def _sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


def straight_line_forward(c, a, tensors, rounds, attn_dim):
    """Scalar re-implementation of the forward pass.

    c: 2 x n nested lists, a: n x n nested lists, tensors: dict of nested
    lists keyed by the canonical parameter names. Returns (probs, h_last).
    """
    n = len(a)

    def gate(name):
        return tensors[f"gru.w_{name}"], tensors[f"gru.u_{name}"], tensors[f"gru.b_{name}"]

    # H0 = [C A ; C A^T]
    h = []
    for r in range(2):
        h.append([sum(c[r][u] * a[u][v] for u in range(n)) for v in range(n)])
    for r in range(2):
        h.append([sum(c[r][u] * a[v][u] for u in range(n)) for v in range(n)])

    for _ in range(rounds):
        msg = [[sum(h[d][u] * (a[u][v] + a[v][u]) for u in range(n))
                for v in range(n)] for d in range(4)]
        new_h = [[0.0] * n for _ in range(4)]
        wz, uz, bz = gate("update")
        wr, ur, br = gate("reset")
        wc, uc, bc = gate("cand")
        for v in range(n):
            z = [_sigmoid(sum(wz[d][e] * msg[e][v] for e in range(4))
                          + sum(uz[d][e] * h[e][v] for e in range(4)) + bz[d])
                 for d in range(4)]
            r_ = [_sigmoid(sum(wr[d][e] * msg[e][v] for e in range(4))
                           + sum(ur[d][e] * h[e][v] for e in range(4)) + br[d])
                  for d in range(4)]
            cand = [math.tanh(sum(wc[d][e] * msg[e][v] for e in range(4))
                              + sum(uc[d][e] * r_[e] * h[e][v] for e in range(4))
                              + bc[d])
                    for d in range(4)]
            for d in range(4):
                new_h[d][v] = (1.0 - z[d]) * cand[d] + z[d] * h[d][v]
        h = new_h

    proj = tensors["attn.proj"]
    score = tensors["attn.score"]
    p = [[sum(proj[d][e] * h[e][v] for e in range(4)) for v in range(n)]
         for d in range(attn_dim)]
    src = [sum(score[d] * p[d][v] for d in range(attn_dim)) for v in range(n)]
    dst = [sum(score[attn_dim + d] * p[d][v] for d in range(attn_dim))
           for v in range(n)]
    beta = [sum(_sigmoid(src[i] + dst[j]) for i in range(n)) / n
            for j in range(n)]
    w = [beta[v] * h[d][v] for d in range(4) for v in range(n)]

    w1, b1 = tensors["head.w1"], tensors["head.b1"]
    w2, b2 = tensors["head.w2"], tensors["head.b2"]
    hidden = [max(0.0, sum(w1[u][i] * w[i] for i in range(4 * n)) + b1[u])
              for u in range(len(b1))]
    logits = [sum(w2[o][u] * hidden[u] for u in range(len(hidden))) + b2[o]
              for o in range(2)]
    shift = max(logits)
    exps = [math.exp(v - shift) for v in logits]
    total = sum(exps)
    probs = [e / total for e in exps]
    return probs, h


def scalar_adam(grad_fn, x0, lr, steps, beta1=0.9, beta2=0.999, eps=1e-8):
    """Plain-Python Adam on a single scalar; returns the iterate sequence."""
    x, m, v = x0, 0.0, 0.0
    xs = [x]
    for t in range(1, steps + 1):
        g = grad_fn(x)
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        x = x - lr * m_hat / (math.sqrt(v_hat) + eps)
        xs.append(x)
    return xs


def central_differences(loss_fn, array, eps=1e-5):
    """Gradient of loss_fn w.r.t. a numpy array, entry by entry."""
    grad = [0.0] * array.size
    flat = array.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up = loss_fn()
        flat[i] = orig - eps
        down = loss_fn()
        flat[i] = orig
        grad[i] = (up - down) / (2.0 * eps)
    return grad
