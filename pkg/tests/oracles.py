"""Independent scalar re-derivations used as test oracles.

Plain Python loops, no shared code with the package under test.
"""

import math


def oracle_step(h, b, p, p_next, w, c):
    """Scalar re-trace of one account's trade: integer targets, cost, pro-rata buy cutback."""
    A = b + sum(hi * pi for hi, pi in zip(h, p))
    target = [math.floor(wi * A / pi) for wi, pi in zip(w[:-1], p)]
    sells = [max(hi - ti, 0) for hi, ti in zip(h, target)]
    buys = [max(ti - hi, 0) for hi, ti in zip(h, target)]
    cash_in = sum(q * pi for q, pi in zip(sells, p)) * (1 - c)
    cash_out = sum(q * pi for q, pi in zip(buys, p)) * (1 + c)
    if cash_out > b + cash_in:
        f = (b + cash_in) / cash_out
        buys = [math.floor(q * f) for q in buys]
    new_h = [hi - s + q for hi, s, q in zip(h, sells, buys)]
    traded = sum((s + q) * pi for s, q, pi in zip(sells, buys, p))
    new_b = b + sum(s * pi for s, pi in zip(sells, p)) - sum(q * pi for q, pi in zip(buys, p)) - c * traded
    A_next = new_b + sum(hi * pi for hi, pi in zip(new_h, p_next))
    return new_h, new_b, A_next - A


def py_mlp(params, x):
    """Pure-python forward pass, row vector in, list out."""
    h = list(x)
    for W, b, act in zip(params.weights, params.biases, params.activations):
        z = [sum(h[r] * W[r][c] for r in range(len(h))) + b[c] for c in range(len(b))]
        if act == "relu":
            h = [max(v, 0.0) for v in z]
        elif act == "tanh":
            h = [math.tanh(v) for v in z]
        elif act == "softmax":
            m = max(z)
            e = [math.exp(v - m) for v in z]
            h = [v / sum(e) for v in e]
        else:
            h = z
    return h


def py_project(a, cap):
    risky = sum(a[:-1])
    if risky <= cap:
        return list(a)
    f = cap / risky
    out = [v * f for v in a[:-1]]
    return out + [1.0 - sum(out)]


def py_corr(x, y):
    mx, my = sum(x) / len(x), sum(y) / len(y)
    sxy = sum((u - mx) * (v - my) for u, v in zip(x, y))
    sxx = sum((u - mx) ** 2 for u in x)
    syy = sum((v - my) ** 2 for v in y)
    if sxx * syy == 0:
        return 0.0
    return sxy / math.sqrt(sxx * syy)


def oracle_critic_loss(agents, batch, i, gamma, lam):
    K, N = batch.actions.shape[:2]
    td = 0.0
    for k in range(K):
        nxt = []
        for j in range(N):
            nxt += py_project(py_mlp(agents[j].target_actor, batch.next_state[k, j]), batch.next_caps[k, j])
        x_next = list(batch.next_state[k].ravel()) + nxt
        y = batch.rewards[k, i] + gamma * (1 - batch.done[k]) * py_mlp(agents[i].target_critic, x_next)[0]
        x = list(batch.state[k].ravel()) + list(batch.actions[k].ravel())
        td += (py_mlp(agents[i].critic, x)[0] - y) ** 2
    pen = 0.0
    for j in range(N):
        if j != i:
            pen += sum(py_corr(batch.actions[k, i], batch.actions[k, j]) ** 2 for k in range(K)) / K
    return lam * td / K + (1 - lam) * pen


def brute_maxd(v):
    worst = 0.0
    for i in range(len(v)):
        for j in range(i, len(v)):
            worst = max(worst, (v[i] - v[j]) / v[i])
    return worst


def brute_sharpe(v):
    r = [v[t] / v[t - 1] - 1 for t in range(1, len(v))]
    m = math.fsum(r) / len(r)
    var = math.fsum((x - m) ** 2 for x in r) / (len(r) - 1)
    return m / math.sqrt(var) * math.sqrt(252)


def brute_force_up(prices, res):
    """Nested-loop sum over the 3-component grid with plain products of wealth."""
    n = res - 1
    num = [0.0, 0.0, 0.0]
    den = 0.0
    for i in range(n + 1):
        for j in range(n + 1 - i):
            b = (i / n, j / n, (n - i - j) / n)
            wealth = 1.0
            for t in range(1, len(prices)):
                x = (prices[t][0] / prices[t - 1][0], prices[t][1] / prices[t - 1][1], 1.0)
                wealth *= sum(bk * xk for bk, xk in zip(b, x))
            den += wealth
            for k in range(3):
                num[k] += b[k] * wealth
    return [v / den for v in num]
