#!/usr/bin/env python3
"""Independent reference values for the numeric contracts.

Uses only the Python standard library: exact rationals where the value is
rational, `math` otherwise. Writes derived_values.json next to this file;
tests/oracles.rs compares the Rust implementation against it.

    python3 crates/core/tests/oracles/derived_values.py
"""

import json
import math
from fractions import Fraction
from pathlib import Path


def sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


def peephole_step(w, b, x, h, c):
    """Scalar peephole cell with every weight `w` and every bias `b`."""
    i = sigmoid(w * x + w * h + w * c + b)
    f = sigmoid(w * x + w * h + w * c + b)
    z = math.tanh(w * x + w * h + b)
    c_new = f * c + i * z
    o = sigmoid(w * x + w * h + w * c_new + b)
    return o * math.tanh(c_new), c_new


def mmse(y, y_hat, alpha):
    return sum(math.exp(-alpha * (1 - a)) * (a - b) ** 2 for a, b in zip(y, y_hat)) / len(y)


def kl(p, q):
    return sum(a * math.log(a / b) for a, b in zip(p, q) if a > 0)


def solve(a, b):
    """Gauss-Jordan elimination over rationals."""
    n = len(a)
    m = [row[:] + [rhs] for row, rhs in zip(a, b)]
    for col in range(n):
        piv = next(r for r in range(col, n) if m[r][col] != 0)
        m[col], m[piv] = m[piv], m[col]
        inv = 1 / m[col][col]
        m[col] = [v * inv for v in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                k = m[r][col]
                m[r] = [u - k * v for u, v in zip(m[r], m[col])]
    return [row[-1] for row in m]


def ridge_normal_equations(x, y, lam):
    p = len(x[0])
    gram = [[sum(row[i] * row[j] for row in x) + (lam if i == j else 0) for j in range(p)] for i in range(p)]
    rhs = [sum(row[i] * t for row, t in zip(x, y)) for i in range(p)]
    return solve(gram, rhs)


def main():
    h1, c1 = peephole_step(0.1, 0.0, 1.0, 0.0, 0.0)
    h, c = 0.0, 0.0
    for x in [1.0, -0.5, 0.25]:
        h, c = peephole_step(0.1, 0.0, x, h, c)

    ridge_x = [[Fraction(v) for v in row] for row in
               [[1, 0, 2], [0, 1, 1], [1, 1, 0], [2, 0, 1], [1, 2, 1]]]
    ridge_y = [Fraction(v) for v in [3, 2, 2, 4, 5]]
    ridge_w = ridge_normal_equations(ridge_x, ridge_y, Fraction(1, 2))

    y, y_hat = [0.8, 0.5], [0.7, 0.9]
    beta1, beta2, eps, lr = 0.9, 0.999, 1e-8, 0.005
    m_hat = (1 - beta1) * 1.0 / (1 - beta1)
    v_hat = (1 - beta2) * 1.0 / (1 - beta2)

    ramp = list(range(100))
    values = {
        "sigmoid_1": sigmoid(1.0),
        "sigmoid_3": sigmoid(3.0),
        "lstm_zero_params_c": 0.5,
        "lstm_zero_params_h": 0.5 * math.tanh(0.5),
        "lstm_scalar_h": h1,
        "lstm_scalar_c": c1,
        "lstm_chain3_h": h,
        "mmse_example": mmse([0.5], [0.7], 4.0),
        "kl_onehot_vs_half": kl([1.0, 0.0], [0.5, 0.5]),
        "kl_half_vs_skewed": kl([0.5, 0.5], [0.9, 0.1]),
        "kl_onehot_vs_uniform35": kl([1.0] + [0.0] * 34, [1 / 35] * 35),
        "adam_first_step": -lr * m_hat / (math.sqrt(v_hat) + eps),
        "metrics_rmse": math.sqrt(sum((a - b) ** 2 for a, b in zip(y, y_hat)) / 2),
        "metrics_mae": sum(abs(a - b) for a, b in zip(y, y_hat)) / 2,
        "metrics_mape": 100 * abs(0.8 - 0.7) / 0.8,
        "ramp_horizon_means": [sum(ramp[:k]) / k for k in (1, 15, 60)],
        "interp_gap": [float(Fraction(9, 10) * k / 3) for k in range(4)],
        "split_601": [601 * 4 // 6, 601 // 6, 601 - 601 * 4 // 6 - 601 // 6],
        "ridge_x": [[float(v) for v in row] for row in ridge_x],
        "ridge_y": [float(v) for v in ridge_y],
        "ridge_lambda": 0.5,
        "ridge_coef": [float(v) for v in ridge_w],
    }
    out = Path(__file__).with_name("derived_values.json")
    out.write_text(json.dumps(values, indent=2) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
