"""Independent reference implementations used as test oracles.

These are written directly from the formulas with plain loops and share no
code with the package, so agreement is a genuine cross-check.
"""

from __future__ import annotations

import math

import numpy as np


def naive_forward(weights, biases, x, output_tanh):
    """Dense network with tanh hidden layers, evaluated unit by unit."""
    h = [float(v) for v in x]
    n = len(weights)
    for k in range(n):
        w, b = weights[k], biases[k]
        out = []
        for j in range(w.shape[1]):
            z = float(b[j])
            for i in range(w.shape[0]):
                z += h[i] * float(w[i, j])
            if k < n - 1 or output_tanh:
                z = math.tanh(z)
            out.append(z)
        h = out
    return np.array(h)


def central_difference(f, theta, step=1e-5):
    theta = np.array(theta, dtype=np.float64)
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        up, down = theta.copy(), theta.copy()
        up[i] += step
        down[i] -= step
        grad[i] = (f(up) - f(down)) / (2 * step)
    return grad


def adam_scalar(p, g, lr, b1, b2, eps):
    """First Adam step from zero moments, written out by hand."""
    m = (1 - b1) * g
    v = (1 - b2) * g * g
    m_hat = m / (1 - b1)
    v_hat = v / (1 - b2)
    return p - lr * m_hat / (math.sqrt(v_hat) + eps)


def deficit_reward(metrics, constraints):
    """Relative deficit sum and shaped reward for dicts of floats."""
    r = 0.0
    for name, direction, bound in constraints:
        m = metrics[name]
        d = (m - bound) / (m + bound)
        if direction == "at_most":
            d = -d
        r += min(d, 0.0)
    return r, (0.2 if r >= -0.02 else r)


def brute_force_two_partition(points):
    """Minimal-inertia split of a small point set into two non-empty groups."""
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    best, best_labels = math.inf, None
    for mask in range(1, 2 ** (n - 1)):
        labels = np.array([(mask >> i) & 1 for i in range(n)])
        cost = 0.0
        for c in (0, 1):
            grp = pts[labels == c]
            cost += float(((grp - grp.mean(axis=0)) ** 2).sum())
        if cost < best:
            best, best_labels = cost, labels
    return best_labels, best


def same_partition(a, b):
    a, b = list(a), list(b)
    mapping = {}
    for x, y in zip(a, b):
        if mapping.setdefault(x, y) != y:
            return False
    return len(set(mapping.values())) == len(mapping)


def direct_silhouette(points, labels):
    """Textbook mean silhouette with explicit loops."""
    pts = np.asarray(points, dtype=np.float64)
    labels = list(labels)
    clusters = sorted(set(labels))
    total = 0.0
    for i, p in enumerate(pts):
        own = [j for j in range(len(pts)) if labels[j] == labels[i] and j != i]
        if not own:
            continue
        a = sum(math.dist(p, pts[j]) for j in own) / len(own)
        b = math.inf
        for c in clusters:
            if c == labels[i]:
                continue
            members = [j for j in range(len(pts)) if labels[j] == c]
            b = min(b, sum(math.dist(p, pts[j]) for j in members) / len(members))
        total += (b - a) / max(a, b) if max(a, b) > 0 else 0.0
    return total / len(pts)


def synthetic_metric(model, x_norm, process_index, v_unit, t_unit, j):
    """f_j = b_j + a_j * ||x - c_j - d*(P_j[p] + v*V_j + t*T_j)||^2, one metric."""
    d = model.difficulty
    acc = 0.0
    for k in range(len(x_norm)):
        shift = d * (model.process_shift[j, process_index, k]
                     + v_unit * model.vdd_shift[j, k] + t_unit * model.temp_shift[j, k])
        diff = x_norm[k] - model.centers[j, k] - shift
        acc += diff * diff
    return model.baselines[j] + model.amplitudes[j] * acc


def ota2_reference(w, cc, process, vdd, temp, k):
    """Two-stage OTA behavioral model from its defining equations."""
    factors = {"TT": (1.0, 1.0), "FF": (1.12, 1.12), "SS": (0.88, 0.88), "FS": (1.12, 0.88), "SF": (0.88, 1.12)}
    mun, mup = factors[process]
    theta = ((temp + 273.15) / 300.0) ** -1.5
    v = vdd / 1.1
    gm1 = k["g0"] * mun * theta * math.sqrt(w[0] * w[4])
    gm6 = k["g0"] * mup * theta * math.sqrt(w[5] * w[4])
    i = k["i0"] * v * (w[4] + k["k6"] * w[5])
    ugb = gm1 / (2 * math.pi * cc)
    p2 = gm6 / (2 * math.pi * (k["CL"] + k["cpar"] * w[5]))
    z = gm6 / (2 * math.pi * cc)
    phm = 90 - math.degrees(math.atan(ugb / p2)) - math.degrees(math.atan(ugb / z))
    return {"i": i, "ugb": ugb, "phm": phm}

