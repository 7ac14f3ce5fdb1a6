"""Independent oracles shared by the unit and acceptance tests.

Nothing here imports the solvers under test: the oracles use dense LAPACK,
brute force or plain loops.
"""

import numpy as np

from dimreader import dual as dn

# ---------------------------------------------------------------- expressions

_UNARY = ("exp", "log", "sqrt", "sq", "inv", "neg", "pow")
_BINARY = ("add", "sub", "mul", "div")


def random_expression(rng, depth=3):
    """A random expression tree, always defined on the real line.

    Risky operations are applied to positive arguments only
    (``log(1 + x^2)``, ``sqrt(1 + x^2)``, ``1 / (1 + x^2)``), so the tree is
    differentiable everywhere.
    """
    if depth == 0 or rng.random() < 0.2:
        if rng.random() < 0.7:
            return ("x",)
        return ("c", float(rng.uniform(-2, 2)))
    if rng.random() < 0.5:
        return (str(rng.choice(_UNARY)), random_expression(rng, depth - 1))
    return (str(rng.choice(_BINARY)), random_expression(rng, depth - 1), random_expression(rng, depth - 1))


def evaluate(tree, x, lib):
    """Evaluate with ``lib`` = ``math``-like namespace (``dn`` or ``np``)."""
    op = tree[0]
    if op == "x":
        return x
    if op == "c":
        return tree[1]
    a = evaluate(tree[1], x, lib)
    if op == "exp":
        return lib.exp(a * 0.25)
    if op == "log":
        return lib.log(a * a + 1.0)
    if op == "sqrt":
        return lib.sqrt(a * a + 1.0)
    if op == "sq":
        return a * a
    if op == "inv":
        return 1.0 / (a * a + 1.0)
    if op == "neg":
        return -a
    if op == "pow":
        return lib.power(a * a + 1.0, 1.5)
    b = evaluate(tree[2], x, lib)
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    return a / (b * b + 1.0)


def central_difference(f, x, h=1e-6):
    return (f(x + h) - f(x - h)) / (2.0 * h)


def relative_error(a, b, floor=1e-9):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), floor))


# ---------------------------------------------------------------- graphs


def floyd_warshall(n, I, J, w):
    D = np.full((n, n), np.inf)
    np.fill_diagonal(D, 0.0)
    for i, j, x in zip(I, J, w):
        D[i, j] = min(D[i, j], x)
        D[j, i] = min(D[j, i], x)
    for k in range(n):
        D = np.minimum(D, D[:, k : k + 1] + D[k : k + 1, :])
    return D


def random_graph(rng, n, p=0.3):
    """Connected random undirected graph: a random spanning tree plus extra edges."""
    perm = rng.permutation(n)
    edges = {tuple(sorted((int(perm[i]), int(perm[rng.integers(0, i)])))) for i in range(1, n)}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges.add((i, j))
    edges = sorted(edges)
    I = np.array([e[0] for e in edges])
    J = np.array([e[1] for e in edges])
    # Integer weights make shortest paths exact in floating point.
    w = rng.integers(1, 20, size=len(edges)).astype(float)
    return I, J, w


# ---------------------------------------------------------------- geometry


def procrustes_residual(X, Y):
    """RMS distance after the best rigid motion (rotation/reflection + shift) of ``Y`` onto ``X``."""
    Xc = X - X.mean(axis=0)
    Yc = Y - Y.mean(axis=0)
    U, _, Vt = np.linalg.svd(Yc.T @ Xc)
    R = U @ Vt
    return float(np.sqrt(np.mean(np.sum((Yc @ R - Xc) ** 2, axis=1))))


def segment_cosines(grid, isolines, min_grad=1e-9):
    """|cos| between each isoline segment and the field gradient at its midpoint."""
    out = []
    for line in isolines:
        P = np.asarray(line.polyline)
        for a, b in zip(P[:-1], P[1:]):
            seg = b - a
            g = grid.gradient_at(((a + b) / 2.0)[None])[0]
            if np.linalg.norm(seg) > 1e-12 and np.linalg.norm(g) > min_grad:
                out.append(abs(seg @ g) / (np.linalg.norm(seg) * np.linalg.norm(g)))
    return np.array(out)


def segment_angles_deg(isolines):
    """Undirected direction of every non-degenerate segment, in degrees in [0, 180)."""
    out = []
    for line in isolines:
        P = np.asarray(line.polyline)
        d = np.diff(P, axis=0)
        d = d[np.linalg.norm(d, axis=1) > 1e-12]
        out.extend(np.degrees(np.arctan2(d[:, 1], d[:, 0])) % 180.0)
    return np.array(out)


def max_angle_spread(angles):
    """Largest pairwise difference between undirected angles (handles the 0/180 wrap)."""
    a = np.sort(np.asarray(angles) % 180.0)
    if len(a) < 2:
        return 0.0
    gaps = np.diff(np.concatenate([a, [a[0] + 180.0]]))
    return float(180.0 - gaps.max())


def isoline_spacing_cv(isolines, normal):
    """Coefficient of variation of the gaps between straight parallel isolines.

    Each line is located by the mean of its vertices projected on ``normal``.
    """
    normal = np.asarray(normal, dtype=float) / np.linalg.norm(normal)
    offsets = {}
    for line in isolines:
        offsets.setdefault(line.level, []).append(np.asarray(line.polyline) @ normal)
    pos = np.sort([np.mean(np.concatenate(v)) for v in offsets.values()])
    gaps = np.diff(pos)
    return float(np.std(gaps) / np.mean(gaps))


def dual_run(project, X, seeds):
    return np.asarray(dn.deriv(project(dn.DualArray(X, seeds))))


def fd_run(project, X, seeds, eps):
    plus = np.asarray(project(X + eps * seeds))
    minus = np.asarray(project(X - eps * seeds))
    return (plus - minus) / (2.0 * eps)


def unit_rows(rng, n, d):
    R = rng.standard_normal((n, d))
    return R / np.linalg.norm(R, axis=1, keepdims=True)


