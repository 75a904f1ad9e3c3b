"""Independent reference implementations the test suite checks against.

Nothing here imports the algorithmic paths it is meant to verify: the DC
solve works on bus angles instead of shift factors, the simplex is a dense
two-phase tableau with Bland's rule instead of HiGHS, and the neural
layers are plain element loops instead of vectorized tensor algebra.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

TOL = 1e-9


# ---------------------------------------------------------------------------
# angle-formulation DC power flow


def dc_flow_by_angles(case, injections, reference_bus=None):
    """Line flows from bus angles: solve B theta = P, flow = (th_i - th_j)/x."""
    ref = case.reference_bus if reference_bus is None else reference_bus
    idx = {b.id: i for i, b in enumerate(case.buses)}
    n = len(case.buses)
    B = np.zeros((n, n))
    for l in case.lines:
        i, j = idx[l.from_bus], idx[l.to_bus]
        y = 1.0 / l.reactance_pu
        B[i, i] += y
        B[j, j] += y
        B[i, j] -= y
        B[j, i] -= y
    keep = [i for i in range(n) if i != idx[ref]]
    theta = np.zeros(n)
    inj = np.asarray(injections, dtype=float)
    theta[keep] = np.linalg.solve(B[np.ix_(keep, keep)], inj[keep])
    return np.array(
        [(theta[idx[l.from_bus]] - theta[idx[l.to_bus]]) / l.reactance_pu for l in case.lines]
    )


def flows_without_line(case, injections, removed_line_id, reference_bus=None):
    """Re-solve the network with one line physically removed."""
    lines = [l for l in case.lines if l.id != removed_line_id]
    reduced = replace(case, lines=lines)
    flows = dc_flow_by_angles(reduced, injections, reference_bus)
    out = {}
    for l, f in zip(lines, flows):
        out[l.id] = f
    return out


# ---------------------------------------------------------------------------
# dense two-phase tableau simplex (Bland's rule)


def _pivot(T, basis, r, col):
    T[r] /= T[r, col]
    for i in range(T.shape[0]):
        if i != r and abs(T[i, col]) > 0:
            T[i] -= T[i, col] * T[r]
    basis[r] = col


def _phase(T, basis, n_cols, allowed, tol=1e-9, cap=20000):
    for _ in range(cap):
        # Bland: entering = lowest-index improving column
        col = -1
        for j in range(n_cols):
            if j in allowed and T[-1, j] < -tol:
                col = j
                break
        if col < 0:
            return "optimal"
        ratios = [
            (T[i, -1] / T[i, col], basis[i], i)
            for i in range(len(basis))
            if T[i, col] > tol
        ]
        if not ratios:
            return "unbounded"
        _, _, r = min(ratios)
        _pivot(T, basis, r, col)
    raise RuntimeError("oracle simplex iteration cap hit")


def tableau_simplex(c, A, b, tol=1e-9):
    """min c'x s.t. Ax = b, x >= 0 (b >= 0).  Returns (status, x, objective)."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).copy()
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    for i in range(m):
        if b[i] < 0:
            A[i] *= -1
            b[i] *= -1
    # phase 1 tableau: [A | I | b]
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    basis = list(range(n, n + m))
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    status = _phase(T, basis, n + m, allowed=set(range(n + m)))
    if status != "optimal" or T[-1, -1] < -1e-7:
        return "infeasible", None, math.nan
    # drive artificials out of the basis when possible
    for i in range(m):
        if basis[i] >= n:
            for j in range(n):
                if abs(T[i, j]) > tol:
                    _pivot(T, basis, i, j)
                    break
    # redundant all-artificial zero rows can simply stay; they never pivot
    # phase 2
    T2 = np.zeros((m + 1, n + 1))
    T2[:m, :n] = T[:m, :n]
    T2[:m, -1] = T[:m, -1]
    T2[-1, :n] = c
    for i in range(m):
        if basis[i] < n:
            T2[-1] -= T2[-1, basis[i]] * T2[i]
    status = _phase(T2, basis, n, allowed={j for j in range(n)})
    if status == "unbounded":
        return "unbounded", None, math.nan
    x = np.zeros(n)
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = T2[i, -1]
    return "optimal", x, float(c @ x)


def solve_lp_reference(model):
    """Solve an lpcore.LpModel with the tableau oracle.

    Bounded variables are shifted/split to standard form; every row gets a
    slack/surplus so the tableau stays small and honest.
    """
    names = model.variables
    # column plan per variable: (kind, data)
    cols = []          # list of (var, sign, shift) per tableau column
    var_cols = {}
    extra_rows = []    # upper-bound rows: (var, ub_shifted)
    for v in names:
        lo, up = model.lower[v], model.upper[v]
        if math.isfinite(lo):
            var_cols[v] = [(len(cols), 1.0, lo)]
            cols.append(v)
            if math.isfinite(up):
                extra_rows.append((v, up - lo))
        elif math.isfinite(up):
            var_cols[v] = [(len(cols), -1.0, up)]
            cols.append(v)
        else:
            var_cols[v] = [(len(cols), 1.0, 0.0), (len(cols) + 1, -1.0, 0.0)]
            cols.append(v)
            cols.append(v)

    n = len(cols)
    rows = []
    rhs = []
    senses = []
    for con in model.constraints:
        r = np.zeros(n)
        shift = 0.0
        for v, k in con.coeffs.items():
            for j, sign, _ in var_cols[v]:
                r[j] += k * sign
            # the shift applies once per variable, not per split column
            shift += k * var_cols[v][0][2]
        rows.append(r)
        rhs.append(con.rhs - shift)
        senses.append(con.sense)
    for v, ub in extra_rows:
        r = np.zeros(n)
        r[var_cols[v][0][0]] = 1.0
        rows.append(r)
        rhs.append(ub)
        senses.append("<=")

    m = len(rows)
    n_slack = sum(1 for s in senses if s != "==")
    A = np.zeros((m, n + n_slack))
    b = np.array(rhs, dtype=float)
    sj = n
    for i, (r, s) in enumerate(zip(rows, senses)):
        A[i, :n] = r
        if s == "<=":
            A[i, sj] = 1.0
            sj += 1
        elif s == ">=":
            A[i, sj] = -1.0
            sj += 1

    c = np.zeros(n + n_slack)
    shift_obj = 0.0
    for v, k in model.objective.items():
        for j, sign, off in var_cols[v]:
            c[j] += k * sign
        shift_obj += k * var_cols[v][0][2]

    status, x, obj = tableau_simplex(c, A, b)
    if status != "optimal":
        return status, None, math.nan
    primal = {}
    for v in names:
        val = 0.0
        first = True
        for j, sign, off in var_cols[v]:
            val += sign * x[j]
            if first:
                val += off
                first = False
        primal[v] = val
    return status, primal, obj + shift_obj


# ---------------------------------------------------------------------------
# loop-based neural layer references


def glu_conv_loops(H, W, V, bw=None, bv=None):
    """Gated temporal convolution, elementwise definition."""
    T, N, C = H.shape
    K, _, Cout = W.shape
    out = np.zeros((T - K + 1, N, Cout))
    for t in range(T - K + 1):
        for nnode in range(N):
            for co in range(Cout):
                lin = 0.0 if bw is None else bw[co]
                gate = 0.0 if bv is None else bv[co]
                for k in range(K):
                    for ci in range(C):
                        lin += H[t + k, nnode, ci] * W[k, ci, co]
                        gate += H[t + k, nnode, ci] * V[k, ci, co]
                out[t, nnode, co] = lin * (1.0 / (1.0 + math.exp(-gate)))
    return out


def gcn_loops(H, A, W):
    """Symmetric-normalized graph convolution with self-loops, by loops."""
    N, C = H.shape
    Ah = A + np.eye(N)
    deg = Ah.sum(axis=1)
    Cout = W.shape[1]
    out = np.zeros((N, Cout))
    for i in range(N):
        for j in range(N):
            if Ah[i, j] == 0:
                continue
            norm = 1.0 / math.sqrt(deg[i] * deg[j])
            for co in range(Cout):
                for ci in range(C):
                    out[i, co] += norm * H[j, ci] * W[ci, co]
    return out


def ecc_loops(H, edges, edge_attr, W, mlp_w1, mlp_b1, mlp_w2, mlp_b2):
    """Edge-conditioned convolution with an affine-ReLU-affine edge network."""
    N, C = H.shape
    Cout = W.shape[1]
    out = np.zeros((N, Cout))
    for i in range(N):
        for co in range(Cout):
            for ci in range(C):
                out[i, co] += W[ci, co] * H[i, ci]
    for (i, j), attr in zip(edges, edge_attr):
        hidden = np.maximum(attr @ mlp_w1 + mlp_b1, 0.0)
        theta = (hidden @ mlp_w2 + mlp_b2).reshape(C, Cout)
        for a, bnode in ((i, j), (j, i)):
            for co in range(Cout):
                for ci in range(C):
                    out[a, co] += H[bnode, ci] * theta[ci, co]
    return out


def cheb_loops(H, A, weights):
    """Chebyshev filter via explicit matrix polynomials T_k(Lhat).

    Avoids the implementation's incremental recurrence on feature vectors:
    the Chebyshev polynomials are built as dense matrices first.
    """
    N = A.shape[0]
    deg = A.sum(axis=1)
    dinv = np.array([1.0 / math.sqrt(d) if d > 0 else 0.0 for d in deg])
    L = np.eye(N) - (dinv[:, None] * A * dinv[None, :])
    Lhat = L - np.eye(N)  # 2 L / lambda_max - I with lambda_max = 2
    polys = [np.eye(N), Lhat]
    while len(polys) < len(weights):
        polys.append(2.0 * Lhat @ polys[-1] - polys[-2])
    out = np.zeros((H.shape[0], weights[0].shape[1]))
    for pk, wk in zip(polys, weights):
        out += (pk @ H) @ wk
    return out
