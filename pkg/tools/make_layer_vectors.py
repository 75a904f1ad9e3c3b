#!/usr/bin/env python3
"""Regenerate the shared layer-level test vectors.

Inputs are random but seeded; expected outputs come from the loop-based
reference implementations in tests/oracles.py, NOT from the library code,
so both the library and the trainer are checked against the same
independent ground truth.  Run from the repository root.
"""

import json
import os
import sys

import numpy as np

ROOT = os.path.join(os.path.dirname(__file__), "..")
sys.path.insert(0, os.path.join(ROOT, "tests"))

from oracles import cheb_loops, ecc_loops, gcn_loops, glu_conv_loops

OUT = os.path.join(ROOT, "tests", "fixtures", "layer_vectors.json")


def rnd_adj(rng, n, p=0.5):
    A = (rng.random((n, n)) < p).astype(float)
    A = np.triu(A, 1)
    return A + A.T


def main():
    rng = np.random.default_rng(424242)
    vectors = []

    for i in range(3):
        H = rng.normal(size=(6, 3, 2))
        W = rng.normal(size=(3, 2, 4))
        V = rng.normal(size=(3, 2, 4))
        bw = rng.normal(size=4)
        bv = rng.normal(size=4)
        vectors.append({
            "layer": "glu",
            "H": H.tolist(), "W": W.tolist(), "V": V.tolist(),
            "bw": bw.tolist(), "bv": bv.tolist(),
            "expected": glu_conv_loops(H, W, V, bw, bv).tolist(),
        })

    for i in range(3):
        n = 5
        A = rnd_adj(rng, n)
        H = rng.normal(size=(n, 3))
        W = rng.normal(size=(3, 4))
        vectors.append({
            "layer": "gcn",
            "H": H.tolist(), "A": A.tolist(), "W": W.tolist(),
            "expected": gcn_loops(H, A, W).tolist(),
        })

    for i in range(3):
        n, c_in, c_out, hidden = 5, 3, 4, 4
        H = rng.normal(size=(n, c_in))
        W = rng.normal(size=(c_in, c_out))
        edges = [[0, 1], [1, 2], [2, 3], [3, 4], [0, 4]]
        attr = rng.normal(size=(len(edges), 4))
        w1 = rng.normal(size=(4, hidden))
        b1 = rng.normal(size=hidden)
        w2 = rng.normal(size=(hidden, c_in * c_out))
        b2 = rng.normal(size=c_in * c_out)
        vectors.append({
            "layer": "ecc",
            "H": H.tolist(), "W": W.tolist(), "edges": edges,
            "attr": attr.tolist(),
            "mlp_w1": w1.tolist(), "mlp_b1": b1.tolist(),
            "mlp_w2": w2.tolist(), "mlp_b2": b2.tolist(),
            "expected": ecc_loops(H, np.array(edges), attr, W, w1, b1, w2, b2).tolist(),
        })

    for k in (2, 3):
        n = 4
        A = rnd_adj(rng, n)
        H = rng.normal(size=(n, 3))
        weights = [rng.normal(size=(3, 2)) for _ in range(k)]
        vectors.append({
            "layer": "cheb",
            "H": H.tolist(), "A": A.tolist(),
            "weights": [w.tolist() for w in weights],
            "expected": cheb_loops(H, A, weights).tolist(),
        })

    os.makedirs(os.path.dirname(OUT), exist_ok=True)
    with open(OUT, "w", encoding="utf-8") as fh:
        json.dump({"seed": 424242, "tolerance": 1e-10, "vectors": vectors}, fh)
        fh.write("\n")
    print(f"wrote {OUT} ({len(vectors)} vectors)")


if __name__ == "__main__":
    main()
