"""Network layers against loop oracles, window assembly, and weight files."""

import math

import numpy as np
import pytest

from derdispatch.caseio import BidCurve, Bus, Dera, Generator, Line, Load, \
    SystemCase, TDer
from derdispatch.stgcn import (
    EdgeMlp,
    GraphSampleWindow,
    Hyper,
    ShapeError,
    build_window,
    chebyshev_layer,
    ec_conv_layer,
    eval_loss,
    forward,
    gcn_layer,
    init_model,
    load_model,
    normalized_adjacency,
    save_model,
    temporal_gated_conv,
)
from derdispatch.strategies import DfHistory, HistoryRecord
from derdispatch.rted import DfVector

from oracles import cheb_loops, ecc_loops, gcn_loops, glu_conv_loops


class TestTemporalGatedConv:
    def test_zero_input_zero_output(self, rng):
        H = np.zeros((6, 3, 2))
        W = rng.normal(size=(3, 2, 4))
        V = rng.normal(size=(3, 2, 4))
        out = temporal_gated_conv(H, W, V)
        assert out.shape == (4, 3, 4)
        assert np.all(out == 0.0)

    def test_saturated_gate_passes_identity(self):
        H = np.linspace(-1, 1, 10).reshape(5, 2, 1)
        W = np.ones((1, 1, 1))
        V = np.zeros((1, 1, 1))
        out = temporal_gated_conv(H, W, V, bv=np.array([50.0]))
        assert out == pytest.approx(H, abs=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_loop_oracle(self, seed):
        rng = np.random.default_rng(seed)
        H = rng.normal(size=(7, 4, 3))
        W = rng.normal(size=(3, 3, 5))
        V = rng.normal(size=(3, 3, 5))
        bw = rng.normal(size=5)
        bv = rng.normal(size=5)
        ours = temporal_gated_conv(H, W, V, bw=bw, bv=bv)
        assert ours == pytest.approx(glu_conv_loops(H, W, V, bw, bv), abs=1e-10)

    def test_short_window_rejected(self, rng):
        with pytest.raises(ShapeError, match="shorter"):
            temporal_gated_conv(np.zeros((2, 1, 1)), np.zeros((3, 1, 1)),
                                np.zeros((3, 1, 1)))


class TestGcnLayer:
    def test_single_node_identity(self):
        H = np.array([[2.0, -1.0]])
        out = gcn_layer(H, np.zeros((1, 1)), np.eye(2))
        assert out == pytest.approx(H)

    def test_two_nodes_mix(self):
        # hand-evaluated normalized adjacency of a single edge: all entries 1/2
        H = np.array([[1.0], [0.0]])
        A = np.array([[0.0, 1.0], [1.0, 0.0]])
        out = gcn_layer(H, A, np.eye(1))
        assert out == pytest.approx(np.array([[0.5], [0.5]]))

    def test_regular_graph_row_sums(self):
        # 4-cycle: degree 2 everywhere; self-looped normalization rows sum to 1
        A = np.zeros((4, 4))
        for i in range(4):
            A[i, (i + 1) % 4] = A[(i + 1) % 4, i] = 1.0
        rows = normalized_adjacency(A).sum(axis=1)
        assert rows == pytest.approx(np.ones(4), abs=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_loop_oracle(self, seed):
        rng = np.random.default_rng(10 + seed)
        n = 6
        A = (rng.random((n, n)) < 0.4).astype(float)
        A = np.triu(A, 1)
        A = A + A.T
        H = rng.normal(size=(n, 3))
        W = rng.normal(size=(3, 4))
        assert gcn_layer(H, A, W) == pytest.approx(gcn_loops(H, A, W), abs=1e-10)


class TestEcConv:
    def _mlp(self, rng, c_in, c_out, attr_w=4, hidden=5):
        return EdgeMlp(rng.normal(size=(attr_w, hidden)), rng.normal(size=hidden),
                       rng.normal(size=(hidden, c_in * c_out)),
                       rng.normal(size=c_in * c_out))

    def test_no_edges_is_linear(self, rng):
        H = rng.normal(size=(3, 2))
        W = rng.normal(size=(2, 4))
        out = ec_conv_layer(H, np.zeros((0, 2), dtype=int), np.zeros((0, 4)), W,
                            self._mlp(rng, 2, 4))
        assert out == pytest.approx(H @ W)

    def test_zero_edge_network(self, rng):
        H = rng.normal(size=(2, 3))
        W = rng.normal(size=(3, 2))
        mlp = EdgeMlp(np.zeros((4, 5)), np.zeros(5), np.zeros((5, 6)), np.zeros(6))
        out = ec_conv_layer(H, np.array([[0, 1]]), np.ones((1, 4)), W, mlp)
        assert out == pytest.approx(H @ W)

    def test_two_node_hand_computation(self):
        # one edge, 1-channel features: theta = relu(attr W1 + b1) W2 + b2
        H = np.array([[2.0], [3.0]])
        W = np.array([[10.0]])
        mlp = EdgeMlp(np.array([[1.0], [0.0], [0.0], [0.0]]), np.array([-0.5]),
                      np.array([[2.0]]), np.array([0.25]))
        attr = np.array([[1.5, 0.0, 0.0, 0.0]])
        # hidden = relu(1.5 - 0.5) = 1.0; theta = 1*2 + 0.25 = 2.25
        out = ec_conv_layer(H, np.array([[0, 1]]), attr, W, mlp)
        assert out == pytest.approx(np.array([[20.0 + 3.0 * 2.25],
                                              [30.0 + 2.0 * 2.25]]))

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_loop_oracle(self, seed):
        rng = np.random.default_rng(20 + seed)
        n, c_in, c_out = 5, 3, 4
        H = rng.normal(size=(n, c_in))
        W = rng.normal(size=(c_in, c_out))
        edges = np.array([[0, 1], [1, 2], [3, 4], [0, 4]])
        attr = rng.normal(size=(4, 4))
        mlp = self._mlp(rng, c_in, c_out)
        ours = ec_conv_layer(H, edges, attr, W, mlp)
        ref = ecc_loops(H, edges, attr, W, mlp.W1, mlp.b1, mlp.W2, mlp.b2)
        assert ours == pytest.approx(ref, abs=1e-10)

    def test_attr_width_mismatch(self, rng):
        with pytest.raises(ShapeError, match="width"):
            ec_conv_layer(rng.normal(size=(2, 2)), np.array([[0, 1]]),
                          np.ones((1, 3)), rng.normal(size=(2, 2)),
                          self._mlp(rng, 2, 2))


class TestChebyshev:
    def test_identity_weights(self, rng):
        H = rng.normal(size=(4, 3))
        A = np.array([[0, 1, 0, 0], [1, 0, 1, 0], [0, 1, 0, 1], [0, 0, 1, 0]],
                     dtype=float)
        out = chebyshev_layer(H, A, np.eye(3), np.zeros((3, 3)))
        assert out == pytest.approx(H)

    def test_constant_field_on_regular_graph(self):
        # cycle graph: normalized Laplacian kills constants, so Z2 = -H
        A = np.zeros((5, 5))
        for i in range(5):
            A[i, (i + 1) % 5] = A[(i + 1) % 5, i] = 1.0
        H = np.full((5, 2), 3.0)
        out = chebyshev_layer(H, A, np.zeros((2, 2)), np.eye(2))
        assert out == pytest.approx(-H, abs=1e-12)

    @pytest.mark.parametrize("k,seed", [(2, 0), (3, 1), (3, 2), (4, 3)])
    def test_matches_polynomial_oracle(self, k, seed):
        rng = np.random.default_rng(30 + seed)
        n = 4
        A = (rng.random((n, n)) < 0.5).astype(float)
        A = np.triu(A, 1)
        A = A + A.T
        H = rng.normal(size=(n, 3))
        weights = [rng.normal(size=(3, 2)) for _ in range(k)]
        ours = chebyshev_layer(H, A, *weights)
        assert ours == pytest.approx(cheb_loops(H, A, weights), abs=1e-10)


def window_case():
    """3 buses: gen at 1, DERA spanning buses 2 and 3."""
    buses = [Bus(1, is_reference=True), Bus(2), Bus(3)]
    lines = [Line(0, 1, 2, 0.1, 0.02, 40.0), Line(1, 2, 3, 0.2, 0.01, 30.0),
             Line(2, 1, 3, 0.1, 0.03, 40.0)]
    gens = [Generator(0, 1, 0.0, 50.0, 20.0, 20.0,
                      BidCurve.from_slopes([10.0, 12.0], 0.0, 50.0), p_prev=12.0)]
    tders = [TDer("D2", 2, 0.0, 6.0), TDer("D3", 3, 0.0, 4.0)]
    dera = Dera("A0", tders, bid_curve=BidCurve.from_slopes([7.0, 9.0], 0.0, 10.0))
    return SystemCase(buses, lines, gens, [Load(2, 8.0), Load(3, 6.0)], [dera])


def make_history(case, m=12, seed=0):
    rng = np.random.default_rng(seed)
    hist = DfHistory(capacity=max(m, 12))
    for t in range(m):
        phi = rng.dirichlet([2.0, 2.0])
        dispatch = float(rng.uniform(0, 10))
        outputs = {"D2": phi[0] * dispatch, "D3": phi[1] * dispatch}
        hist.append(HistoryRecord(
            DfVector({"A0": phi}), rng.uniform(2, 10, size=3), {"A0": dispatch},
            outputs))
    return hist


def bids_at(case, t=0):
    out = {g.id: g.bid_at(t) for g in case.generators}
    out.update({a.id: a.bid_at(t) for a in case.deras})
    return out


class TestBuildWindow:
    def test_shapes_and_slots(self):
        case = window_case()
        hist = make_history(case)
        win = build_window(case, hist, np.array([0.0, 8.0, 6.0]), bids_at(case), None)
        assert win.load_der.shape == (12, 3, 2)  # 1 load + 1 T-DER slot
        assert win.gen_feat.shape == (3, 25)
        assert win.edge_attr.shape == (3, 4)
        assert win.tder_slots == [(1, 0), (2, 0)]

    def test_bus_without_units_zero_row(self):
        case = window_case()
        hist = make_history(case)
        win = build_window(case, hist, np.zeros(3), bids_at(case), None)
        # bus 2 hosts no generator; its generator-bid block stays zero
        assert np.all(win.gen_feat[1, 0:10] == 0.0)
        assert np.all(win.gen_feat[1, 20:25] == 0.0)

    def test_dera_bids_duplicated_across_member_buses(self):
        case = window_case()
        hist = make_history(case)
        win = build_window(case, hist, np.zeros(3), bids_at(case), None)
        assert win.gen_feat[1, 10:20] == pytest.approx(win.gen_feat[2, 10:20])
        assert np.abs(win.gen_feat[1, 10:20]).max() > 0

    def test_newest_frame_pairs_target_load_with_lagged_output(self):
        case = window_case()
        hist = make_history(case)
        loads_t = np.array([1.0, 2.0, 3.0])
        win = build_window(case, hist, loads_t, bids_at(case), None)
        assert win.load_der[-1, :, 0] == pytest.approx(loads_t)
        last = hist[-1].tder_output
        assert win.load_der[-1, 1, 1] == pytest.approx(last["D2"])
        assert win.load_der[-1, 2, 1] == pytest.approx(last["D3"])

    def test_insufficient_history(self):
        case = window_case()
        hist = make_history(case, m=5)
        with pytest.raises(ShapeError, match="history"):
            build_window(case, hist, np.zeros(3), bids_at(case), None)


def tiny_hyper():
    return Hyper(window=12, temporal_kernel=3, st_channels=(6, 4, 6), st_embed=5,
                 ec_channels=(4, 4), ec_hidden=4, ec_embed=3, cheb_k=2,
                 fa_channels=5, tder_slots=1)


class TestForward:
    def _win(self, seed=0):
        case = window_case()
        hist = make_history(case, seed=seed)
        return case, build_window(case, hist, np.array([0.0, 8.0, 6.0]),
                                  bids_at(case), None)

    def test_zero_weights_zero_scores(self):
        case, win = self._win()
        model = init_model(tiny_hyper(), win.load_der.shape[2], seed=1)
        for name in model.tensors:
            model.tensors[name] = np.zeros_like(model.tensors[name])
        assert forward(model, win) == pytest.approx(np.zeros(2))

    def test_pure_function_bit_identical(self):
        case, win = self._win()
        model = init_model(tiny_hyper(), win.load_der.shape[2], seed=2)
        a, b = forward(model, win), forward(model, win)
        assert (a == b).all()

    def test_shape_mismatch_names_tensor(self):
        case, win = self._win()
        model = init_model(tiny_hyper(), win.load_der.shape[2], seed=3)
        model.tensors["st1.gcn.W"] = np.zeros((7, 7))
        with pytest.raises(ShapeError, match="st1.gcn.W"):
            forward(model, win)

    def test_permutation_equivariance(self):
        case, win = self._win(seed=4)
        model = init_model(tiny_hyper(), win.load_der.shape[2], seed=5)
        base = forward(model, win)
        perm = np.array([2, 0, 1])  # new position of each old bus index
        inv = np.argsort(perm)
        win_p = GraphSampleWindow(
            load_der=win.load_der[:, inv, :],
            adjacency=win.adjacency[np.ix_(inv, inv)],
            gen_feat=win.gen_feat[inv, :],
            edge_index=np.array([[perm[i], perm[j]] for i, j in win.edge_index]),
            edge_attr=win.edge_attr,
            tder_slots=[(int(perm[b]), s) for b, s in win.tder_slots],
        )
        assert forward(model, win_p) == pytest.approx(base, abs=1e-12)


class TestEvalLoss:
    def test_zero_at_target(self):
        assert eval_loss(np.array([0.3, 0.7]), np.array([0.3, 0.7]), 50.0, 0.01) == 0.0

    def test_plain_squared_norm(self):
        assert eval_loss(np.array([0.1, -0.1]), np.zeros(2), 123.0, 0.0) == \
            pytest.approx(0.02, abs=1e-15)

    def test_exponential_weighting(self):
        val = eval_loss(np.array([0.1, -0.1]), np.zeros(2), 100.0, 0.01)
        assert val == pytest.approx(math.e * 0.02, abs=1e-12)
        assert val == pytest.approx(0.05436563656918090, abs=1e-12)


class TestWeightFiles:
    def test_roundtrip_f32_exact(self, tmp_path):
        hyper = tiny_hyper()
        model = init_model(hyper, 2, seed=9)
        model.stats = {"load_der.mean": np.zeros(2), "load_der.std": np.ones(2)}
        path = tmp_path / "model.json"
        save_model(model, str(path))
        loaded = load_model(str(path))
        for name, arr in model.tensors.items():
            assert loaded.tensors[name] == pytest.approx(
                arr.astype(np.float32).astype(float), abs=0.0)
        assert loaded.hyper == hyper

    def test_unknown_version_rejected(self, tmp_path):
        model = init_model(tiny_hyper(), 2, seed=9)
        path = tmp_path / "model.json"
        save_model(model, str(path))
        import json
        data = json.loads(path.read_text())
        data["version"] = 99
        path.write_text(json.dumps(data))
        with pytest.raises(Exception, match="version"):
            load_model(str(path))

    def test_checksum_enforced(self, tmp_path):
        model = init_model(tiny_hyper(), 2, seed=9)
        path = tmp_path / "model.json"
        save_model(model, str(path))
        payload = tmp_path / "model.bin"
        blob = bytearray(payload.read_bytes())
        blob[3] ^= 0xFF
        payload.write_bytes(bytes(blob))
        with pytest.raises(Exception, match="checksum"):
            load_model(str(path))

    def test_forward_after_roundtrip(self, tmp_path):
        case = window_case()
        hist = make_history(case)
        win = build_window(case, hist, np.array([0.0, 8.0, 6.0]), bids_at(case), None)
        model = init_model(tiny_hyper(), win.load_der.shape[2], seed=11)
        # quantize reference weights to f32 so the comparison is exact
        for name in model.tensors:
            model.tensors[name] = model.tensors[name].astype(np.float32).astype(float)
        before = forward(model, win)
        save_model(model, str(tmp_path / "m.json"))
        after = forward(load_model(str(tmp_path / "m.json")), win)
        assert after == pytest.approx(before, abs=1e-12)
