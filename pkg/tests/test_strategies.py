"""DF predictors: simplex guarantees, fallbacks, regimes, and the metric."""

import numpy as np
import pytest

from derdispatch.caseio import BidCurve, Bus, CaseError, Dera, Generator, Line, Load, \
    SystemCase, TDer
from derdispatch.rted import DfVector
from derdispatch.strategies import (
    DfHistory,
    HistoryRecord,
    df_accuracy,
    predict_const,
    predict_knn,
    predict_mer,
    project_simplex,
)


def small_case(n_members=2):
    buses = [Bus(1, is_reference=True), Bus(2)]
    lines = [Line(0, 1, 2, 0.1, 0.0, 100.0)]
    gens = [Generator(0, 1, 0.0, 50.0, 50.0, 50.0, BidCurve.single(10, 0, 50))]
    tders = [TDer(f"D{i}", 2, 0.0, 5.0) for i in range(n_members)]
    dera = Dera("A0", tders, bid_curve=BidCurve.single(8.0, 0.0, 5.0 * n_members))
    return SystemCase(buses, lines, gens, [Load(2, 10.0)], [dera])


def record(case, phi, loads, dispatch):
    dfs = DfVector({"A0": np.asarray(phi, dtype=float)})
    outputs = {e.id: float(p * dispatch) for e, p in zip(case.deras[0].tders, phi)}
    return HistoryRecord(dfs, np.asarray(loads, dtype=float),
                         {"A0": dispatch}, outputs)


class TestConst:
    def test_ten_members(self):
        case = small_case(10)
        pred = predict_const(case)
        assert pred.dfs.phi("A0") == pytest.approx(np.full(10, 0.1))

    def test_singleton(self):
        case = small_case(1)
        assert predict_const(case).dfs.phi("A0") == pytest.approx([1.0])

    def test_sums_to_one(self):
        case = small_case(7)
        assert predict_const(case).dfs.phi("A0").sum() == pytest.approx(1.0, abs=1e-12)


class TestMer:
    def test_copies_last(self):
        case = small_case()
        hist = DfHistory()
        hist.append(record(case, [0.3, 0.7], [0.0, 10.0], 4.0))
        pred = predict_mer(case, hist)
        assert pred.dfs.phi("A0") == pytest.approx([0.3, 0.7])

    def test_empty_falls_back_const(self, caplog):
        case = small_case()
        with caplog.at_level("WARNING"):
            pred = predict_mer(case, DfHistory())
        assert pred.dfs.phi("A0") == pytest.approx([0.5, 0.5])
        assert "falling back" in caplog.text

    def test_after_zero_instruction_uniform(self):
        case = small_case()
        dfs = DfVector.from_outputs(case, {})  # zero outputs -> uniform rule
        hist = DfHistory()
        hist.append(HistoryRecord(dfs, np.zeros(2), {"A0": 0.0}, {}))
        assert predict_mer(case, hist).dfs.phi("A0") == pytest.approx([0.5, 0.5])


class TestKnn:
    def test_identical_history(self):
        case = small_case()
        hist = DfHistory()
        for _ in range(6):
            hist.append(record(case, [0.4, 0.6], [1.0, 9.0], 3.0))
        pred = predict_knn(case, hist, np.array([1.0, 9.0]), k=3)
        assert pred.dfs.phi("A0") == pytest.approx([0.4, 0.6], abs=1e-12)

    def test_k_equals_history_gives_global_mean(self):
        case = small_case()
        hist = DfHistory()
        phis = [[0.2, 0.8], [0.6, 0.4], [0.4, 0.6], [0.8, 0.2]]
        for i, phi in enumerate(phis):
            hist.append(record(case, phi, [1.0 + i, 9.0 - i], 2.0 + i))
        pred = predict_knn(case, hist, np.array([2.0, 8.0]), k=len(hist))
        assert pred.dfs.phi("A0") == pytest.approx(
            np.mean(phis, axis=0), abs=1e-12)

    def test_two_regimes(self):
        # peak and off-peak operating points separated by >> 10 sigma
        case = small_case()
        hist = DfHistory(capacity=64)
        rng = np.random.default_rng(5)
        peak_phi, off_phi = [0.9, 0.1], [0.1, 0.9]
        for i in range(20):
            if i % 2 == 0:
                hist.append(record(case, peak_phi, [100.0 + rng.normal(scale=0.1),
                                                    900.0], 9.0))
            else:
                hist.append(record(case, off_phi, [1.0 + rng.normal(scale=0.1),
                                                   9.0], 1.0))
        pred = predict_knn(case, hist, np.array([100.0, 900.0]), k=5)
        assert pred.dfs.phi("A0") == pytest.approx(peak_phi, abs=1e-6)

    def test_short_history_rejected(self):
        case = small_case()
        hist = DfHistory()
        hist.append(record(case, [0.5, 0.5], [1.0, 9.0], 1.0))
        with pytest.raises(CaseError, match="history"):
            predict_knn(case, hist, np.array([1.0, 9.0]), k=5)

    def test_determinism(self):
        case = small_case()
        hist = DfHistory()
        rng = np.random.default_rng(7)
        for _ in range(12):
            q = rng.dirichlet([1.0, 1.0])
            hist.append(record(case, q, rng.uniform(0, 10, size=2), float(rng.uniform(0, 8))))
        q = np.array([3.0, 4.0])
        a = predict_knn(case, hist, q, k=4)
        b = predict_knn(case, hist, q, k=4)
        assert a.dfs.phi("A0") == pytest.approx(b.dfs.phi("A0"), abs=0.0)
        assert a.features_digest == b.features_digest


class TestProjection:
    def test_clamps_and_renormalizes(self):
        out = project_simplex(np.array([0.5, -0.2, 0.3]))
        assert out == pytest.approx([0.625, 0.0, 0.375])
        assert out.sum() == 1.0

    def test_all_zero_uniform(self):
        assert project_simplex(np.zeros(4)) == pytest.approx(np.full(4, 0.25))

    def test_keeps_exact_zeros(self):
        out = project_simplex(np.array([2.0, 0.0, 2.0]))
        assert out[1] == 0.0

    @pytest.mark.parametrize("seed", range(4))
    def test_fuzzed_simplex(self, seed):
        rng = np.random.default_rng(seed)
        for _ in range(2500):
            v = project_simplex(rng.normal(size=rng.integers(1, 12)))
            assert v.min() >= 0.0
            assert v.sum() == pytest.approx(1.0, abs=1e-9)


class TestAccuracy:
    def test_perfect(self):
        a = DfVector({"A0": np.array([0.5, 0.5])})
        assert df_accuracy(a, a) == pytest.approx(100.0, abs=1e-9)

    def test_maximal_distance(self):
        p = DfVector({"A0": np.array([1.0, 0.0])})
        o = DfVector({"A0": np.array([0.0, 1.0])})
        assert df_accuracy(p, o) == pytest.approx(0.0, abs=1e-9)

    def test_ninety(self):
        p = DfVector({"A0": np.array([0.6, 0.4])})
        o = DfVector({"A0": np.array([0.5, 0.5])})
        assert df_accuracy(p, o) == pytest.approx(90.0, abs=1e-9)

    def test_mean_over_deras(self):
        p = DfVector({"A0": np.array([1.0, 0.0]), "A1": np.array([0.5, 0.5])})
        o = DfVector({"A0": np.array([0.0, 1.0]), "A1": np.array([0.5, 0.5])})
        assert df_accuracy(p, o) == pytest.approx(50.0, abs=1e-9)

    def test_structure_mismatch(self):
        p = DfVector({"A0": np.array([1.0])})
        o = DfVector({"A1": np.array([1.0])})
        with pytest.raises(CaseError):
            df_accuracy(p, o)
