"""Dual-graph network for distribution-factor prediction (inference only).

Two graph encodings share the transmission adjacency: a temporal window of
load / previous T-DER-output node features, and a single-interval snapshot
of generator and aggregator bid features with line attributes on the
edges.  The temporal branch runs two gated-convolution blocks with a graph
convolution in the middle of each; the snapshot branch runs two
edge-conditioned convolutions; a Chebyshev feature-aggregation stage fuses
the per-bus embeddings and a linear head emits one score per T-DER slot.

Weights load from a manifest + binary payload (float32 on disk, float64
in compute); training lives in the companion trainer package, which
writes the same format.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .caseio import BidCurve, CaseError, SystemCase, _at

WEIGHT_FORMAT_VERSION = 1
BID_FEATURE_SEGMENTS = 5
GEN_FEATURE_WIDTH = 4 * BID_FEATURE_SEGMENTS + 5  # gen bids, dera bids, 5 scalars
EDGE_FEATURE_WIDTH = 4                             # fmax, fmin, reactance, susceptance


class ShapeError(CaseError):
    """Tensor shape inconsistent with the model or the case."""


@dataclass
class Hyper:
    """Architecture hyperparameters; widths are artifact conventions."""

    window: int = 12              # M intervals
    temporal_kernel: int = 3      # K
    st_channels: tuple = (64, 16, 64)
    st_embed: int = 64
    ec_channels: tuple = (32, 32)
    ec_hidden: int = 32           # edge-network hidden width
    ec_embed: int = 32
    cheb_k: int = 2
    fa_channels: int = 64
    tder_slots: int = 1           # max T-DERs per bus in the target case

    def to_dict(self):
        return {
            "window": self.window, "temporal_kernel": self.temporal_kernel,
            "st_channels": list(self.st_channels), "st_embed": self.st_embed,
            "ec_channels": list(self.ec_channels), "ec_hidden": self.ec_hidden,
            "ec_embed": self.ec_embed, "cheb_k": self.cheb_k,
            "fa_channels": self.fa_channels, "tder_slots": self.tder_slots,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(window=d["window"], temporal_kernel=d["temporal_kernel"],
                   st_channels=tuple(d["st_channels"]), st_embed=d["st_embed"],
                   ec_channels=tuple(d["ec_channels"]), ec_hidden=d["ec_hidden"],
                   ec_embed=d["ec_embed"], cheb_k=d["cheb_k"],
                   fa_channels=d["fa_channels"], tder_slots=d["tder_slots"])


@dataclass
class GraphSampleWindow:
    """Raw (unstandardized) input tensors for one prediction instance."""

    load_der: np.ndarray        # [M, N, 1 + slots]
    adjacency: np.ndarray       # [N, N] 0/1 symmetric
    gen_feat: np.ndarray        # [N, GEN_FEATURE_WIDTH]
    edge_index: np.ndarray      # [E, 2] bus indices
    edge_attr: np.ndarray       # [E, EDGE_FEATURE_WIDTH]
    tder_slots: list            # (bus_index, slot) per T-DER, case order

    def __post_init__(self):
        for name in ("load_der", "adjacency", "gen_feat", "edge_attr"):
            arr = getattr(self, name)
            if not np.isfinite(arr).all():
                raise ShapeError(f"non-finite values in {name}")
        if self.adjacency.shape[0] != self.adjacency.shape[1]:
            raise ShapeError("adjacency must be square")
        if not np.array_equal(self.adjacency, self.adjacency.T):
            raise ShapeError("adjacency must be symmetric")


@dataclass
class StgcnModel:
    """Named weight tensors plus hyperparameters and feature statistics."""

    hyper: Hyper
    tensors: dict[str, np.ndarray]
    stats: dict[str, np.ndarray] = field(default_factory=dict)
    version: int = WEIGHT_FORMAT_VERSION

    def tensor(self, name: str) -> np.ndarray:
        try:
            return self.tensors[name]
        except KeyError:
            raise ShapeError(f"model lacks tensor {name!r}") from None


def expected_tensor_shapes(h: Hyper, load_feat: int) -> dict[str, tuple]:
    """The full named-tensor layout for a given hyperparameter set."""
    c1, c2, c3 = h.st_channels
    k = h.temporal_kernel
    shapes: dict[str, tuple] = {}
    widths = [(load_feat, c1), (c2, c3), (c3, c1), (c2, c3)]
    gcn_in = [(c1, c2), (c1, c2)]
    for b in (1, 2):
        win, wout = widths[2 * (b - 1)]
        shapes[f"st{b}.t1.W"] = (k, win, wout)
        shapes[f"st{b}.t1.V"] = (k, win, wout)
        shapes[f"st{b}.t1.bw"] = (wout,)
        shapes[f"st{b}.t1.bv"] = (wout,)
        shapes[f"st{b}.gcn.W"] = gcn_in[b - 1]
        win2, wout2 = widths[2 * (b - 1) + 1]
        shapes[f"st{b}.t2.W"] = (k, win2, wout2)
        shapes[f"st{b}.t2.V"] = (k, win2, wout2)
        shapes[f"st{b}.t2.bw"] = (wout2,)
        shapes[f"st{b}.t2.bv"] = (wout2,)
    t_rem = h.window - 4 * (k - 1)
    if t_rem < 1:
        raise ShapeError(f"window {h.window} too short for kernel {k}")
    shapes["st.fc.W"] = (t_rem * c3, h.st_embed)
    shapes["st.fc.b"] = (h.st_embed,)
    e1, e2 = h.ec_channels
    shapes["ec1.W"] = (GEN_FEATURE_WIDTH, e1)
    shapes["ec1.mlp.W1"] = (EDGE_FEATURE_WIDTH, h.ec_hidden)
    shapes["ec1.mlp.b1"] = (h.ec_hidden,)
    shapes["ec1.mlp.W2"] = (h.ec_hidden, GEN_FEATURE_WIDTH * e1)
    shapes["ec1.mlp.b2"] = (GEN_FEATURE_WIDTH * e1,)
    shapes["ec2.W"] = (e1, e2)
    shapes["ec2.mlp.W1"] = (EDGE_FEATURE_WIDTH, h.ec_hidden)
    shapes["ec2.mlp.b1"] = (h.ec_hidden,)
    shapes["ec2.mlp.W2"] = (h.ec_hidden, e1 * e2)
    shapes["ec2.mlp.b2"] = (e1 * e2,)
    shapes["ec.fc.W"] = (e2, h.ec_embed)
    shapes["ec.fc.b"] = (h.ec_embed,)
    fused = h.st_embed + h.ec_embed
    for kk in range(h.cheb_k):
        shapes[f"fa.cheb.W{kk + 1}"] = (fused, h.fa_channels)
    shapes["fa.fc.W"] = (h.fa_channels, h.tder_slots)
    shapes["fa.fc.b"] = (h.tder_slots,)
    return shapes


def validate_model(model: StgcnModel, load_feat: int) -> None:
    expected = expected_tensor_shapes(model.hyper, load_feat)
    for name, shape in expected.items():
        got = model.tensor(name).shape
        if tuple(got) != shape:
            raise ShapeError(f"tensor {name}: expected {shape}, got {tuple(got)}")


# ---------------------------------------------------------------------------
# layers


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def temporal_gated_conv(H: np.ndarray, W: np.ndarray, V: np.ndarray,
                        K: int | None = None, bw: np.ndarray | None = None,
                        bv: np.ndarray | None = None) -> np.ndarray:
    """Gated 1-D convolution along time: (H * W) ⊙ sigmoid(H * V).

    H is [T, N, C]; kernels are [K, C, C']; output is [T-K+1, N, C'].
    Frame t of the output sees input frames t .. t+K-1 only.
    """
    K = W.shape[0] if K is None else K
    T, N, C = H.shape
    if T < K:
        raise ShapeError(f"window length {T} shorter than kernel {K}")
    if W.shape != V.shape or W.shape[1] != C:
        raise ShapeError(f"kernel shape {W.shape} does not fit input {H.shape}")
    t_out = T - K + 1
    lin = np.zeros((t_out, N, W.shape[2]))
    gate = np.zeros((t_out, N, W.shape[2]))
    for k in range(K):
        seg = H[k:k + t_out]
        lin += np.tensordot(seg, W[k], axes=([2], [0]))
        gate += np.tensordot(seg, V[k], axes=([2], [0]))
    if bw is not None:
        lin += bw
    if bv is not None:
        gate += bv
    return lin * _sigmoid(gate)


def normalized_adjacency(A: np.ndarray) -> np.ndarray:
    """D^{-1/2} (A + I) D^{-1/2} with D the self-looped degree matrix."""
    Ah = A + np.eye(A.shape[0])
    dinv = 1.0 / np.sqrt(Ah.sum(axis=1))
    return dinv[:, None] * Ah * dinv[None, :]


def gcn_layer(H: np.ndarray, A: np.ndarray, W: np.ndarray) -> np.ndarray:
    """First-order graph convolution over a 0/1 symmetric adjacency."""
    if H.shape[-1] != W.shape[0]:
        raise ShapeError(f"gcn weight {W.shape} does not fit features {H.shape}")
    return normalized_adjacency(A) @ H @ W


@dataclass(frozen=True)
class EdgeMlp:
    """Affine -> ReLU -> affine map from edge attributes to a mixing matrix."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def __call__(self, attr: np.ndarray, c_in: int, c_out: int) -> np.ndarray:
        if attr.shape[-1] != self.W1.shape[0]:
            raise ShapeError(
                f"edge attribute width {attr.shape[-1]} != {self.W1.shape[0]}")
        hidden = np.maximum(attr @ self.W1 + self.b1, 0.0)
        theta = hidden @ self.W2 + self.b2
        return theta.reshape(*attr.shape[:-1], c_in, c_out)


def ec_conv_layer(H: np.ndarray, edge_index: np.ndarray, edge_attr: np.ndarray,
                  W: np.ndarray, h_theta: EdgeMlp) -> np.ndarray:
    """Edge-conditioned convolution, undirected edges applied both ways."""
    N, C = H.shape
    c_out = W.shape[1]
    out = H @ W
    if len(edge_index):
        theta = h_theta(edge_attr, C, c_out)  # [E, C, C']
        for (i, j), th in zip(edge_index, theta):
            out[i] += H[j] @ th
            out[j] += H[i] @ th
    return out


def scaled_laplacian(A: np.ndarray) -> np.ndarray:
    """2 L_norm / lambda_max - I with lambda_max fixed at its upper bound 2."""
    deg = A.sum(axis=1)
    with np.errstate(divide="ignore"):
        dinv = np.where(deg > 0, 1.0 / np.sqrt(np.maximum(deg, 1e-300)), 0.0)
    l_norm = np.eye(A.shape[0]) - dinv[:, None] * A * dinv[None, :]
    return l_norm - np.eye(A.shape[0])


def chebyshev_layer(H: np.ndarray, A: np.ndarray, *weights: np.ndarray) -> np.ndarray:
    """Chebyshev filter: sum_k Z_k W_k with the standard recurrence."""
    lhat = scaled_laplacian(A)
    z_prev, z = H, lhat @ H
    out = z_prev @ weights[0]
    if len(weights) > 1:
        out += z @ weights[1]
    for wk in weights[2:]:
        z_prev, z = z, 2.0 * (lhat @ z) - z_prev
        out += z @ wk
    return out


# ---------------------------------------------------------------------------
# window construction


def _unit_bid_features(curve: BidCurve | None) -> np.ndarray:
    """(kappa, beta) pairs zero-padded to the fixed five-segment width."""
    out = np.zeros(2 * BID_FEATURE_SEGMENTS)
    if curve is None:
        return out
    for i, s in enumerate(curve.segments[:BID_FEATURE_SEGMENTS]):
        out[2 * i] = s.kappa
        out[2 * i + 1] = s.beta
    return out


def tder_slot_map(case: SystemCase) -> list[tuple[int, int]]:
    """(bus_index, slot) per T-DER in case order; slots count up per bus."""
    idx = case.bus_index
    used: dict[int, int] = {}
    slots = []
    for a in case.deras:
        for e in a.tders:
            b = idx[e.bus_id]
            slots.append((b, used.get(b, 0)))
            used[b] = used.get(b, 0) + 1
    return slots


def case_adjacency(case: SystemCase) -> np.ndarray:
    idx = case.bus_index
    A = np.zeros((case.n_buses, case.n_buses))
    for l in case.lines:
        i, j = idx[l.from_bus], idx[l.to_bus]
        if i != j:
            A[i, j] = A[j, i] = 1.0
    return A


def build_window(case: SystemCase, history, loads_t: np.ndarray, bids_t,
                 prev_gen: dict[int, float] | None, window: int | None = None,
                 tder_slots: int | None = None) -> GraphSampleWindow:
    """Assemble the raw dual-graph tensors for the target interval.

    `history` is the chronological record of the last M (or more)
    intervals, each with `.loads` (bus vector) and `.tder_output` (a
    mapping T-DER id -> MW); `bids_t` maps unit ids (generator int ids and
    DERA string ids) to the bid curves in force for the target interval.
    The newest frame pairs the target interval's demand with the last
    recorded T-DER outputs, per the one-step reporting lag.
    """
    M = window if window is not None else 12
    if len(history) < M:
        raise ShapeError(f"need {M} history records, have {len(history)}")
    recent = list(history)[-M:]
    slots = tder_slot_map(case)
    n_slots = tder_slots if tder_slots is not None else max(
        (s + 1 for _, s in slots), default=1)
    if any(s >= n_slots for _, s in slots):
        raise ShapeError("more T-DERs per bus than the configured slot width")
    N = case.n_buses
    tders = case.all_tders()

    load_der = np.zeros((M, N, 1 + n_slots))
    frame_loads = [r.loads for r in recent[1:]] + [np.asarray(loads_t, dtype=float)]
    for f in range(M):
        load_der[f, :, 0] = frame_loads[f]
        outputs = recent[f].tder_output
        for e, (b, s) in zip(tders, slots):
            load_der[f, b, 1 + s] = float(outputs.get(e.id, 0.0))

    gen_feat = np.zeros((N, GEN_FEATURE_WIDTH))
    idx = case.bus_index
    for g in case.generators:
        b = idx[g.bus_id]
        gen_feat[b, 0:10] += _unit_bid_features(bids_t.get(g.id))
        prev = prev_gen.get(g.id, g.p_prev) if prev_gen is not None else g.p_prev
        gen_feat[b, 20:25] += np.array([
            g.ramp_down, g.ramp_up, g.p_max_at(0), g.p_min_at(0), prev])
    for a in case.deras:
        feats = _unit_bid_features(bids_t.get(a.id))
        for bus in {idx[e.bus_id] for e in a.tders}:
            gen_feat[bus, 10:20] = feats  # duplicated across the DERA's buses

    edge_index = np.array(
        [[idx[l.from_bus], idx[l.to_bus]] for l in case.lines], dtype=int)
    edge_attr = np.array(
        [[l.flow_max, l.flow_min, l.reactance_pu, l.susceptance_pu]
         for l in case.lines])
    return GraphSampleWindow(load_der, case_adjacency(case), gen_feat,
                             edge_index, edge_attr, slots)


# ---------------------------------------------------------------------------
# forward pass


def _standardize(x: np.ndarray, stats: dict, key: str) -> np.ndarray:
    mean = stats.get(f"{key}.mean")
    std = stats.get(f"{key}.std")
    if mean is None or std is None:
        return x
    return (x - mean) / np.where(std > 0, std, 1.0)


def forward(model: StgcnModel, window: GraphSampleWindow) -> np.ndarray:
    """Raw per-T-DER scores for one window (pure, float64)."""
    h = model.hyper
    validate_model(model, window.load_der.shape[2])
    if window.load_der.shape[0] != h.window:
        raise ShapeError(
            f"window has {window.load_der.shape[0]} frames, model wants {h.window}")
    tns = model.tensor
    A = window.adjacency

    x = _standardize(window.load_der, model.stats, "load_der")
    for b in (1, 2):
        x = temporal_gated_conv(x, tns(f"st{b}.t1.W"), tns(f"st{b}.t1.V"),
                                bw=tns(f"st{b}.t1.bw"), bv=tns(f"st{b}.t1.bv"))
        x = np.stack([np.maximum(gcn_layer(x[t], A, tns(f"st{b}.gcn.W")), 0.0)
                      for t in range(x.shape[0])])
        x = temporal_gated_conv(x, tns(f"st{b}.t2.W"), tns(f"st{b}.t2.V"),
                                bw=tns(f"st{b}.t2.bw"), bv=tns(f"st{b}.t2.bv"))
    # [T_rem, N, C] -> per-node flattened time-channel vector
    t_rem, n_nodes, c = x.shape
    x = np.transpose(x, (1, 0, 2)).reshape(n_nodes, t_rem * c)
    st_embed = np.maximum(x @ tns("st.fc.W") + tns("st.fc.b"), 0.0)

    y = _standardize(window.gen_feat, model.stats, "gen")
    attr = _standardize(window.edge_attr, model.stats, "edge")
    mlp1 = EdgeMlp(tns("ec1.mlp.W1"), tns("ec1.mlp.b1"),
                   tns("ec1.mlp.W2"), tns("ec1.mlp.b2"))
    y = np.maximum(ec_conv_layer(y, window.edge_index, attr, tns("ec1.W"), mlp1), 0.0)
    mlp2 = EdgeMlp(tns("ec2.mlp.W1"), tns("ec2.mlp.b1"),
                   tns("ec2.mlp.W2"), tns("ec2.mlp.b2"))
    y = np.maximum(ec_conv_layer(y, window.edge_index, attr, tns("ec2.W"), mlp2), 0.0)
    ec_embed = np.maximum(y @ tns("ec.fc.W") + tns("ec.fc.b"), 0.0)

    fused = np.concatenate([st_embed, ec_embed], axis=1)
    cheb_w = [tns(f"fa.cheb.W{k + 1}") for k in range(model.hyper.cheb_k)]
    z = np.maximum(chebyshev_layer(fused, A, *cheb_w), 0.0)
    scores = z @ tns("fa.fc.W") + tns("fa.fc.b")  # [N, slots]
    return np.array([scores[b, s] for b, s in window.tder_slots])


def eval_loss(pred: np.ndarray, target: np.ndarray, dera_cost: float,
              lam: float) -> float:
    """Cost-weighted squared error of one instance: exp(lam*C) * ||r||^2."""
    if lam < 0:
        raise CaseError("lambda must be non-negative")
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ShapeError(f"pred {pred.shape} vs target {target.shape}")
    r = pred - target
    return float(math.exp(lam * dera_cost) * (r @ r))


# ---------------------------------------------------------------------------
# weight files


def save_model(model: StgcnModel, manifest_path: str) -> None:
    """Write manifest JSON plus a little-endian float32 row-major payload."""
    payload_path = os.path.splitext(manifest_path)[0] + ".bin"
    entries = []
    blob = bytearray()
    for name in sorted(model.tensors):
        arr = np.ascontiguousarray(model.tensors[name], dtype="<f4")
        raw = arr.tobytes()
        entries.append({
            "name": name,
            "shape": list(arr.shape),
            "dtype": "f32",
            "offset": len(blob),
            "sha256": hashlib.sha256(raw).hexdigest(),
        })
        blob.extend(raw)
    manifest = {
        "version": model.version,
        "payload": os.path.basename(payload_path),
        "hyper": model.hyper.to_dict(),
        "stats": {k: np.asarray(v, dtype=float).tolist() for k, v in model.stats.items()},
        "tensors": entries,
    }
    with open(payload_path, "wb") as fh:
        fh.write(bytes(blob))
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")


def load_model(manifest_path: str) -> StgcnModel:
    """Read a manifest + payload pair; checksums and version are enforced."""
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    version = manifest.get("version")
    if version != WEIGHT_FORMAT_VERSION:
        raise CaseError(f"unknown weight format version {version!r}")
    payload_path = os.path.join(os.path.dirname(manifest_path) or ".",
                                manifest["payload"])
    with open(payload_path, "rb") as fh:
        blob = fh.read()
    tensors = {}
    for e in manifest["tensors"]:
        if e["dtype"] != "f32":
            raise CaseError(f"tensor {e['name']}: unsupported dtype {e['dtype']}")
        count = int(np.prod(e["shape"])) if e["shape"] else 1
        raw = blob[e["offset"]:e["offset"] + 4 * count]
        if hashlib.sha256(raw).hexdigest() != e["sha256"]:
            raise CaseError(f"checksum mismatch for tensor {e['name']}")
        arr = np.frombuffer(raw, dtype="<f4").reshape(e["shape"]).astype(float)
        tensors[e["name"]] = arr
    stats = {k: np.asarray(v, dtype=float) for k, v in manifest.get("stats", {}).items()}
    return StgcnModel(Hyper.from_dict(manifest["hyper"]), tensors, stats,
                      version=version)


def init_model(hyper: Hyper, load_feat: int, seed: int = 0,
               scale: float = 0.2) -> StgcnModel:
    """Randomly initialized model (useful for tests and as a trainer seed)."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in expected_tensor_shapes(hyper, load_feat).items():
        if name.endswith((".b", ".b1", ".b2", ".bw", ".bv")):
            tensors[name] = np.zeros(shape)
        else:
            fan_in = shape[0] if len(shape) == 1 else int(np.prod(shape[:-1]))
            tensors[name] = rng.normal(scale=scale / math.sqrt(max(fan_in, 1)),
                                       size=shape)
    return StgcnModel(hyper, tensors)
