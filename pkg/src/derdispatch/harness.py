"""Rolling market simulation: predict factors, clear, self-dispatch, score.

One run marches through the load profile interval by interval.  Each step
predicts distribution factors under the configured strategy, solves the
lazily-constrained clearing problem seeded with the day-ahead crucial set,
issues aggregate instructions, lets every DERA self-dispatch, and then
scores what actually happened: realized flows from realized injections,
violations at the configured penalty price, factor accuracy against the
realized split, and stage timings.  The "oracle" strategy clears the full
member-level model instead and serves as the ideal benchmark.
"""

from __future__ import annotations

import configparser
import logging
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import icci as icci_mod
from . import ledger as ledger_mod
from . import stgcn as stgcn_mod
from .caseio import CaseError, LoadProfile, SystemCase, _at
from .rted import DfVector, relaxed_solver, self_dispatch
from .sensitivity import SensitivitySet, compute_isf, post_contingency_flows, \
    select_vulnerable
from .strategies import DfHistory, DfPrediction, HistoryRecord, df_accuracy, \
    predict_const, predict_knn, predict_mer, predict_stgcn

log = logging.getLogger(__name__)

STRATEGIES = ("const", "mer", "knn", "stgcn", "oracle")
DEFAULT_PENALTY = 5000.0


@dataclass
class RunConfig:
    case_path: str | None = None
    profile_path: str | None = None
    horizon: int = 288
    interval_minutes: float = 5.0
    strategy: str = "const"
    knn_k: int = 5
    stgcn_model: str | None = None
    icci_k: int = 5
    icci_tol: float = 1e-6
    icci_max_iter: int = 50
    penalty_price: float = DEFAULT_PENALTY
    n_vulnerable: int = 5
    day_ahead_hours: int = 24
    use_day_ahead: bool = True
    fraction: float = 0.5
    group_size: int = 10
    threshold: float = 0.0
    base_lmp: float = 30.0
    tder_cost_mode: str = "independent"
    tder_smoothing: float = 0.9
    seed_deras: int = 1
    seed_bids: int = 2
    seed_tder: int = 3
    seed_profile: int = 4
    output_dir: str | None = None
    warmup: int | None = None          # defaults to the model window M

    def __post_init__(self):
        if self.penalty_price < 0:
            raise CaseError("penalty_price must be non-negative")
        if self.strategy not in STRATEGIES:
            raise CaseError(f"unknown strategy {self.strategy!r}")

    @classmethod
    def from_ini(cls, path: str) -> "RunConfig":
        """Scenario file: INI sections [run], [dera], [bids], [icci], [seeds]."""
        cp = configparser.ConfigParser()
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
        kw = {}
        run = cp["run"] if cp.has_section("run") else {}
        for key, cast in (("case_path", str), ("profile_path", str),
                          ("horizon", int), ("interval_minutes", float),
                          ("strategy", str), ("penalty_price", float),
                          ("output_dir", str), ("warmup", int),
                          ("n_vulnerable", int), ("day_ahead_hours", int),
                          ("stgcn_model", str), ("knn_k", int)):
            if key in run:
                kw[key] = cast(run[key])
        if "use_day_ahead" in run:
            kw["use_day_ahead"] = cp.getboolean("run", "use_day_ahead")
        if cp.has_section("dera"):
            d = cp["dera"]
            for key, cast in (("fraction", float), ("group_size", int),
                              ("threshold", float), ("tder_cost_mode", str),
                              ("tder_smoothing", float)):
                if key in d:
                    kw[key] = cast(d[key])
        if cp.has_section("bids") and "base_lmp" in cp["bids"]:
            kw["base_lmp"] = cp.getfloat("bids", "base_lmp")
        if cp.has_section("icci"):
            i = cp["icci"]
            if "k" in i:
                kw["icci_k"] = i.getint("k")
            if "tol" in i:
                kw["icci_tol"] = i.getfloat("tol")
            if "max_iter" in i:
                kw["icci_max_iter"] = i.getint("max_iter")
        if cp.has_section("seeds"):
            s = cp["seeds"]
            for key in ("deras", "bids", "tder", "profile"):
                if key in s:
                    kw[f"seed_{key}"] = s.getint(key)
        return cls(**kw)


@dataclass
class IntervalRecord:
    t: int
    strategy: str
    predicted: DfPrediction | None
    instructions: dict[str, float]
    p_gen: dict[int, float]
    p_tder: dict[str, float]
    realized_df: DfVector
    realized_cost: float
    penalty: float
    violation_mw: float
    accuracy: float
    objective: float
    lmp: np.ndarray
    solve_ms: float
    timings: dict[str, float]
    icci_iterations: int
    icci_added: list
    soft_mode: bool
    active_set: list = field(default_factory=list)


@dataclass
class RunSummary:
    strategy: str
    intervals: int
    mean_cost: float
    total_penalty: float
    total_violation_mw: float
    mean_accuracy: float
    mean_solve_ms: float
    max_solve_ms: float
    mean_icci_iterations: float
    crucial_entries: int
    soft_intervals: int
    day_ahead_entries: int = 0

    def row(self) -> dict:
        return {
            "strategy": self.strategy, "intervals": self.intervals,
            "mean_cost": self.mean_cost, "total_penalty": self.total_penalty,
            "total_violation_mw": self.total_violation_mw,
            "mean_accuracy": self.mean_accuracy,
            "mean_icci_iterations": self.mean_icci_iterations,
            "crucial_entries": self.crucial_entries,
            "soft_intervals": self.soft_intervals,
        }


def synthetic_shape(n_intervals: int, interval_minutes: float = 5.0,
                    seed: int = 0, base: float = 0.78, amplitude: float = 1.0) -> np.ndarray:
    """Double-peaked daily demand shape with weekly drift and AR noise."""
    rng = np.random.default_rng(seed)
    t = np.arange(n_intervals) * interval_minutes
    hour = (t / 60.0) % 24.0
    day = t / 1440.0
    shape = (base
             + amplitude * 0.11 * np.exp(-((hour - 8.5) / 2.2) ** 2)
             + amplitude * 0.15 * np.exp(-((hour - 18.5) / 2.8) ** 2)
             + 0.02 * np.sin(2 * np.pi * day / 7.0))
    noise = np.zeros(n_intervals)
    for i in range(1, n_intervals):
        noise[i] = 0.95 * noise[i - 1] + rng.normal(scale=0.004)
    return np.clip(shape + noise, 0.4, 1.2)


@dataclass
class MarketEnv:
    """Everything the per-interval loop needs, prepared once."""

    case: SystemCase
    sens: SensitivitySet
    profile: LoadProfile
    config: RunConfig
    day_ahead: frozenset = frozenset()
    model: stgcn_mod.StgcnModel | None = None


def prepare_env(config: RunConfig, case: SystemCase | None = None,
                profile: LoadProfile | None = None,
                model: stgcn_mod.StgcnModel | None = None,
                day_ahead: frozenset | None = None) -> MarketEnv:
    """Load inputs, attach DERAs/bids when missing, compute sensitivities."""
    from .caseio import assign_tder_costs, build_deras, generate_bids, load_profile, \
        parse_case

    if case is None:
        if config.case_path is None:
            raise CaseError("no case given")
        with open(config.case_path, encoding="utf-8") as fh:
            case = parse_case(fh.read(), name=os.path.basename(config.case_path))
    if not case.deras:
        case = build_deras(case, config.fraction, config.group_size,
                           config.seed_deras, config.threshold)
    if profile is None:
        if config.profile_path:
            with open(config.profile_path, encoding="utf-8") as fh:
                profile = load_profile(fh.read(), case, config.interval_minutes)
        else:
            shape = synthetic_shape(config.horizon, config.interval_minutes,
                                    config.seed_profile)
            profile = LoadProfile.from_shape(case, shape, config.interval_minutes)
    if config.horizon > profile.horizon:
        raise CaseError(f"horizon {config.horizon} exceeds profile "
                        f"{profile.horizon}")
    needs_bids = any(a.bid_curve is None for a in case.deras) or any(
        not isinstance(g.bid_curve, (list, tuple)) for g in case.generators)
    if needs_bids:
        case = generate_bids(case, config.base_lmp, config.seed_bids,
                             profile=profile, horizon=profile.horizon)
        case = assign_tder_costs(case, config.tder_cost_mode, config.seed_tder,
                                 base_lmp=config.base_lmp, profile=profile,
                                 horizon=profile.horizon,
                                 smoothing=config.tder_smoothing)
    vulnerable = select_vulnerable(case, min(config.n_vulnerable, len(case.lines)))
    sens = compute_isf(case, vulnerable_lines=vulnerable)
    if model is None and config.stgcn_model:
        model = stgcn_mod.load_model(config.stgcn_model)
    if day_ahead is None and config.use_day_ahead:
        hours = min(config.day_ahead_hours,
                    int(profile.horizon * profile.interval_minutes // 60))
        steps = max(1, int(hours * 60 // profile.interval_minutes))
        da_profile = LoadProfile(profile.demand[:steps], profile.interval_minutes)
        day_ahead = icci_mod.day_ahead_baseline(
            case, sens, da_profile, k=config.icci_k, tol=config.icci_tol,
            max_iter=config.icci_max_iter)
        log.info("day-ahead baseline: %d bound refs", len(day_ahead))
    return MarketEnv(case, sens, profile, config, day_ahead or frozenset(), model)


def _predict(env: MarketEnv, strategy: str, history: DfHistory, loads_t,
             prev_gen, t: int) -> DfPrediction | None:
    cfg = env.config
    if strategy == "oracle":
        return None
    window_m = env.model.hyper.window if env.model is not None else 12
    warmup = cfg.warmup if cfg.warmup is not None else window_m
    if strategy == "mer":
        return predict_mer(env.case, history)
    if strategy == "knn":
        if len(history) < max(cfg.knn_k, warmup):
            return predict_const(env.case)
        return predict_knn(env.case, history, loads_t, cfg.knn_k)
    if strategy == "stgcn":
        if env.model is None:
            raise CaseError("stgcn strategy needs a trained model")
        if len(history) < max(window_m, warmup):
            return predict_const(env.case)
        bids_t = {g.id: g.bid_at(t) for g in env.case.generators}
        bids_t.update({a.id: a.bid_at(t) for a in env.case.deras})
        window = stgcn_mod.build_window(
            env.case, history, loads_t, bids_t, prev_gen, window=window_m,
            tder_slots=env.model.hyper.tder_slots)
        return predict_stgcn(env.model, window, env.case)
    return predict_const(env.case)


def _realized_assessment(env: MarketEnv, p_gen, tder_out, loads_t):
    """Realized flows from actual injections and the violation total."""
    case, sens = env.case, env.sens
    idx = case.bus_index
    inj = -np.asarray(loads_t, dtype=float)
    for g in case.generators:
        inj[idx[g.bus_id]] += p_gen[g.id]
    for a in case.deras:
        for e in a.tders:
            inj[idx[e.bus_id]] += tder_out.get(e.id, 0.0)
    pre = sens.isf @ inj
    fmax = np.array([l.flow_max for l in case.lines])
    fmin = np.array([l.flow_min for l in case.lines])
    zeta = icci_mod.violation_metrics(pre, fmin, fmax).sum()
    if sens.vulnerable_lines:
        post = post_contingency_flows(sens, pre)
        zpost = icci_mod.violation_metrics(post, fmin[:, None], fmax[:, None])
        for c, m in enumerate(sens.vulnerable_lines):
            zpost[sens.line_row(m), c] = 0.0
        zeta += zpost.sum()
    return pre, float(zeta)


def run_rolling(config: RunConfig, case: SystemCase | None = None,
                profile: LoadProfile | None = None,
                model: stgcn_mod.StgcnModel | None = None,
                day_ahead: frozenset | None = None,
                env: MarketEnv | None = None,
                keep_records: bool = False):
    """Simulate `config.horizon` intervals; returns (RunSummary, records).

    `records` is empty unless `keep_records` is set (they are always
    persisted to the output directory when one is configured).
    """
    if env is None:
        env = prepare_env(config, case, profile, model, day_ahead)
    cfg = env.config
    strategy = cfg.strategy
    case = env.case
    history = DfHistory(capacity=max(512, (env.model.hyper.window if env.model else 12) + 4))
    prev_gen: dict[int, float] | None = None
    writer = None
    if cfg.output_dir:
        writer = ledger_mod.LedgerWriter(
            os.path.join(cfg.output_dir, "ledger"), case,
            meta_extra={"strategy": strategy,
                        "interval_minutes": env.profile.interval_minutes,
                        "penalty_price": cfg.penalty_price,
                        "horizon": cfg.horizon})
    records: list[IntervalRecord] = []
    sums = {"cost": 0.0, "penalty": 0.0, "viol": 0.0, "acc": 0.0, "ms": 0.0,
            "iters": 0, "soft": 0}
    max_ms = 0.0
    crucial_all: set = set()

    try:
        for t in range(cfg.horizon):
            rec = _run_interval(env, strategy, history, prev_gen, t)
            if keep_records:
                records.append(rec)
            if writer is not None:
                # prev_gen is still the dispatch the interval ramped from
                writer.append(_record_json(env, rec, prev_gen))
            prev_gen = rec.p_gen
            sums["cost"] += rec.realized_cost
            sums["penalty"] += rec.penalty
            sums["viol"] += rec.violation_mw
            sums["acc"] += rec.accuracy
            sums["ms"] += rec.solve_ms
            sums["iters"] += rec.icci_iterations
            sums["soft"] += 1 if rec.soft_mode else 0
            max_ms = max(max_ms, rec.solve_ms)
            crucial_all.update((r.line_id, r.outage_id) for r in rec.icci_added)
    finally:
        if writer is not None:
            writer.close()

    n = max(cfg.horizon, 1)
    summary = RunSummary(
        strategy=strategy, intervals=cfg.horizon,
        mean_cost=sums["cost"] / n, total_penalty=sums["penalty"],
        total_violation_mw=sums["viol"], mean_accuracy=sums["acc"] / n,
        mean_solve_ms=sums["ms"] / n, max_solve_ms=max_ms,
        mean_icci_iterations=sums["iters"] / n,
        crucial_entries=len(crucial_all | {(r.line_id, r.outage_id)
                                           for r in env.day_ahead}),
        soft_intervals=sums["soft"],
        day_ahead_entries=len({(r.line_id, r.outage_id) for r in env.day_ahead}),
    )
    if cfg.output_dir:
        _write_summary(os.path.join(cfg.output_dir, "summary.txt"), summary)
    return summary, records


def _run_interval(env: MarketEnv, strategy: str, history: DfHistory,
                  prev_gen, t: int) -> IntervalRecord:
    cfg = env.config
    case = env.case
    loads_t = env.profile.at(t)

    t0 = time.perf_counter()
    predicted = _predict(env, strategy, history, loads_t, prev_gen, t)
    predict_ms = (time.perf_counter() - t0) * 1e3

    full = strategy == "oracle"
    dfs = predicted.dfs if predicted is not None else None
    soft = False
    solver = relaxed_solver(case, env.sens, dfs, loads_t, prev_gen, full=full, t=t)
    t0 = time.perf_counter()
    try:
        result = icci_mod.icci_loop(solver, case, env.sens, initial=env.day_ahead,
                                    k=cfg.icci_k, tol=cfg.icci_tol,
                                    max_iter=cfg.icci_max_iter)
    except icci_mod.IcciError:
        soft = True
        solver = relaxed_solver(case, env.sens, dfs, loads_t, prev_gen, full=full,
                                t=t, soft_penalty=cfg.penalty_price)
        result = icci_mod.icci_loop(solver, case, env.sens, initial=env.day_ahead,
                                    k=cfg.icci_k, tol=cfg.icci_tol,
                                    max_iter=cfg.icci_max_iter)
    rted_ms = (time.perf_counter() - t0) * 1e3
    sol = result.solution

    t0 = time.perf_counter()
    instructions = {}
    tder_out: dict[str, float] = {}
    sd_cost = 0.0
    if full:
        tder_out = dict(sol.p_tder)
        instructions = dict(sol.p_dera)
    else:
        for a in case.deras:
            raw = sol.p_dera[a.id]
            instr = min(max(raw, a.p_min_at(t)), a.p_max_at(t))
            instructions[a.id] = instr
            res = self_dispatch(a, instr, t)
            tder_out.update(res.p_tder)
            sd_cost += res.cost
    selfdispatch_ms = (time.perf_counter() - t0) * 1e3

    realized_df = DfVector.from_outputs(case, tder_out)
    _, zeta = _realized_assessment(env, sol.p_gen, tder_out, loads_t)
    penalty = cfg.penalty_price * zeta
    gen_cost = sum(g.bid_at(t).cost(sol.p_gen[g.id]) for g in case.generators)
    dera_cost = sum(a.bid_at(t).cost(instructions[a.id]) for a in case.deras)
    realized_cost = gen_cost + dera_cost + penalty
    accuracy = 100.0 if predicted is None else df_accuracy(predicted.dfs, realized_df)

    history.append(HistoryRecord(realized_df, np.asarray(loads_t, dtype=float),
                                 instructions, tder_out))
    return IntervalRecord(
        t=t, strategy=strategy, predicted=predicted, instructions=instructions,
        p_gen=sol.p_gen, p_tder=tder_out, realized_df=realized_df,
        realized_cost=realized_cost, penalty=penalty, violation_mw=zeta,
        accuracy=accuracy, objective=sol.cost_total, lmp=sol.lmp,
        solve_ms=rted_ms,
        timings={"predict_ms": predict_ms, "rted_ms": rted_ms,
                 "self_dispatch_ms": selfdispatch_ms},
        icci_iterations=result.iterations, icci_added=result.added,
        soft_mode=soft or sol.soft_overflow_mw > 0,
        active_set=sol.active_set,
    )


def _record_json(env: MarketEnv, rec: IntervalRecord, prev_gen) -> dict:
    case = env.case
    t = rec.t
    dera_cost = sum(a.bid_at(t).cost(rec.instructions[a.id]) for a in case.deras)
    stacked_pred = (rec.predicted.dfs.stacked(case).tolist()
                    if rec.predicted is not None else None)
    if prev_gen is None:
        prev_list = [g.p_prev for g in case.generators]
    else:
        prev_list = [prev_gen[g.id] for g in case.generators]
    return {
        "t": t,
        "strategy": rec.strategy,
        "loads": np.asarray(env.profile.at(t), dtype=float).tolist(),
        "p_gen": [rec.p_gen[g.id] for g in case.generators],
        "prev_gen": prev_list,
        "instructions": [rec.instructions[a.id] for a in case.deras],
        "p_tder": [rec.p_tder.get(e.id, 0.0) for e in case.all_tders()],
        "realized_df": rec.realized_df.stacked(case).tolist(),
        "predicted_df": stacked_pred,
        "gen_bids": [ledger_mod.curve_to_rows(g.bid_at(t)) for g in case.generators],
        "dera_bids": [ledger_mod.curve_to_rows(a.bid_at(t)) for a in case.deras],
        "lmp": np.asarray(rec.lmp, dtype=float).round(6).tolist(),
        "objective": rec.objective,
        "realized_cost": rec.realized_cost,
        "penalty": rec.penalty,
        "violation_mw": rec.violation_mw,
        "dera_cost": dera_cost,
        "df_accuracy": rec.accuracy,
        "solve_ms": rec.solve_ms,
        "timings": rec.timings,
        "icci_iterations": rec.icci_iterations,
        "icci_added": [r.row_name() for r in rec.icci_added],
        # dispatch-relevant binding rows; epigraph rows bind by construction
        "active_set": [n for n in rec.active_set
                       if n.startswith(("pre_", "post_", "balance", "ramp_"))],
        "soft_mode": rec.soft_mode,
    }


def realized_cost(records: list[IntervalRecord]) -> float:
    """Total realized cost over completed intervals."""
    return float(sum(r.realized_cost for r in records))


def _write_summary(path: str, summary: RunSummary) -> None:
    lines = [
        f"strategy            {summary.strategy}",
        f"intervals           {summary.intervals}",
        f"mean realized cost  {summary.mean_cost:.2f} $/interval",
        f"total penalty       {summary.total_penalty:.2f} $",
        f"total violation     {summary.total_violation_mw:.4f} MW",
        f"mean df accuracy    {summary.mean_accuracy:.3f} %",
        f"mean solve time     {summary.mean_solve_ms:.2f} ms",
        f"max solve time      {summary.max_solve_ms:.2f} ms",
        f"mean icci iters     {summary.mean_icci_iterations:.3f}",
        f"crucial entries     {summary.crucial_entries}",
        f"day-ahead entries   {summary.day_ahead_entries}",
        f"soft intervals      {summary.soft_intervals}",
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def compare_strategies(config: RunConfig, strategies,
                       case: SystemCase | None = None,
                       profile: LoadProfile | None = None,
                       model: stgcn_mod.StgcnModel | None = None):
    """Run every strategy on identical inputs; emit the comparison report.

    Returns (summaries, report_text).  The report holds only deterministic
    fields; timing statistics live in each run's summary.txt because wall
    clocks do not reproduce byte-for-byte.
    """
    if len(strategies) < 2:
        raise CaseError("compare needs at least two strategies")
    base_env = prepare_env(replace(config, strategy=strategies[0]), case,
                           profile, model)
    summaries = []
    records_by_strategy: dict[str, list[IntervalRecord]] = {}
    for s in strategies:
        if s not in STRATEGIES:
            raise CaseError(f"unknown strategy {s!r}")
        cfg = replace(config, strategy=s,
                      output_dir=os.path.join(config.output_dir, s)
                      if config.output_dir else None)
        env = MarketEnv(base_env.case, base_env.sens, base_env.profile, cfg,
                        base_env.day_ahead, base_env.model)
        summary, recs = run_rolling(cfg, env=env, keep_records=True)
        summaries.append(summary)
        records_by_strategy[s] = recs

    header = ("strategy,intervals,mean_cost,total_penalty,total_violation_mw,"
              "mean_accuracy,mean_icci_iterations,crucial_entries,soft_intervals")
    rows = [header]
    for s in summaries:
        r = s.row()
        rows.append(
            f"{r['strategy']},{r['intervals']},{r['mean_cost']:.6f},"
            f"{r['total_penalty']:.6f},{r['total_violation_mw']:.9f},"
            f"{r['mean_accuracy']:.6f},{r['mean_icci_iterations']:.4f},"
            f"{r['crucial_entries']},{r['soft_intervals']}")
    report = "\n".join(rows) + "\n"
    if config.output_dir:
        os.makedirs(config.output_dir, exist_ok=True)
        with open(os.path.join(config.output_dir, "comparison.csv"), "w",
                  encoding="utf-8") as fh:
            fh.write(report)
        write_intervals_csv(os.path.join(config.output_dir, "intervals.csv"),
                            records_by_strategy)
    return summaries, report


def history_from_ledger(view: ledger_mod.LedgerView, upto: int,
                        depth: int) -> DfHistory:
    """Rebuild the predictor history from records [upto-depth, upto)."""
    case = view.case
    start = upto - depth
    if start < 0:
        raise CaseError(f"ledger too short: need {depth} records before {upto}")
    hist = DfHistory(capacity=max(depth, 1))
    for i in range(start, upto):
        stacked = view.realized_df_stacked(i)
        vals = {}
        pos = 0
        for a in case.deras:
            vals[a.id] = stacked[pos:pos + len(a.tders)]
            pos += len(a.tders)
        instructions = dict(zip((a.id for a in case.deras),
                                view.records[i]["instructions"]))
        hist.append(HistoryRecord(DfVector(vals), view.loads(i), instructions,
                                  view.tder_output(i)))
    return hist


def window_from_ledger(view: ledger_mod.LedgerView, i: int, window: int,
                       tder_slots: int) -> stgcn_mod.GraphSampleWindow:
    """The graph window a live run would have built before interval i."""
    hist = history_from_ledger(view, i, window)
    return stgcn_mod.build_window(view.case, hist, view.loads(i),
                                  view.bids_at(i), view.prev_gen(i),
                                  window=window, tder_slots=tder_slots)


def evaluate_model_on_ledger(view: ledger_mod.LedgerView,
                             model: stgcn_mod.StgcnModel) -> list[tuple[int, float]]:
    """Replay stored intervals through the model; returns (t, accuracy) pairs."""
    case = view.case
    m = model.hyper.window
    out = []
    for i in range(m, len(view.records)):
        win = window_from_ledger(view, i, m, model.hyper.tder_slots)
        pred = predict_stgcn(model, win, case)
        stacked = view.realized_df_stacked(i)
        vals = {}
        pos = 0
        for a in case.deras:
            vals[a.id] = stacked[pos:pos + len(a.tders)]
            pos += len(a.tders)
        acc = df_accuracy(pred.dfs, DfVector(vals))
        out.append((view.records[i]["t"], acc))
    return out


def write_intervals_csv(path: str, records_by_strategy: dict[str, list[IntervalRecord]]):
    """interval,strategy,cost,penalty,accuracy,solve_ms,icci_iters rows."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("interval,strategy,cost,penalty,accuracy,solve_ms,icci_iters\n")
        for strategy, records in records_by_strategy.items():
            for r in records:
                fh.write(f"{r.t},{strategy},{r.realized_cost:.6f},"
                         f"{r.penalty:.6f},{r.accuracy:.6f},"
                         f"{r.solve_ms:.3f},{r.icci_iterations}\n")
