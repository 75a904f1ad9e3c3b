#!/usr/bin/env python3
"""Distribution-factor predictors side by side on recorded history.

Builds a short oracle run, then asks each predictor for the next
interval's factors and scores them against what the members actually did.
With trained weights present, the graph network joins the comparison.
"""

import os

import numpy as np

from derdispatch.harness import (RunConfig, history_from_ledger,
                                 prepare_env, run_rolling, window_from_ledger)
from derdispatch.ledger import LedgerView
from derdispatch.rted import DfVector
from derdispatch.strategies import (df_accuracy, predict_const, predict_knn,
                                    predict_mer, predict_stgcn)

DATA = os.path.join(os.path.dirname(__file__), "..", "src", "derdispatch", "data")
OUT = os.path.join(os.path.dirname(__file__), "out", "factor_prediction")

config = RunConfig(case_path=os.path.join(DATA, "sys24.m"), horizon=96,
                   strategy="oracle", group_size=7,
                   tder_cost_mode="independent", tder_smoothing=0.9,
                   output_dir=OUT)
env = prepare_env(config)
run_rolling(config, env=env)
view = LedgerView.open(os.path.join(OUT, "ledger"), env.case)
case = env.case

model = None
model_path = os.path.join(DATA, "stgcn_sys24.json")
if os.path.exists(model_path):
    from derdispatch.stgcn import load_model
    model = load_model(model_path)

scores = {}
start = 14
for i in range(start, len(view.records)):
    hist = history_from_ledger(view, i, 12)
    stacked = view.realized_df_stacked(i)
    vals, pos = {}, 0
    for a in case.deras:
        vals[a.id] = stacked[pos:pos + len(a.tders)]
        pos += len(a.tders)
    actual = DfVector(vals)
    preds = {
        "const": predict_const(case),
        "mer": predict_mer(case, hist),
        "knn": predict_knn(case, hist, view.loads(i), k=5),
    }
    if model is not None:
        win = window_from_ledger(view, i, model.hyper.window,
                                 model.hyper.tder_slots)
        preds["stgcn"] = predict_stgcn(model, win, case)
    for name, p in preds.items():
        scores.setdefault(name, []).append(df_accuracy(p.dfs, actual))

print(f"factor prediction accuracy over {len(scores['const'])} intervals "
      f"(oracle history, 24-bus scenario):")
for name, vals in sorted(scores.items(), key=lambda kv: -np.mean(kv[1])):
    print(f"  {name:>6}: mean {np.mean(vals):6.2f} %  "
          f"min {np.min(vals):6.2f} %  max {np.max(vals):6.2f} %")
