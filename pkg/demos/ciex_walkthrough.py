"""CI-EX on generated credit data, one iteration at a time.

Draws 3,000 labeled accepts and 6,000 unlabeled rejects whose distribution
is shifted toward risk, runs CI-EX on the training split, lets TOPSIS pick
an iteration on the validation split and scores it on the test split
against the accepts-only benchmark.

    python demos/ciex_walkthrough.py
"""
import numpy as np

from ciex import CiexSpec, SplitSpec, TrainState, auc, auk, run_ciex, select_iteration, synth_credit
from ciex.data import split
from ciex.metrics import inputs_from_models, kickout

accepted, rejected, hidden = synth_credit(3000, 6000, bias=0.5, seed=7)
spec = SplitSpec(fractions=(0.6, 0.2, 0.2), seed=7)
acc_tr, acc_va, acc_te = split(accepted, spec)
rej_tr, rej_va, rej_te = split(rejected, spec)
print(f"train {len(acc_tr)} accepts + {len(rej_tr)} rejects, "
      f"accept bad rate {accepted.labels.mean():.3f}, reject bad rate {hidden.labels.mean():.3f}")

run = run_ciex(
    TrainState.initial(acc_tr, rej_tr),
    CiexSpec(eta=300, bad_fraction=0.07, max_iterations=15, seed=7),
    validation=(acc_va, rej_va),
)

# every iteration moves eta-ish confident, inlying rejects into the labeled pool
truth = dict(zip(hidden.row_ids.tolist(), hidden.labels.tolist()))
print("\niter  +good  +bad  labeled  rejects  val_auc  val_auk  inferred_acc")
for rec, state in zip(run.records, run.states):
    lab = state.labeled
    inferred = lab.provenance != 0
    if inferred.any():
        true = np.array([truth[i] for i in lab.row_ids[inferred]])
        acc_txt = f"{(true == lab.labels[inferred]).mean():.3f}"
    else:
        acc_txt = "-"
    print(f"{rec.iteration:4d}  {rec.added_good:5d}  {rec.added_bad:4d}  {rec.labeled_size:7d}  "
          f"{rec.reject_size:7d}  {rec.val_auc:7.4f}  {rec.val_auk:7.4f}  {acc_txt:>12}")

best = select_iteration(run.records, weights=(1.0, 10.0))
print(f"\nTOPSIS (AUC weight 1, AUK weight 10) picks iteration {best}")

bm, model = run.benchmark, run.models[best]
inputs = inputs_from_models(bm, model, acc_te, rej_te)
print(f"test AUC  benchmark {auc(bm.predict_proba(acc_te.X), acc_te.labels):.4f}  "
      f"CI-EX {auc(model.predict_proba(acc_te.X), acc_te.labels):.4f}")
print(f"test kickout at alpha=0.5 {kickout(inputs, 0.5):+.4f}, AUK {auk(inputs):+.4f}")
