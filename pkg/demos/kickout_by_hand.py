"""Kickout on a ten-row toy, computed by the library and by hand.

Each model accepts the half of the pooled applicants (accepted plus rejected
test rows) with the lowest predicted default probability.  Kickout rewards
the new model for dropping known bads and punishes it for dropping goods.

    python demos/kickout_by_hand.py
"""
import numpy as np

from ciex.metrics import KickoutInputs, accept_sets, kickout, kickout_details, kickout_formula

labels = np.array([0, 0, 0, 1, 0, 1])
bm = np.array([0.10, 0.20, 0.30, 0.35, 0.60, 0.90])
new = np.array([0.10, 0.20, 0.70, 0.80, 0.30, 0.90])
bm_rej = np.array([0.40, 0.50, 0.95, 0.99])
new_rej = np.array([0.15, 0.50, 0.95, 0.99])

inputs = KickoutInputs(bm, new, new_rej, labels, bm_rejected_scores=bm_rej)
alpha = 0.5
bm_acc, new_acc = (set(ids.tolist()) for ids in accept_sets(inputs, alpha))
print("benchmark accepts rows", sorted(bm_acc))
print("new model accepts rows", sorted(new_acc))

# only the benchmark's accepted rows with known outcomes count (ids 0-5)
known = sorted(i for i in bm_acc if i < len(labels))
kicked = sorted(set(known) - new_acc)
k_bad = int(labels[kicked].sum())
k_good = len(kicked) - k_bad
s_bad = int(labels[known].sum())
p_bad = s_bad / len(known)
print(f"kicked out {kicked}: {k_bad} bad, {k_good} good; benchmark accepted {s_bad} bad")
print(f"by hand  ({k_bad}/{p_bad:.3f} - {k_good}/(1-{p_bad:.3f})) / ({s_bad}/{p_bad:.3f}) "
      f"= {kickout_formula(k_bad, k_good, s_bad, p_bad):+.4f}")
print(f"library  {kickout(inputs, alpha):+.4f}")
print(kickout_details(inputs, alpha))
