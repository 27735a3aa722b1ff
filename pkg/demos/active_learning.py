"""
Choosing where to label: epistemic versus overall uncertainty
=============================================================

Start from 30 labeled SYNTH-1D points and acquire 50 more, one at a time.
The ``var_y`` rule queries the point with the largest overall predictive
variance, which includes the noise.  The ``var_f`` rule uses only the
variance of the latent function.  On heteroscedastic data the first rule keeps
returning to the noisiest region, where a new label says little about f.

Run with ``python demos/active_learning.py [epochs]``.
"""

import sys

import numpy as np

from nsgp.active import AlConfig, run_both
from nsgp.data import gen_synth1d

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
d = gen_synth1d(seed=0)
traces = run_both(d, AlConfig(initial_n=30, acquisitions=50, epochs=epochs, seed=0))

print(f"initial MAE against the true f: {traces['var_f'].initial_mae:.4f}")
print(f"{'step':>5}{'MAE var_f':>12}{'MAE var_y':>12}")
for k in (0, 4, 9, 19, 29, 39, 49):
    print(f"{k + 1:5d}{traces['var_f'].mae[k]:12.4f}{traces['var_y'].mae[k]:12.4f}")

# the noisiest quarter of the grid, by the generating noise level
noisy = d.truth["omega"] >= np.quantile(d.truth["omega"], 0.75)
for kind, t in traces.items():
    hits = int(noisy[t.chosen].sum())
    print(f"{kind}: area under the MAE curve {t.mae_auc():.3f}; "
          f"queries in the noisiest quarter: {hits}/{len(t)}")

# A share well above one quarter means the rule is being drawn towards
# aleatoric noise rather than towards gaps in its knowledge of f.
