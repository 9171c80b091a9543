"""The small encoder and its analytic gradients.

Forward produces tapped middle features plus a unit-norm embedding; backward
returns exact parameter gradients, which we verify here against central
finite differences for every loss term, composed through the encoder.
"""

import numpy as np

from ike_lab import IdentityMemory, forward, grad_check, init_encoder
from ike_lab.harness import GRAD_TERMS, make_loss_closure
from ike_lab.trainer import Hyperparams

rng = np.random.default_rng(7)


def unit_rows(n, d):
    M = rng.normal(size=(n, d))
    return M / np.linalg.norm(M, axis=1, keepdims=True)


params = init_encoder([6, 8, 8, 6], rng)
pack = forward(params, rng.normal(size=6))
print(f"embedding dim {pack.embedding.shape[0]}, norm {np.linalg.norm(pack.embedding):.15f}")
print(f"middle taps: {pack.middle_2.shape[0]} and {pack.middle_3.shape[0]} units")

# A training-like batch: current labels, some matched historical labels.
hist_params = init_encoder([6, 8, 8, 6], rng)
X = rng.normal(size=(5, 6))
y = rng.integers(7, size=5)
y_hist = np.array([0, -1, 3, -1, 1])
cur_mem = IdentityMemory(unit_rows(7, 6))
hist_mem = IdentityMemory(unit_rows(4, 6))
hyper = Hyperparams()

print("\nmax relative error, analytic vs central finite differences (step 1e-5):")
for term in GRAD_TERMS:
    closure = make_loss_closure(term, hist_params, X, y, y_hist, cur_mem, hist_mem, hyper)
    err = grad_check(params, closure, step=1e-5)
    print(f"  {term:<8} {err:.3e}")
