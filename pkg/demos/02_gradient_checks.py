"""
Checking every gradient against central differences
---------------------------------------------------
Training back-propagates through the warp, both generators and the
discriminator. Each backward rule lives in one primitive of the autodiff
engine; this script audits them in isolation and then end to end.
"""
import numpy as np

from vcgan import diffnum, gradcheck
from vcgan.diffnum import Tape, Tensor, backward, finite_diff_check
from vcgan.warp import WarpConfig, generate_f0_with_gradients

#%%
# One primitive at a time: the outer difference that feeds the kernel.
rng = np.random.default_rng(0)
w = rng.uniform(-1, 1, (5, 5))


def objective(p, tape):
    return tape.sum(tape.mul(tape.outer_diff(p["v"]), Tensor(w)))


print(finite_diff_check(objective, {"v": rng.uniform(-2, 2, 5)}, 1e-5, 1e-6))

#%%
# A single-frame warp has derivative 3 with respect to its momentum
# (three steps of size one, and the kernel is the constant 1).
tape = Tape()
m = Tensor([5.0])
out = generate_f0_with_gradients(m, Tensor([100.0]), WarpConfig(), tape)
print("d f0 / d m =", backward(tape, [1.0], out)[m.id])

#%%
# The three groups checked by ``vcgan gradcheck``: the warp alone, the
# summed generator objective and the discriminator objective, with dropout
# frozen by re-seeding before every evaluation.
for result in gradcheck.run_all(seed=0, T=8, max_entries=100):
    print(result.line())

#%%
# The audit is only useful if it can fail. Flip the sign of one backward rule
# and the warp group reports it.
fwd, vjp = diffnum.PRIMITIVES["outer_diff"]
diffnum.PRIMITIVES["outer_diff"] = (fwd, lambda *a: [-g for g in vjp(*a)])
try:
    print(gradcheck.GroupResult("warp", gradcheck.check_warp(T=8)).line())
finally:
    diffnum.PRIMITIVES["outer_diff"] = (fwd, vjp)
