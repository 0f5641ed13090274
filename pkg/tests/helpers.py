"""Shared instances and frozen reference values."""
import numpy as np

from privfunnel.dist import PfInstance, entropy

SYNTH_CHANNEL = [[0.9, 0.08, 0.4], [0.025, 0.82, 0.05], [0.075, 0.1, 0.55]]
UNIFORM = [1 / 3, 1 / 3, 1 / 3]
SKEWED = [0.1, 0.3, 0.6]

# independent pure-Python evaluations (see tests/oracles.py), frozen
H_UNIFORM = 1.0986122886681096
H_SKEWED = 0.8979457248567797
I_SX_UNIFORM = 0.4541057320608286
I_SX_SKEWED = 0.36779684852365124

# pass/fail lines from test_acceptance, echoed in the terminal summary
ACCEPTANCE_LINES = []


def random_instance(rng, m=None, k=None, n=None, r_frac=None):
    m = m or int(rng.integers(2, 7))
    k = k or int(rng.integers(2, 7))
    n = n or int(rng.integers(2, 7))
    p = rng.dirichlet(np.ones(m))
    s = rng.dirichlet(np.ones(k), size=m).T
    inst = PfInstance.from_arrays(p, s, n, 0.0)
    if r_frac is not None:
        inst = inst.with_threshold(r_frac * min(entropy(inst.prior), np.log(n)))
    return inst
