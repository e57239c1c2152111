"""
Confidence sets and split support
=================================

Build the confidence set for the mean tree from a sample, test a few
candidate trees against it and ask how strongly each split is supported.
"""

import warnings

import numpy as np

from treeconf import TaxonSet
from treeconf.inference import confidence_member, split_support_test, summarize
from treeconf.simulate import GeneratorSpec, nni_alternative, random_tree, sample_trees
from treeconf.core import PhyloTree

rng = np.random.default_rng(3)
taxa = TaxonSet("abcdef")
truth = random_tree(taxa, rng, 0.3, 1.0)
trees = sample_trees(GeneratorSpec.isotropic(truth, 0.35, seed=3), 40, rng)

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    s = summarize(trees)
print("retained splits:", s.retained_splits)

# %%
# The true tree should usually be inside. A rearranged tree far from the
# sample should not be.
weakest = min(truth.internal, key=truth.internal.get)
moved = {sp: v for sp, v in truth.internal.items() if sp != weakest}
moved[nni_alternative(truth, weakest)] = 1.5
for name, candidate in [("truth", truth), ("rearranged", PhyloTree(taxa, moved))]:
    r = confidence_member(s, candidate, 0.05)
    print(f"{name:>10}: statistic {r.statistic:.4f} threshold {r.threshold:.4f} p {r.p_value:.3g}")

# %%
# One-sided tests of each split's coordinate against zero.
for sp in s.frame.order:
    marginal = split_support_test(s, sp)
    joint = split_support_test(s, sp, mode="joint", bonferroni=True)
    print(f"{sp.format(taxa):>14}: marginal p {marginal.p_value:.3g}  joint p {joint.p_value:.3g}")
