"""
Coverage of the confidence set
==============================

Repeat the whole procedure on many simulated samples and count how often
the confidence set contains the generating tree. Far from any boundary the
set is the classical Hotelling region. Near a boundary some draws change
topology and coverage drifts.
"""

from treeconf import CoordinateFrame, TaxonSet
from treeconf.core import PhyloTree, Split
from treeconf.simulate import GeneratorSpec, coverage_experiment, write_coverage_csv

taxa = TaxonSet("abcde")
ab, abc = Split.from_labels(taxa, "ab"), Split.from_labels(taxa, "abc")

interior = GeneratorSpec.isotropic(PhyloTree(taxa, {ab: 2.0, abc: 3.0}), 0.3, seed=5)
print("interior base, n = 30")
print(write_coverage_csv(coverage_experiment(interior, 30, 300)))

# %%
# Shrinking the base edges puts roughly a fifth of the draws in a
# neighbouring orthant.
boundary = GeneratorSpec.isotropic(PhyloTree(taxa, {ab: 1.0, abc: 1.0}), 0.825, seed=5)
result = coverage_experiment(boundary, 30, 300)
print("boundary base, n = 30")
print(write_coverage_csv(result))
print("rejected draws:", result.rejections)
