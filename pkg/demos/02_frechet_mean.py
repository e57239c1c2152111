"""
The Frechet mean of a tree sample
=================================

Draw trees around a known six-taxon tree and recover it as the point
minimising the sum of squared geodesic distances.
"""

import numpy as np

from treeconf import CoordinateFrame, TaxonSet, frechet_mean, log_map_matrix, write_newick
from treeconf.geodesic import distance
from treeconf.simulate import GeneratorSpec, random_tree, sample_trees

rng = np.random.default_rng(2)
taxa = TaxonSet("abcdef")
truth = random_tree(taxa, rng, 0.4, 1.2)
spec = GeneratorSpec.isotropic(truth, 0.3, seed=2)
trees = sample_trees(spec, 60, rng)

off = sum(t.topology() != truth.topology() for t in trees)
print(f"{off} of {len(trees)} trees leave the true topology")

result = frechet_mean(trees)
print("mean:", write_newick(result.mean))
print("iterations:", result.iterations_used, "converged:", result.converged)
print("distance to truth:", distance(result.mean, truth))

# %%
# At the mean the log-mapped sample averages back to the mean's own
# coordinates.
frame = CoordinateFrame(result.mean)
X = log_map_matrix(frame, trees)
print("column means:", X.mean(axis=0))
print("mean coords: ", frame.base_coords)
