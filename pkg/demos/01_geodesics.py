"""
Geodesics between trees
=======================

Two five-taxon trees whose splits all cross each other are joined by a
path through the star tree. Trees that share most of their structure are
joined by a path that crosses one boundary at a time.
"""

import numpy as np

from treeconf import TaxonSet, geodesic, parse_newick, point_on_geodesic
from treeconf.geodesic import cone_distance

taxa = TaxonSet("abcde")
(left,) = parse_newick("((a:1,b:1):3,c:1,(d:1,e:1):4);", taxa)
(right,) = parse_newick("((a:1,d:1):6,b:1,(c:1,e:1):8);", taxa)

g = geodesic(left, right)
print("distance:", g.distance)
print("support pairs:", len(g.support))
print("cone path:", cone_distance(left, right))

# %%
# Walk along the path and watch the topology change.
for lam in np.linspace(0.0, 1.0, 7):
    t = point_on_geodesic(g, float(lam))
    splits = {sp.format(taxa): round(v, 3) for sp, v in t.internal.items() if v > 1e-12}
    print(f"{lam:.2f}", splits or "star tree")

# %%
# A pair that differs by one rearrangement crosses a single boundary, and the
# path is shorter than the detour through the star tree.
(near,) = parse_newick("((a:1,b:1):2.5,d:1,(c:1,e:1):1.5);", taxa)
g = geodesic(left, near)
print("distance:", g.distance, "cone path:", cone_distance(left, near))
print("common splits:", [s.format(taxa) for s, _, _ in g.common])
