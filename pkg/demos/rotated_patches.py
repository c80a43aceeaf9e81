# Smooth random 10x10 patches rotated in 5 degree steps. Each reference
# traces a closed curve in R^100; a good neighbourhood stays on its curve.
from manifold_restore.experiments import rotsim

print("classes   agnn   euclid  kmeans   (% correct memberships)")
for C in range(3, 11):
    r = rotsim(C)
    print("%7d  %6.1f  %6.1f  %6.1f" % (C, r.agnn, r.euclid, r.kmeans))
