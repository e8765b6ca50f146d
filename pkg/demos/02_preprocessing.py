# # Preprocessing: linear transform, fusion, dimension reduction

import numpy as np

from ubli import fuse, iterative_dimred_init, linear_transform, normalize, pca_reduce, unsupervised_init
from ubli.preprocess import LinearTransformSpec
from ubli.synthetic import planted_pair

rng = np.random.default_rng(0)

# ## Similarity order
#
# After the transform with alpha, first-order similarity equals the
# (2*alpha + 1)-th order similarity of the input.

x = rng.standard_normal((40, 8))
for alpha in (0.0, 0.5, 1.0):
    t = linear_transform(x, alpha)
    order = int(2 * alpha + 1)
    target = np.linalg.matrix_power(x @ x.T, order)
    err = np.linalg.norm(t @ t.T - target) / np.linalg.norm(target)
    print(f"alpha {alpha:.1f}: relative error vs order-{order} similarity {err:.2e}")

print("selected alphas for en-si word2vec:", LinearTransformSpec.selected("en-si", "word2vec"))

# ## Fusion
#
# Both spaces end up with singular values sqrt(S_X * S_Z).

a = rng.standard_normal((60, 6)) * np.array([3, 2, 1, 1, 0.5, 0.2])
b = rng.standard_normal((70, 6))
fa, fb = fuse(a, b)
print("S_X'", np.round(np.linalg.svd(fa, compute_uv=False), 4))
print("S_Z'", np.round(np.linalg.svd(fb, compute_uv=False), 4))

# ## PCA and the iterative dimension-reduction init
#
# 20 planted dimensions padded with 20 noise dimensions.

p = planted_pair(200, 20, seed=1)
pad = lambda m: normalize(np.hstack([m, 0.2 * rng.standard_normal((200, 20))]))
px, pz = pad(p.x), pad(p.z)
reduced, model = pca_reduce(px, 20)
print("PCA kept", model.n_components, "components, output", reduced.shape)


def init_recovery(d):
    fwd = dict(d.pairs())
    return np.mean([fwd.get(i) == p.perm[i] for i in range(200)])


print(f"init at full dimension: {init_recovery(unsupervised_init(px, pz)):.3f}")
print(f"iterative reduction 40 -> 10: {init_recovery(iterative_dimred_init(px, pz, 40, 10, 5)):.3f}")
