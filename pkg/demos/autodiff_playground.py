"""A quick tour of the reverse-mode tape.

Builds a couple of small graphs by hand, checks the analytic gradients
against central differences, and shows the layer-fusion op collapsing a
stack onto one layer as its logit grows.
"""

import numpy as np

from scdkit import Tensor, backward
from scdkit.autodiff import (
    check_gradients,
    cosine_rowwise,
    fuse_layers,
    matmul,
    mean_all,
    numeric_gradient,
    relative_error,
    sigmoid,
    sum_all,
)


def scalar_chain():
    # d/dx mean(sigmoid(x W)) by hand vs the tape.
    rng = np.random.default_rng(0)
    x = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
    w = Tensor(rng.standard_normal((3, 2)), requires_grad=True)
    loss = mean_all(sigmoid(matmul(x, w)))
    grads = backward(loss)
    print("scalar_chain loss:", loss.value.item())

    def rebuild(xv, wv):
        out = mean_all(sigmoid(matmul(Tensor(xv), Tensor(wv))))
        return out.value.item()

    num = numeric_gradient(rebuild, [x.value, w.value], 0, 1e-3)
    err = relative_error(grads[x], num)
    print(f"  max rel error vs finite differences: {err:.2e}")


def cosine_similarity_grad():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((5, 8))
    b = rng.standard_normal((5, 8))

    def build(ta, tb):
        return sum_all(cosine_rowwise(ta, tb))

    worst = check_gradients(build, [a, b])
    print(f"cosine_rowwise gradcheck worst rel error: {worst:.2e}")


def fusion_sweep():
    # Three constant layers with distinct values; watch the fused output
    # move from the uniform mean onto layer 0 as its logit grows.
    layers = np.stack([np.full((1, 1), v, dtype=np.float64) for v in (1.0, 2.0, 4.0)])
    print("fusion sweep (layers hold 1, 2, 4):")
    for logit in (0.0, 1.0, 3.0, 10.0):
        w = Tensor(np.array([[logit, 0.0, 0.0]]), requires_grad=True)
        out = fuse_layers(w, layers)
        print(f"  logit={logit:5.1f}  fused={out.value.item():.4f}")


if __name__ == "__main__":
    scalar_chain()
    cosine_similarity_grad()
    fusion_sweep()
