"""The two objectives and their exact analytic gradients.

The nearest-centroid loss scores each support row against the class means of
the current representations by cosine softmax. The symmetric cross entropy
scores an n x n similarity matrix between paired prototype and image rows
against diagonal pseudo-labels, in both directions. Both gradients are exact;
here they are checked against central finite differences on one instance.
"""

import math

import numpy as np

from copa import LossConfig, Rng, build_prototypes, ncc_loss, sce_head_gradients, sce_loss

rng = Rng(3)


def randn(rows, cols):
    return np.array(rng.normals(rows * cols)).reshape(rows, cols)


# closed form: orthonormal two-class instance
value = ncc_loss(np.eye(2), np.array([0, 1]), np.eye(2)).value
print(f"NCC on orthonormal pair: {value:.6f} (= log(1+e^-1) = {math.log(1 + math.e**-1):.6f})")
value = sce_loss(np.eye(2), np.eye(2), LossConfig(temperature=1.0)).value
print(f"SCE on orthonormal pair: {value:.6f} (= 2 log(1+e^-1))")

# finite-difference check of the shared-head NCC gradient
labels = np.array([0, 0, 1, 1, 2, 2])
support = randn(6, 8)
theta = randn(8, 8)
analytic = ncc_loss(support, labels, theta, with_grad=True).grad_shared

h = 1e-4
numeric = np.zeros_like(theta)
for i in range(8):
    for j in range(8):
        probe = theta.copy()
        probe[i, j] += h
        up = ncc_loss(support, labels, probe).value
        probe[i, j] -= 2 * h
        down = ncc_loss(support, labels, probe).value
        numeric[i, j] = (up - down) / (2 * h)
err = np.linalg.norm(analytic - numeric) / np.linalg.norm(numeric)
print(f"NCC shared-head gradient vs finite differences: rel err {err:.2e}")

# and the two SCE head gradients
protos = build_prototypes(support, labels)
result = sce_head_gradients(support, labels, theta, theta.copy(), protos)
print(f"SCE value {result.value:.4f}; head gradient norms "
      f"{np.linalg.norm(result.grad_proto_head):.4f} / "
      f"{np.linalg.norm(result.grad_image_head):.4f}")

# cosine makes both losses scale-invariant per row
print("losses ignore row scaling and only see directions:",
      abs(sce_loss(np.eye(3), 5.0 * np.eye(3)).value
          - sce_loss(np.eye(3), np.eye(3)).value) < 1e-12)
