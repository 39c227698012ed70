"""Pure-numpy reference kernels for the MLP hot path.

Same contract as the compiled extension in ``_kernels.pyx``; selected by
``scorelab.kernels`` when the extension is unavailable (or forced via the
SCORELAB_KERNELS env var).  Shapes:

- ``As[i]``: (out_features, in_features) C-contiguous float64
- ``bs[i]``: (out_features,)
- ``xt``:    (batch, input_dim), ``rho``: (batch,), ``target``: (batch, out)
"""

import numpy as np


def forward(As, bs, xt, rho):
    """Truncated forward pass; returns (batch, out) array."""
    h = xt
    for A, b in zip(As[:-1], bs[:-1]):
        h = np.maximum(h @ A.T + b, 0.0)
    raw = h @ As[-1].T + bs[-1]
    lim = rho[:, None]
    return np.clip(raw, -lim, lim)


def loss_grad(As, bs, xt, rho, target, weights):
    """Fused forward/backward for the weighted mean squared-norm loss
    ``(1/N) sum_i w_i ||out_i - target_i||^2``.

    Returns ``(loss, gA, gb)``. Truncation backpropagates as identity strictly
    inside (-rho, rho) and zero outside; ReLU subgradient at 0 is 0.
    """
    n = xt.shape[0]
    hs = [xt]
    zs = []
    h = xt
    for A, b in zip(As[:-1], bs[:-1]):
        z = h @ A.T + b
        h = np.maximum(z, 0.0)
        zs.append(z)
        hs.append(h)
    raw = h @ As[-1].T + bs[-1]
    lim = rho[:, None]
    out = np.clip(raw, -lim, lim)
    r = out - target
    loss = float(np.sum(weights[:, None] * r * r) / n)

    d = (2.0 / n) * weights[:, None] * r * (np.abs(raw) < lim)
    gA = [None] * len(As)
    gb = [None] * len(bs)
    gA[-1] = d.T @ hs[-1]
    gb[-1] = d.sum(axis=0)
    dh = d @ As[-1]
    for i in range(len(As) - 2, -1, -1):
        dz = dh * (zs[i] > 0.0)
        gA[i] = dz.T @ hs[i]
        gb[i] = dz.sum(axis=0)
        if i > 0:
            dh = dz @ As[i]
    return loss, gA, gb
