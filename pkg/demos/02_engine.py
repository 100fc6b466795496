"""The from-scratch network engine: reverse-mode gradients, a finite-difference check, Adam.

Run: python demos/02_engine.py
"""

import numpy as np

from chansep.engine import TrainConfig, backward, forward, init_network, mse, mse_grad, train

rng = np.random.default_rng(0)
net = init_network([6, 12, 3], ["tanh", "linear"], seed=1)
x, t = rng.standard_normal((5, 6)), rng.standard_normal((5, 3))

y, cache = forward(net, x)
grads, x_grad = backward(net, cache, mse_grad(y, t)[1])

# Central differences on the first weight matrix.
W = net.params()[0]
numeric = np.zeros_like(W)
step = 1e-5
for idx in np.ndindex(W.shape):
    keep = W[idx]
    W[idx] = keep + step
    up = mse(net(x), t)
    W[idx] = keep - step
    down = mse(net(x), t)
    W[idx] = keep
    numeric[idx] = (up - down) / (2 * step)
print(f"max |analytic - numeric| on W0: {np.max(np.abs(grads[0] - numeric)):.2e}")
print(f"input gradient shape: {x_grad.shape}")

# Fit a smooth 1-D map with mini-batch Adam.
xs = np.linspace(-2, 2, 200)[:, None]
ys = np.sin(2 * xs)
fitter = init_network([1, 32, 1], ["tanh", "linear"], seed=2)
_, curve = train(fitter, (xs, ys), TrainConfig(epochs=300, lr=1e-2, batch_size=32, seed=0))
print(f"sin fit: loss {curve[0]:.3f} -> {curve[-1]:.5f} over {len(curve) - 1} epochs")
