# %% [markdown]
# # Reverse-mode autodiff on numpy
#
# Tensors record the operations applied to them; `backward()` walks that tape in
# reverse.  Here we check a small network against central differences and look
# at what the tape recorded.

# %%
import numpy as np

from gmsam import numerics as nx

rng = np.random.default_rng(0)

# %% gradient checks run in 64-bit
with nx.precision(64):
    x = nx.Tensor(rng.normal(size=(4, 8)))
    w = nx.Tensor(rng.normal(size=(8, 3)))
    target = rng.normal(size=(4, 3))

    def f(x, w):
        return nx.huber_loss(nx.gelu(nx.matmul(x, w)), target, 1.0)

    print("max relative error:", nx.gradient_check(f, [x, w]))

# %% every op on the tape, with its shapes
with nx.record() as rec:
    y = nx.softmax(nx.matmul(nx.Tensor(rng.normal(size=(2, 5))), nx.Tensor(rng.normal(size=(5, 5)))), axis=-1)
for entry in rec.entries:
    print(entry.op, [np.shape(i) for i in entry.inputs], "->", entry.output.shape)

# %% instrumented FLOP counting: a MAC is two FLOPs
with nx.count_flops() as counter:
    nx.matmul(nx.Tensor(np.ones((16, 32))), nx.Tensor(np.ones((32, 8))))
print(counter.total, "==", 2 * 16 * 32 * 8)

# %% Adam on a quadratic
p = nx.Tensor(np.array([3.0, -2.0]), requires_grad=True)
opt = nx.Adam({"p": p}, lr=0.1)
for _ in range(100):
    opt.zero_grad()
    loss = nx.tsum(nx.mul(p, p))
    loss.backward()
    opt.step()
print("after 100 steps:", p.data)
