# %% [markdown]
# # Three encoder families, one output contract
#
# Teacher ViT, GMF student and ResNet baseline all map a (B,3,H,W) image in
# [0,1] to a (B,256,H/16,W/16) embedding.

# %%
import numpy as np

from gmsam import numerics as nx
from gmsam.encoders import build_encoder, encode, toy_baseline, toy_student, toy_teacher

x = nx.Tensor(np.random.default_rng(0).uniform(0, 1, (2, 3, 64, 64)).astype(np.float32))

# %%
for spec in [toy_teacher(), toy_student((2, 2, 2, 2)), toy_student((3, 3, 12)), toy_baseline()]:
    model = build_encoder(spec, seed=0)
    with nx.no_grad():
        out = encode(model, x)
    print(f"{spec.name:>12}  params={model.param_count():>9,}  out={out.shape}")

# %% specs are plain text and round-trip through files
from gmsam.encoders import dumps, loads

text = dumps(toy_student((2, 2, 8, 2)))
print(text)
assert loads(text) == toy_student((2, 2, 8, 2))

# %% at the full 1024px input the student's shape is propagated without running it
_, shape = build_encoder(toy_student((2, 2, 8, 2))).flop_rows((1, 3, 1024, 1024))
print("1024px embedding:", shape)
