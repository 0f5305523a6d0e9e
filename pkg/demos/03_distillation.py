# %% [markdown]
# # Feature distillation
#
# The teacher embeds every training image once into a cache.  The student is
# then trained with Adam to match those embeddings under a Huber loss.

# %%
import numpy as np

from gmsam.distill import DistillConfig, cache_teacher, distill, feature_distance_report
from gmsam.encoders import build_encoder, toy_student, toy_teacher
from gmsam.io import Dataset

data = Dataset.synthetic(seed=100, count=16, image_size=64)
config = DistillConfig(image_size=64, batch_size=8, epochs=6, learning_rate=3e-4)

teacher = build_encoder(toy_teacher(), seed=1000)
cache = cache_teacher(teacher, data, config)

# %%
student = build_encoder(toy_student(), seed=2000)
before = feature_distance_report(student, teacher, data).mean_huber
student, curve = distill(student, data, cache, config,
                         on_epoch=lambda e, m, c: print(f"epoch {e}: {c.epochs[-1][1]:.5f}"))
after = feature_distance_report(student, teacher, data).mean_huber
print(f"mean huber to teacher: {before:.5f} -> {after:.5f}")

# %% the same spec and seed as the teacher is a fixed point
twin = build_encoder(toy_teacher(), seed=1000)
_, twin_curve = distill(twin, data, cache, DistillConfig(image_size=64, epochs=1))
print("twin losses:", set(twin_curve.step_losses))
