# %% [markdown]
# # Prompted masks and mIoU
#
# Masks come from cosine similarity between the prompted embedding cell and
# every (bilinearly upsampled) cell.  mIoU compares a pipeline to a reference.

# %%
import numpy as np

from gmsam.encoders import build_encoder, toy_student, toy_teacher
from gmsam.io import Dataset
from gmsam.segment import SegmentationPipeline, default_prompts, evaluate_miou, iou

held = Dataset.synthetic(seed=900, count=8, image_size=64, split="eval")
prompts = default_prompts(held)
teacher = SegmentationPipeline(build_encoder(toy_teacher(), seed=1000))

# %%
first = held.ids[0]
mask = teacher.predict(held.image(first), prompts[first])
print(prompts[first], "covers", mask.data.mean().round(3), "of the image")

# %%
print("teacher vs itself:", evaluate_miou(teacher, teacher, held, prompts).summary())
student = SegmentationPipeline(build_encoder(toy_student(), seed=2000))
print("untrained student:", evaluate_miou(teacher, student, held, prompts).summary())

# %% two empty masks agree perfectly
print(iou(np.zeros((4, 4), bool), np.zeros((4, 4), bool)))
