# %% [markdown]
# # Checkpoint container
#
# Named float32/float64 arrays in one little-endian file with a CRC-32 footer.

# %%
import tempfile
from pathlib import Path

import numpy as np

from gmsam.encoders import build_encoder, toy_student
from gmsam.errors import FormatError
from gmsam.io import load_checkpoint, save_checkpoint

model = build_encoder(toy_student(), seed=0)
path = Path(tempfile.mkdtemp()) / "student.gmkd"
save_checkpoint(model.state_dict(), path)
print(path.stat().st_size, "bytes")

# %%
back = load_checkpoint(path)
print(all(back[k].tobytes() == v.tobytes() for k, v in model.state_dict().items()))

# %% one flipped byte is caught
raw = bytearray(path.read_bytes())
raw[100] ^= 0x40
path.write_bytes(bytes(raw))
try:
    load_checkpoint(path)
except FormatError as exc:
    print("rejected:", exc)
