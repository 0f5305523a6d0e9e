# %% [markdown]
# # Parameter and FLOP profiles
#
# Analytic per-layer counts are cross-checked against an inventory of the
# parameters and against FLOPs counted while actually running the model.

# %%
from gmsam import profile as prof
from gmsam.encoders import TABLE2_STRUCTURES, build_encoder, toy_student, toy_teacher

report = prof.profile_model(build_encoder(toy_student()), (1, 3, 1024, 1024))
print(report.to_text())

# %%
for key, (analytic, oracle, ok) in prof.oracle_check(build_encoder(toy_teacher()), (1, 3, 64, 64)).items():
    print(f"{key}: {analytic} vs {oracle} {'PASS' if ok else 'FAIL'}")

# %% structures side by side
print(prof.compare_structures([toy_student(s) for s in TABLE2_STRUCTURES], (1, 3, 1024, 1024)).to_text())

# %% reductions recomputed from the published cost table
print(prof.published_reductions())
