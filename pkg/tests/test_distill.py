import numpy as np
import pytest

from gmsam.distill import (
    DistillConfig,
    LossCurve,
    TeacherCache,
    cache_teacher,
    distill,
    epoch_order,
    feature_distance_report,
)
from gmsam.encoders import build_encoder, toy_student, toy_teacher
from gmsam.errors import CacheInvalidationError, ConfigurationError, DimensionError, TrainingDivergenceError
from gmsam.io import Dataset

SMALL_TEACHER = toy_teacher(width=16, depth=1, num_heads=2)
SMALL_STUDENT = toy_student((1, 1, 1, 1), stage_dims=(8, 16, 16, 32), heads=(1, 2, 2, 2))


def params_bytes(model):
    return {k: v.tobytes() for k, v in model.state_dict().items()}


@pytest.fixture(scope="module")
def data32():
    return Dataset.synthetic(2, 8, 32)


def cfg(**kw):
    base = dict(image_size=32, batch_size=4, epochs=2, seed=5)
    base.update(kw)
    return DistillConfig(**base)


# -- config ------------------------------------------------------------------------


@pytest.mark.parametrize("kw", [dict(batch_size=0), dict(epochs=0), dict(image_size=40), dict(huber_delta=0),
                                dict(precision=16), dict(learning_rate=-1e-3)])
def test_config_validation(kw):
    with pytest.raises(ConfigurationError):
        DistillConfig(**kw)


def test_config_defaults_are_the_paper_settings_except_size():
    c = DistillConfig()
    assert (c.batch_size, c.learning_rate, c.epochs, c.huber_delta) == (8, 3e-4, 13, 1.0)
    assert c.image_size == 64


# -- cache -------------------------------------------------------------------------


def test_cache_shapes_and_count():
    ds = Dataset.synthetic(0, 8, 64)
    cache = cache_teacher(build_encoder(SMALL_TEACHER, 0), ds, DistillConfig(image_size=64))
    assert len(cache) == 8
    assert all(e.shape == (1, 256, 4, 4) for e in cache.embeddings.values())


def test_cache_file_is_byte_identical_across_runs(tmp_path, data32):
    teacher = build_encoder(SMALL_TEACHER, 0)
    for name in ("a", "b"):
        cache_teacher(teacher, data32, cfg(), jobs=2 if name == "b" else 1).save(tmp_path / name)
    assert (tmp_path / "a" / "cache.gmkd").read_bytes() == (tmp_path / "b" / "cache.gmkd").read_bytes()
    assert (tmp_path / "a" / "cache.meta").read_text() == (tmp_path / "b" / "cache.meta").read_text()


def test_cache_round_trip_and_invalidation(tmp_path):
    ds = Dataset.synthetic(0, 3, 64)
    teacher = build_encoder(SMALL_TEACHER, 0)
    cache_teacher(teacher, ds, DistillConfig(image_size=64)).save(tmp_path)
    loaded = TeacherCache.load(tmp_path, DistillConfig(image_size=64), teacher)
    assert loaded.teacher_hash == teacher.fingerprint() and len(loaded) == 3
    with pytest.raises(CacheInvalidationError, match="128"):
        TeacherCache.load(tmp_path, DistillConfig(image_size=128))
    with pytest.raises(CacheInvalidationError, match="teacher"):
        TeacherCache.load(tmp_path, teacher=build_encoder(SMALL_TEACHER, 1))
    meta = (tmp_path / "cache.meta").read_text().replace("item_count=3", "item_count=4")
    (tmp_path / "cache.meta").write_text(meta)
    with pytest.raises(CacheInvalidationError):
        TeacherCache.load(tmp_path)


def test_missing_item_in_cache(data32):
    cache = cache_teacher(build_encoder(SMALL_TEACHER, 0), data32.subset(data32.ids[:2]), cfg())
    with pytest.raises(CacheInvalidationError, match=data32.ids[3]):
        cache.target(data32.ids[3])


# -- training ----------------------------------------------------------------------


def test_self_distillation_is_a_fixed_point(data32):
    teacher = build_encoder(SMALL_TEACHER, 9)
    student = build_encoder(SMALL_TEACHER, 9)
    before = params_bytes(student)
    _, curve = distill(student, data32, cache_teacher(teacher, data32, cfg()), cfg())
    assert curve.steps[0][2] == 0.0
    assert all(loss == 0.0 for loss in curve.step_losses)
    assert params_bytes(student) == before


def test_zero_learning_rate_leaves_student_unchanged(data32):
    teacher = build_encoder(SMALL_TEACHER, 0)
    student = build_encoder(SMALL_STUDENT, 1)
    before = params_bytes(student)
    _, curve = distill(student, data32, teacher, cfg(learning_rate=0.0, epochs=3))
    assert params_bytes(student) == before
    np.testing.assert_allclose(curve.epoch_means, curve.epoch_means[0], rtol=1e-6)


def test_teacher_is_untouched(data32):
    teacher = build_encoder(SMALL_TEACHER, 0)
    before = params_bytes(teacher)
    distill(build_encoder(SMALL_STUDENT, 1), data32, teacher, cfg(learning_rate=1e-3))
    assert params_bytes(teacher) == before
    assert all(p.grad is None for p in teacher.parameters())


def test_cache_and_live_teacher_give_identical_losses(data32):
    teacher = build_encoder(SMALL_TEACHER, 0)
    _, live = distill(build_encoder(SMALL_STUDENT, 1), data32, teacher, cfg())
    _, cached = distill(build_encoder(SMALL_STUDENT, 1), data32, cache_teacher(teacher, data32, cfg()), cfg())
    assert live.steps == cached.steps


def test_runs_are_bit_reproducible(data32):
    teacher = build_encoder(SMALL_TEACHER, 0)
    cache = cache_teacher(teacher, data32, cfg())
    a, ca = distill(build_encoder(SMALL_STUDENT, 1), data32, cache, cfg())
    b, cb = distill(build_encoder(SMALL_STUDENT, 1), data32, cache, cfg())
    assert params_bytes(a) == params_bytes(b)
    assert ca.steps == cb.steps


def test_loss_curve_records(data32, tmp_path):
    teacher = build_encoder(SMALL_TEACHER, 0)
    seen = []
    _, curve = distill(build_encoder(SMALL_STUDENT, 1), data32, teacher, cfg(epochs=3),
                       on_epoch=lambda e, model, c: seen.append((e, c.epochs[-1][1])))
    assert [s for s, _, _ in curve.steps] == list(range(6))
    assert [e for _, e, _ in curve.steps] == [0, 0, 1, 1, 2, 2]
    assert seen == [(e, m) for e, m, _ in curve.epochs]
    assert curve.last_loss == curve.epoch_means[-1]
    np.testing.assert_allclose(curve.epoch_means[0], np.mean(curve.step_losses[:2]))
    curve.write_csv(tmp_path / "loss.csv")
    lines = (tmp_path / "loss.csv").read_text().splitlines()
    assert lines[0] == "kind,step,epoch,loss" and len(lines) == 1 + 6 + 3


def test_epoch_order_is_a_seeded_permutation():
    a = epoch_order(1, 0, 10)
    assert sorted(a) == list(range(10))
    assert (a == epoch_order(1, 0, 10)).all() and not (a == epoch_order(1, 1, 10)).all()


def test_divergence_reports_step(data32):
    with pytest.raises(TrainingDivergenceError) as err:
        distill(build_encoder(SMALL_STUDENT, 1), data32, build_encoder(SMALL_TEACHER, 0),
                cfg(learning_rate=1e38, epochs=3))
    assert err.value.step is not None and err.value.step >= 1


def test_target_shape_mismatch(data32):
    class Wrong:
        def target(self, item_id):
            return np.zeros((1, 256, 3, 3), np.float32)

    with pytest.raises(DimensionError):
        distill(build_encoder(SMALL_STUDENT, 1), data32, Wrong(), cfg())


def test_cache_size_must_match_config(data32):
    cache = cache_teacher(build_encoder(SMALL_TEACHER, 0), data32, cfg())
    with pytest.raises(CacheInvalidationError):
        distill(build_encoder(SMALL_STUDENT, 1), Dataset.synthetic(2, 8, 64), cache, cfg(image_size=64))


# -- distance report ---------------------------------------------------------------


def test_distance_report(data32):
    teacher = build_encoder(SMALL_TEACHER, 0)
    same = feature_distance_report(build_encoder(SMALL_TEACHER, 0), teacher, data32)
    assert same.mean_huber == 0.0 and same.mean_mse == 0.0

    student = build_encoder(SMALL_STUDENT, 1)
    rep = feature_distance_report(student, teacher, data32)
    rev = feature_distance_report(student, teacher, data32.subset(data32.ids[::-1]))
    assert rep.per_item == rev.per_item
    assert abs(rep.mean_huber - np.mean([v["huber"] for v in rep.per_item.values()])) < 1e-12
    assert abs(rep.mean_mse - np.mean([v["mse"] for v in rep.per_item.values()])) < 1e-12
    assert all(v["huber"] <= 0.5 * v["mse"] + 1e-12 for v in rep.per_item.values())


def test_loss_curve_empty():
    assert np.isnan(LossCurve().last_loss)
