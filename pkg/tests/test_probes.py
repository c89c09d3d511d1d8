import numpy as np
import pytest

from Core.config import GeneratorConfig
from Core.data import generate
from Core.errors import InputError
from Core.probes import contrast_features, cross_val_accuracy, run_probe


def test_contrast_features_shape(rng):
    assert contrast_features(rng.uniform(size=(10, 4, 4, 3))).shape == (9,)


def test_grey_frames_have_no_contrast():
    assert np.allclose(contrast_features(np.full((6, 4, 4, 3), 0.3)), 0.0)


def test_probe_needs_pair_segments():
    cfg = GeneratorConfig(num_videos=3, long_range_pairs=[])
    with pytest.raises(InputError):
        run_probe(generate(cfg, "train"), cfg, seed=0)


def test_cross_val_accuracy_on_separable_features(rng):
    y = np.repeat([0, 1], 20)
    x = rng.normal(size=(40, 3))
    x[:, 0] += 10.0 * y
    assert cross_val_accuracy(x, y, folds=5, random_state=0) == 1.0


def test_cross_val_accuracy_is_seeded(rng):
    y = np.repeat([0, 1], 15)
    x = rng.normal(size=(30, 4))
    assert cross_val_accuracy(x, y, 5, 3) == cross_val_accuracy(x, y, 5, 3)


@pytest.mark.slow
def test_only_long_range_context_separates_pairs():
    cfg = GeneratorConfig()
    report = run_probe(generate(cfg, "train"), cfg, seed=0)
    assert report.samples >= 20
    assert report.clip_accuracy <= 0.60
    assert report.sequence_accuracy >= 0.9
    assert report.gap >= 0.3
