# ============================================================================
# probes.py - Long-range separability probe for generated datasets
#
# For every segment whose class belongs to a long-range pair, two feature
# vectors are built from per-frame channel contrasts (channel mean minus the
# mean over channels): one from the single clip starting at the segment
# onset, one from the whole video. The same scikit-learn logistic-regression
# probe is cross-validated on each; a large accuracy gap means only long-range
# context can tell the pair apart.
# ============================================================================

from dataclasses import asdict, dataclass

import numpy as np
from sklearn.linear_model import LogisticRegression
from sklearn.model_selection import StratifiedKFold, cross_val_score
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from Core.errors import InputError
from Core.log_utils import log
from Core.rng import make_rng


@dataclass
class ProbeReport:
    samples: int
    folds: int
    clip_accuracy: float
    sequence_accuracy: float

    @property
    def gap(self):
        return self.sequence_accuracy - self.clip_accuracy

    def to_dict(self):
        return {**asdict(self), "gap": self.gap}


def contrast_features(frames):
    # frames [L, H, W, 3] -> mean, max and min over time of each channel's contrast
    channel_means = frames.mean(axis=(1, 2))
    contrast = channel_means - channel_means.mean(axis=1, keepdims=True)
    return np.concatenate([contrast.mean(axis=0), contrast.max(axis=0), contrast.min(axis=0)])


def pair_samples(dataset, pairs, clip_len):
    # -> (clip features, sequence features, member labels)
    member = {k: m for pair in pairs for m, k in enumerate(pair)}
    clip_x, seq_x, labels = [], [], []
    for sample in dataset:
        frames = sample.video.frames
        for ann in sample.annotations:
            if ann.class_id not in member:
                continue
            clip_x.append(contrast_features(frames[ann.start:ann.start + clip_len]))
            seq_x.append(contrast_features(frames))
            labels.append(member[ann.class_id])
    return np.array(clip_x), np.array(seq_x), np.array(labels, dtype=np.int64)


def cross_val_accuracy(x, y, folds, random_state):
    # Mean held-out accuracy of a standardised logistic-regression probe.
    probe = make_pipeline(StandardScaler(), LogisticRegression(C=1.0, max_iter=1000))
    cv = StratifiedKFold(n_splits=folds, shuffle=True, random_state=random_state)
    return float(cross_val_score(probe, x, y, cv=cv, scoring="accuracy").mean())


def run_probe(dataset, gen_cfg, seed, folds=5):
    clip_x, seq_x, y = pair_samples(dataset, gen_cfg.long_range_pairs, gen_cfg.clip_len)
    counts = np.bincount(y, minlength=2)
    if counts.min() < folds:
        raise InputError(f"Long-range probe needs at least {folds} segments of each pair member, "
                         f"got {counts.tolist()}")
    random_state = int(make_rng(seed, "probe", 0).integers(2 ** 31 - 1))
    clip_acc = cross_val_accuracy(clip_x, y, folds, random_state)
    seq_acc = cross_val_accuracy(seq_x, y, folds, random_state)
    report = ProbeReport(samples=len(y), folds=folds, clip_accuracy=clip_acc, sequence_accuracy=seq_acc)
    log(f"Long-range probe: clip {clip_acc:.3f} vs sequence {seq_acc:.3f} on {len(y)} segments")
    return report
