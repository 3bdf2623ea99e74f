"""Trial scoring and evaluation: cosine baseline, EER, minDCF, DET, fusion.

Scores are similarity-oriented throughout (higher = more target-like).
The threshold sweep takes the midpoints between consecutive distinct
scores plus -inf/+inf sentinels, which covers every achievable operating
point; a trial is accepted when its score >= threshold.
"""

from __future__ import annotations

import numpy as np
from dataclasses import dataclass

from .embeddings import (
    ParseError,
    Whitener,
    _fmt,
    apply_whitener,
    average_embeddings,
    length_normalize,
)
from .balance import cosine_score

DCF_C_MISS = 10.0
DCF_C_FA = 1.0
DCF_P_TARGET = 0.01

TRIAL_KEYS = ("target", "nontarget", "unknown")


@dataclass(frozen=True)
class Trial:
    model_id: str
    test_utterance_id: str
    key: str = "unknown"

    def __post_init__(self):
        if not self.model_id or not self.test_utterance_id:
            raise ValueError("trial ids must be non-empty")
        if self.key not in TRIAL_KEYS:
            raise ValueError(f"unknown trial key {self.key!r}")


@dataclass(frozen=True)
class EvalReport:
    eer: float
    min_dcf: float
    det_points: tuple[tuple[float, float], ...]  # (p_fa, p_miss) per threshold
    threshold_at_eer: float


def score_baseline(enrolled, test: np.ndarray, whitener: Whitener) -> float:
    """Cosine similarity between whitened, length-normalized vectors.

    Multi-session enrollment: whiten each enrolled vector, average, then
    length-normalize; a single enrolled vector reduces to the plain
    single-session score.
    """
    enrolled = np.atleast_2d(np.asarray(enrolled, dtype=float))
    if enrolled.shape[0] == 0:
        raise ValueError("no enrolled vectors")
    model_vec = length_normalize(
        average_embeddings([apply_whitener(whitener, e) for e in enrolled])
    )
    test_vec = length_normalize(apply_whitener(whitener, np.asarray(test, dtype=float)))
    return cosine_score(model_vec, test_vec)


def mean_var_normalize(scores) -> np.ndarray:
    """Shift/scale to zero mean and unit population variance."""
    x = np.asarray(scores, dtype=float)
    if x.size < 2:
        raise ValueError("need at least 2 scores to normalize")
    sd = x.std()
    if sd == 0.0:
        raise ValueError("zero-variance scores cannot be normalized")
    return (x - x.mean()) / sd


def fuse(scores_a: dict, scores_b: dict) -> dict:
    """Sum of per-system mean/variance-normalized scores, per trial.

    Both inputs map (model_id, test_utterance_id) to a score and must
    cover the identical trial set.
    """
    if set(scores_a) != set(scores_b):
        raise ValueError("fusion requires identical trial sets")
    keys = sorted(scores_a)
    na = mean_var_normalize([scores_a[k] for k in keys])
    nb = mean_var_normalize([scores_b[k] for k in keys])
    return {k: float(a + b) for k, a, b in zip(keys, na, nb)}


def _split_scores(scores, keys):
    s = np.asarray(scores, dtype=float)
    k = list(keys)
    if s.size != len(k):
        raise ValueError("scores and keys differ in length")
    tar = np.sort(s[[i for i, key in enumerate(k) if key == "target"]])
    non = np.sort(s[[i for i, key in enumerate(k) if key == "nontarget"]])
    if tar.size == 0 or non.size == 0:
        raise ValueError("need at least one target and one nontarget trial")
    return tar, non


def _operating_points(tar: np.ndarray, non: np.ndarray):
    """Thresholds (ascending) with P_miss and P_fa at each."""
    s = np.unique(np.concatenate([tar, non]))
    thr = np.concatenate(([-np.inf], (s[:-1] + s[1:]) / 2.0, [np.inf]))
    p_miss = np.searchsorted(tar, thr, side="left") / tar.size
    p_fa = (non.size - np.searchsorted(non, thr, side="left")) / non.size
    return thr, p_miss, p_fa


def det_points(scores, keys) -> list[tuple[float, float]]:
    """(p_fa, p_miss) at every swept threshold, in threshold order."""
    tar, non = _split_scores(scores, keys)
    _, p_miss, p_fa = _operating_points(tar, non)
    return list(zip(p_fa.tolist(), p_miss.tolist()))


def compute_eer(scores, keys) -> tuple[float, float]:
    """Equal error rate and its threshold.

    Interpolates linearly between the two adjacent operating points
    where the sign of (P_miss - P_fa) flips.
    """
    tar, non = _split_scores(scores, keys)
    thr, p_miss, p_fa = _operating_points(tar, non)
    diff = p_miss - p_fa
    i = int(np.argmax(diff >= 0.0))  # diff[0] = -1, so i >= 1 unless degenerate
    if diff[i] == 0.0:
        return float(p_miss[i]), float(thr[i])
    a = diff[i - 1] / (diff[i - 1] - diff[i])
    eer = p_miss[i - 1] + a * (p_miss[i] - p_miss[i - 1])
    if np.isfinite(thr[i - 1]) and np.isfinite(thr[i]):
        t = thr[i - 1] + a * (thr[i] - thr[i - 1])
    else:
        t = thr[i] if np.isfinite(thr[i]) else thr[i - 1]
    return float(eer), float(t)


def compute_min_dcf(
    scores,
    keys,
    c_miss: float = DCF_C_MISS,
    c_fa: float = DCF_C_FA,
    p_target: float = DCF_P_TARGET,
) -> tuple[float, float]:
    """Minimum of c_miss*p_target*P_miss + c_fa*(1-p_target)*P_fa over thresholds."""
    tar, non = _split_scores(scores, keys)
    thr, p_miss, p_fa = _operating_points(tar, non)
    dcf = c_miss * p_target * p_miss + c_fa * (1.0 - p_target) * p_fa
    i = int(np.argmin(dcf))
    return float(dcf[i]), float(thr[i])


def evaluate_trials(scores: dict, trials) -> EvalReport:
    """Full report for a scored trial list (keys must not be 'unknown')."""
    vals, keys = [], []
    for t in trials:
        pair = (t.model_id, t.test_utterance_id)
        if pair not in scores:
            raise ValueError(f"missing score for trial {pair}")
        vals.append(scores[pair])
        keys.append(t.key)
    eer, thr = compute_eer(vals, keys)
    min_dcf, _ = compute_min_dcf(vals, keys)
    pts = det_points(vals, keys)
    return EvalReport(eer, min_dcf, tuple(pts), thr)


def load_trials(path) -> list[Trial]:
    """Trial list: `<model_id> <test_utterance_id> <target|nontarget>` per line."""
    trials = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != 3 or fields[2] not in ("target", "nontarget"):
                raise ParseError(f"{path}:{lineno}: expected '<model> <test> <target|nontarget>'")
            trials.append(Trial(fields[0], fields[1], fields[2]))
    if not trials:
        raise ParseError(f"{path}: no trials found")
    return trials


def save_scores(scores: dict, path) -> None:
    """Score file: `<model_id> <test_utterance_id> <score>`, sorted by ids."""
    with open(path, "w") as fh:
        for (model_id, test_id) in sorted(scores):
            fh.write(f"{model_id} {test_id} {_fmt(scores[(model_id, test_id)])}\n")


def load_scores(path) -> dict:
    scores = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != 3:
                raise ParseError(f"{path}:{lineno}: expected '<model> <test> <score>'")
            try:
                scores[(fields[0], fields[1])] = float(fields[2])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: bad score field") from None
    return scores


def save_report(report: EvalReport, report_path, det_csv_path) -> None:
    """Structured report text plus a DET-point CSV for plotting."""
    with open(report_path, "w") as fh:
        fh.write(f"eer={_fmt(report.eer)} min_dcf={_fmt(report.min_dcf)}\n")
        fh.write(f"threshold_at_eer={_fmt(report.threshold_at_eer)}\n")
        # presentation only: EER as percent, minDCF scaled by 1e4
        fh.write(f"eer_pct={_fmt(100.0 * report.eer)} min_dcf_x1e4={_fmt(1e4 * report.min_dcf)}\n")
    with open(det_csv_path, "w") as fh:
        fh.write("p_fa,p_miss\n")
        for p_fa, p_miss in report.det_points:
            fh.write(f"{_fmt(p_fa)},{_fmt(p_miss)}\n")
