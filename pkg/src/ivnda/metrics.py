"""Detection metrics: DET curves, equal error rate, minimum detection cost.

Conventions: a trial is *accepted* when its score is greater than or equal
to the threshold.  Sweeping the threshold over the distinct score values
(plus the reject-all end) traces the DET curve from (P_fa = 1, P_miss = 0)
to (0, 1); P_fa is non-increasing and P_miss non-decreasing along it.
The EER is found by linear interpolation between the two operating points
bracketing P_fa = P_miss.  The detection cost is normalised by the best
trivial system, so minDCF is at most 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError, InsufficientDataError, ShapeError


@dataclass
class DcfParams:
    """Detection cost function parameters."""

    cost_miss: float = 1.0
    cost_fa: float = 1.0
    p_target: float = 0.01

    def __post_init__(self) -> None:
        if not 0.0 < self.p_target < 1.0:
            raise ValueError("p_target must be in (0, 1)")
        if self.cost_miss <= 0 or self.cost_fa <= 0:
            raise ValueError("costs must be positive")


# Operating points used in published evaluations around 2008/2010.
DCF_PRESETS = {
    "sre08": DcfParams(cost_miss=10.0, cost_fa=1.0, p_target=0.01),
    "sre10": DcfParams(cost_miss=1.0, cost_fa=1.0, p_target=0.001),
}


@dataclass
class TrialSet:
    """Scored trials with boolean target labels."""

    scores: np.ndarray   # (K,)
    targets: np.ndarray  # (K,) True = same-speaker trial

    def __post_init__(self) -> None:
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=bool)
        if self.scores.ndim != 1 or self.scores.shape != self.targets.shape:
            raise ShapeError("scores and targets must be aligned 1-D arrays")
        if self.scores.size == 0:
            raise EmptyInputError("empty trial set")
        if not np.isfinite(self.scores).all():
            raise ShapeError("scores must be finite")
        if not self.targets.any() or self.targets.all():
            raise InsufficientDataError(
                "trial set needs at least one target and one non-target"
            )

    @property
    def num_trials(self) -> int:
        return self.scores.size


def _operating_points(trials: TrialSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(P_fa, P_miss, threshold) at every distinct score plus the ends.

    The first point is accept-everything (threshold below every score); the
    last is reject-everything (threshold above every score, represented as
    +inf).
    """
    target_scores = np.sort(trials.scores[trials.targets])
    nontarget_scores = np.sort(trials.scores[~trials.targets])
    n_t = target_scores.size
    n_n = nontarget_scores.size
    thresholds = np.unique(trials.scores)
    # Accepted iff score >= threshold.
    misses = np.searchsorted(target_scores, thresholds, side="left")
    false_accepts = n_n - np.searchsorted(nontarget_scores, thresholds, side="left")
    p_miss = np.concatenate([[0.0], misses / n_t, [1.0]])
    p_fa = np.concatenate([[1.0], false_accepts / n_n, [0.0]])
    theta = np.concatenate(
        [[thresholds[0] - 1.0], thresholds, [np.inf]]
    )
    # The accept-everything point duplicates the lowest threshold's point.
    keep = np.ones(p_fa.size, dtype=bool)
    keep[0] = not (p_fa[1] == 1.0 and p_miss[1] == 0.0)
    return p_fa[keep], p_miss[keep], theta[keep]


def det_points(trials: TrialSet) -> np.ndarray:
    """DET curve as an array of (P_fa, P_miss) rows.

    Runs from (1, 0) to (0, 1); P_fa is non-increasing and P_miss
    non-decreasing row to row.
    """
    p_fa, p_miss, _ = _operating_points(trials)
    return np.column_stack([p_fa, p_miss])


def compute_eer(trials: TrialSet) -> tuple[float, float]:
    """(EER, threshold): the rate where P_miss and P_fa cross.

    The crossing rarely falls exactly on an operating point, so both the
    rate and its threshold are linearly interpolated between the two
    bracketing points.
    """
    p_fa, p_miss, theta = _operating_points(trials)
    diff = p_miss - p_fa
    # diff is non-decreasing, from -1 (accept all) to +1 (reject all).
    hi = int(np.searchsorted(diff, 0.0, side="left"))
    if diff[hi] == 0.0:
        return float(p_fa[hi]), float(min(theta[hi], np.max(trials.scores)))
    lo = hi - 1
    frac = -diff[lo] / (diff[hi] - diff[lo])
    eer = p_fa[lo] + frac * (p_fa[lo + 1] - p_fa[lo])
    # Interpolating "p_miss at the crossing" instead gives the same value:
    # p_miss - p_fa is zero at the crossing by construction.
    lo_theta = theta[lo]
    hi_theta = theta[hi] if np.isfinite(theta[hi]) else float(np.max(trials.scores))
    threshold = lo_theta + frac * (hi_theta - lo_theta)
    return float(eer), float(threshold)


def compute_dcf(p_miss: float, p_fa: float, params: DcfParams) -> float:
    """Normalised detection cost at one operating point."""
    raw = params.cost_miss * p_miss * params.p_target + params.cost_fa * p_fa * (
        1.0 - params.p_target
    )
    best_trivial = min(
        params.cost_miss * params.p_target, params.cost_fa * (1.0 - params.p_target)
    )
    return raw / best_trivial


def compute_min_dcf(trials: TrialSet, params: DcfParams) -> tuple[float, float]:
    """(minDCF, threshold): minimum normalised cost over all thresholds.

    The sweep covers every distinct score plus the reject-all end, i.e. the
    full DET curve; ties go to the lowest threshold.
    """
    p_fa, p_miss, theta = _operating_points(trials)
    costs = np.array(
        [compute_dcf(pm, pf, params) for pf, pm in zip(p_fa, p_miss)]
    )
    best = int(np.argmin(costs))
    threshold = theta[best] if np.isfinite(theta[best]) else float(np.max(trials.scores))
    return float(costs[best]), float(threshold)


def det_csv(trials: TrialSet) -> str:
    """DET curve as CSV text with a `p_fa,p_miss` header."""
    lines = ["p_fa,p_miss"]
    for p_fa, p_miss in det_points(trials):
        lines.append(f"{p_fa:.10g},{p_miss:.10g}")
    return "\n".join(lines) + "\n"


def det_svg(trials: TrialSet, size: int = 480) -> str:
    """A minimal standalone SVG rendering of the DET curve.

    Both axes show error probability on a log scale clipped to
    [1e-4, 1]; the curve is a single polyline.
    """
    points = det_points(trials)
    lo, hi = 1e-4, 1.0
    margin = 48

    def to_xy(p_fa: float, p_miss: float) -> tuple[float, float]:
        fx = (np.log10(max(p_fa, lo)) - np.log10(lo)) / (np.log10(hi) - np.log10(lo))
        fy = (np.log10(max(p_miss, lo)) - np.log10(lo)) / (np.log10(hi) - np.log10(lo))
        x = margin + fx * (size - 2 * margin)
        y = size - margin - fy * (size - 2 * margin)
        return x, y

    coords = " ".join(
        f"{x:.2f},{y:.2f}" for x, y in (to_xy(pf, pm) for pf, pm in points)
    )
    grid_lines = []
    for decade in (1e-3, 1e-2, 1e-1, 1.0):
        x, _ = to_xy(decade, lo)
        _, y = to_xy(lo, decade)
        grid_lines.append(
            f'<line x1="{x:.2f}" y1="{margin}" x2="{x:.2f}" y2="{size - margin}" '
            f'stroke="#ddd"/>'
        )
        grid_lines.append(
            f'<line x1="{margin}" y1="{y:.2f}" x2="{size - margin}" y2="{y:.2f}" '
            f'stroke="#ddd"/>'
        )
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">\n'
        f'<rect width="{size}" height="{size}" fill="white"/>\n'
        + "\n".join(grid_lines)
        + f'\n<polyline points="{coords}" fill="none" stroke="#336" '
        f'stroke-width="1.5"/>\n'
        f'<text x="{size // 2}" y="{size - 12}" text-anchor="middle" '
        f'font-size="12">false alarm probability</text>\n'
        f'<text x="14" y="{size // 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {size // 2})">miss probability</text>\n'
        f"</svg>\n"
    )
