"""Losses and closed-form gradients defined directly on logit vectors.

The public functions operate on a single sample: a length-K vector of raw
class scores ``z`` (float64) plus an integer label. Batched counterparts
used by the training loop live at the bottom of the module and are exact
vectorizations of the per-sample formulas.

Numerical conventions that tests rely on:

* ``ls_loss``, ``maxsup_loss`` and ``mix_ls_loss`` are all computed as
  ``alpha * mean(v - z)`` for the appropriate reference logit ``v``. This
  makes the max-suppression value nonnegative by construction (each term
  ``max - z_k`` is >= 0 in floating point) and makes the label-smoothing
  and max-suppression values bit-identical whenever the label is the
  argmax, since they then run the same arithmetic on the same floats.
* argmax ties break to the lowest index everywhere.
* When differentiating, the comparison structure (argmax, the sets of
  logits below/above the label logit) is frozen at the evaluation point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = (
    "none",
    "ls",
    "maxsup",
    "reg_only",
    "err_only_mean",
    "err_max",
    "logit_penalty",
    "confidence_penalty",
    "ls_mixup",
)
ALPHA_KINDS = ("ls", "maxsup", "reg_only", "err_only_mean", "err_max", "ls_mixup")
BETA_KINDS = ("logit_penalty", "confidence_penalty")


@dataclass(frozen=True)
class RegularizerSpec:
    """Selects the regularizer added to hard cross-entropy and its weight.

    ``alpha`` is the smoothing weight used by the label-smoothing family
    (ls, maxsup, the ablation variants, ls_mixup); ``beta`` is the weight
    of the logit / confidence penalties. Only the weight relevant to
    ``kind`` is ever read.
    """

    kind: str
    alpha: float = 0.0
    beta: float = 0.1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown regularizer kind {self.kind!r}; expected one of {KINDS}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.beta < 0.0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")


@dataclass(frozen=True)
class MixTarget:
    """Pair of labels mixed with weight ``lam`` on the first one."""

    gt1: int
    gt2: int
    lam: float

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lam must lie in [0, 1], got {self.lam}")
        if self.gt1 < 0 or self.gt2 < 0:
            raise ValueError("mix target labels must be nonnegative class indices")


@dataclass(frozen=True)
class LossBreakdown:
    """Hard cross-entropy plus the decomposed regularizer value.

    ``reg_term`` / ``err_term`` are the two components of the
    label-smoothing value split over logits strictly below / strictly
    above the label logit (``m_count`` / ``n_count`` entries each; ties
    with the label logit contribute zero and are counted in neither).
    They are populated for kind ``ls`` and zero for every other kind.
    """

    ce_hard: float
    reg_term: float
    err_term: float
    regularizer_total: float
    total: float
    m_count: int
    n_count: int


def _check_logits(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.size < 2:
        raise ValueError(f"logits must be a 1-D vector with K >= 2, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise ValueError("logits must be finite")
    return z


def _check_label(gt, k: int) -> int:
    gt = int(gt)
    if not 0 <= gt < k:
        raise ValueError(f"label {gt} out of range for K={k}")
    return gt


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return alpha


def _check_probs(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 1 or q.size < 2:
        raise ValueError(f"probabilities must be a 1-D vector with K >= 2, got shape {q.shape}")
    if not np.all(np.isfinite(q)) or np.any(q <= 0.0):
        raise ValueError("probabilities must be finite and strictly positive")
    if abs(float(q.sum()) - 1.0) > 1e-9:
        raise ValueError(f"probabilities must sum to 1, got {float(q.sum())}")
    return q


def _logsumexp(z: np.ndarray) -> float:
    m = float(z.max())
    return m + float(np.log(np.exp(z - m).sum()))


def softmax(z) -> np.ndarray:
    """Stable softmax: exp(z - max) normalized to sum 1."""
    z = _check_logits(z)
    e = np.exp(z - z.max())
    return e / e.sum()


def smooth_label(gt: int, alpha: float, k: int) -> np.ndarray:
    """Soft target: (1 - alpha) on the label plus alpha/K spread uniformly."""
    alpha = _check_alpha(alpha)
    if k < 2:
        raise ValueError(f"K must be >= 2, got {k}")
    gt = _check_label(gt, k)
    s = np.full(k, alpha / k)
    s[gt] += 1.0 - alpha
    return s


def ce_hard(z, gt: int) -> float:
    """Cross-entropy against a one-hot label: logsumexp(z) - z[gt]."""
    z = _check_logits(z)
    gt = _check_label(gt, z.size)
    return _logsumexp(z) - float(z[gt])


def ce_soft(z, s) -> float:
    """Cross-entropy of softmax(z) against an arbitrary target distribution."""
    z = _check_logits(z)
    s = np.asarray(s, dtype=np.float64)
    if s.shape != z.shape:
        raise ValueError(f"target shape {s.shape} does not match logits shape {z.shape}")
    log_q = z - _logsumexp(z)
    return float(-(s * log_q).sum())


def _lead_over_mean(z: np.ndarray, v: float) -> float:
    # mean of (v - z_k); nonnegative whenever v >= every z_k
    return float(np.mean(v - z))


def ls_loss(z, gt: int, alpha: float) -> float:
    """Label-smoothing value on logits: alpha * (z[gt] - mean(z))."""
    z = _check_logits(z)
    gt = _check_label(gt, z.size)
    alpha = _check_alpha(alpha)
    return alpha * _lead_over_mean(z, z[gt])


def maxsup_loss(z, alpha: float) -> float:
    """Max-suppression value: alpha * (max(z) - mean(z)); always >= 0."""
    z = _check_logits(z)
    alpha = _check_alpha(alpha)
    return alpha * _lead_over_mean(z, z[int(np.argmax(z))])


def maxsup_label(q) -> np.ndarray:
    """One-hot vector at the top-1 prediction (ties break to lowest index)."""
    q = _check_probs(q)
    y = np.zeros(q.size)
    y[int(np.argmax(q))] = 1.0
    return y


def mix_ls_loss(z, mix: MixTarget, alpha: float) -> float:
    """Label-smoothing value for a lam-mixed pair of labels."""
    z = _check_logits(z)
    alpha = _check_alpha(alpha)
    gt1 = _check_label(mix.gt1, z.size)
    gt2 = _check_label(mix.gt2, z.size)
    v = mix.lam * z[gt1] + (1.0 - mix.lam) * z[gt2]
    return alpha * _lead_over_mean(z, v)


def ls_decompose(z, gt: int, alpha: float) -> LossBreakdown:
    """Split the label-smoothing value into its two signed components.

    ``reg_term = (alpha/K) * sum over z_m < z[gt] of (z[gt] - z_m)`` is
    nonnegative; ``err_term`` is the same sum over logits strictly above
    the label logit and is nonpositive. Entries exactly equal to ``z[gt]``
    contribute zero and belong to neither count.
    """
    z = _check_logits(z)
    gt = _check_label(gt, z.size)
    alpha = _check_alpha(alpha)
    k = z.size
    diffs = z[gt] - z
    below = diffs > 0.0
    above = diffs < 0.0
    reg = alpha / k * float(diffs[below].sum())
    err = alpha / k * float(diffs[above].sum())
    reg_total = ls_loss(z, gt, alpha)
    ce = ce_hard(z, gt)
    return LossBreakdown(
        ce_hard=ce,
        reg_term=reg,
        err_term=err,
        regularizer_total=reg_total,
        total=ce + reg_total,
        m_count=int(below.sum()),
        n_count=int(above.sum()),
    )


def ablation_loss(z, gt: int, alpha: float, kind: str) -> float:
    """One isolated component of label smoothing (reg_only, err_only_mean, err_max).

    reg_only / err_only_mean normalize by the size of their index set and
    are defined as 0 when that set is empty; err_max is
    alpha * (z[gt] - max(z)), which is 0 when the label logit is maximal.
    """
    z = _check_logits(z)
    gt = _check_label(gt, z.size)
    alpha = _check_alpha(alpha)
    diffs = z[gt] - z
    if kind == "reg_only":
        below = diffs > 0.0
        m = int(below.sum())
        return 0.0 if m == 0 else alpha / m * float(diffs[below].sum())
    if kind == "err_only_mean":
        above = diffs < 0.0
        n = int(above.sum())
        return 0.0 if n == 0 else alpha / n * float(diffs[above].sum())
    if kind == "err_max":
        return alpha * float(z[gt] - z[int(np.argmax(z))])
    raise ValueError(f"unknown ablation kind {kind!r}")


def penalty_loss(z, q, spec: RegularizerSpec) -> float:
    """Logit penalty (beta/2 * ||z||^2) or confidence penalty (-beta * entropy(q))."""
    if spec.kind not in BETA_KINDS:
        raise ValueError(f"penalty_loss requires kind in {BETA_KINDS}, got {spec.kind!r}")
    z = _check_logits(z)
    if spec.kind == "logit_penalty":
        return 0.5 * spec.beta * float(z @ z)
    q = _check_probs(q)
    entropy = float(-(q * np.log(q)).sum())
    return -spec.beta * entropy


def _centered_bump(k: int, alpha: float) -> np.ndarray:
    # alpha * (e_idx - 1/K) is assembled as a -alpha/K baseline plus +alpha
    # bumps at the chosen indices so all kinds share one arithmetic path.
    return np.full(k, -alpha / k)


def total_loss(z, gt: int | None, spec: RegularizerSpec, mix: MixTarget | None = None) -> LossBreakdown:
    """Hard cross-entropy plus the configured regularizer, as a breakdown.

    ``mix`` must be given exactly when ``spec.kind == "ls_mixup"``; the mix
    targets then replace ``gt`` and the hard term becomes the lam-weighted
    mix of the two hard cross-entropies.
    """
    z = _check_logits(z)
    if (mix is not None) != (spec.kind == "ls_mixup"):
        raise ValueError("mix targets must be passed exactly when kind is 'ls_mixup'")

    if spec.kind == "ls_mixup":
        ce = mix.lam * ce_hard(z, mix.gt1) + (1.0 - mix.lam) * ce_hard(z, mix.gt2)
        reg_total = mix_ls_loss(z, mix, spec.alpha)
        return LossBreakdown(ce, 0.0, 0.0, reg_total, ce + reg_total, 0, 0)

    gt = _check_label(gt, z.size)
    if spec.kind == "ls":
        return ls_decompose(z, gt, spec.alpha)

    ce = ce_hard(z, gt)
    if spec.kind == "none":
        reg_total = 0.0
    elif spec.kind == "maxsup":
        reg_total = maxsup_loss(z, spec.alpha)
    elif spec.kind in ("reg_only", "err_only_mean", "err_max"):
        reg_total = ablation_loss(z, gt, spec.alpha, spec.kind)
    else:  # logit_penalty / confidence_penalty
        reg_total = penalty_loss(z, softmax(z), spec)
    return LossBreakdown(ce, 0.0, 0.0, reg_total, ce + reg_total, 0, 0)


def grad_total(z, gt: int | None, spec: RegularizerSpec, mix: MixTarget | None = None) -> np.ndarray:
    """Closed-form gradient of ``total_loss`` with respect to the logits.

    The softmax part is q - y. The regularizer part treats argmax and the
    below/above partitions as locally constant, so for the smoothing
    family it is a mean-centered bump: -alpha/K everywhere plus +alpha at
    the penalized index (the label for ls, the argmax for maxsup, the
    lam-split pair for ls_mixup).
    """
    z = _check_logits(z)
    if (mix is not None) != (spec.kind == "ls_mixup"):
        raise ValueError("mix targets must be passed exactly when kind is 'ls_mixup'")
    k = z.size
    q = softmax(z)

    if spec.kind == "ls_mixup":
        gt1 = _check_label(mix.gt1, k)
        gt2 = _check_label(mix.gt2, k)
        g = q.copy()
        g[gt1] -= mix.lam
        g[gt2] -= 1.0 - mix.lam
        extra = _centered_bump(k, spec.alpha)
        extra[gt1] += mix.lam * spec.alpha
        extra[gt2] += (1.0 - mix.lam) * spec.alpha
        return g + extra

    gt = _check_label(gt, k)
    g = q.copy()
    g[gt] -= 1.0

    if spec.kind == "none":
        return g
    if spec.kind == "ls":
        extra = _centered_bump(k, spec.alpha)
        extra[gt] += spec.alpha
    elif spec.kind == "maxsup":
        extra = _centered_bump(k, spec.alpha)
        extra[int(np.argmax(z))] += spec.alpha
    elif spec.kind == "reg_only":
        extra = np.zeros(k)
        below = (z[gt] - z) > 0.0
        m = int(below.sum())
        if m > 0:
            extra[below] -= spec.alpha / m
            extra[gt] += spec.alpha
    elif spec.kind == "err_only_mean":
        extra = np.zeros(k)
        above = (z - z[gt]) > 0.0
        n = int(above.sum())
        if n > 0:
            extra[above] -= spec.alpha / n
            extra[gt] += spec.alpha
    elif spec.kind == "err_max":
        extra = np.zeros(k)
        extra[gt] += spec.alpha
        extra[int(np.argmax(z))] -= spec.alpha
    elif spec.kind == "logit_penalty":
        extra = spec.beta * z
    else:  # confidence_penalty: gradient of -beta * entropy through softmax
        log_q = np.log(q)
        entropy = float(-(q * log_q).sum())
        extra = spec.beta * q * (log_q + entropy)
    return g + extra


# ---------------------------------------------------------------------------
# Batched counterparts used by the training loop. Z is (B, K), labels (B,).
# These reproduce the per-sample formulas exactly (same baseline-plus-bump
# construction), which keeps e.g. ls-with-alpha-0 bitwise identical to none.
# ---------------------------------------------------------------------------


def batch_softmax(Z: np.ndarray) -> np.ndarray:
    e = np.exp(Z - Z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def batch_ce_hard(Z: np.ndarray, labels: np.ndarray) -> np.ndarray:
    m = Z.max(axis=1)
    lse = m + np.log(np.exp(Z - m[:, None]).sum(axis=1))
    return lse - Z[np.arange(Z.shape[0]), labels]


def batch_ls_split(Z: np.ndarray, labels: np.ndarray, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-row (reg_term, err_term) of the label-smoothing decomposition."""
    k = Z.shape[1]
    z_gt = Z[np.arange(Z.shape[0]), labels][:, None]
    diffs = z_gt - Z
    reg = alpha / k * np.where(diffs > 0.0, diffs, 0.0).sum(axis=1)
    err = alpha / k * np.where(diffs < 0.0, diffs, 0.0).sum(axis=1)
    return reg, err


def batch_loss_grad(
    Z: np.ndarray,
    labels: np.ndarray,
    spec: RegularizerSpec,
    mix_partner: np.ndarray | None = None,
    mix_lam: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample total losses (B,) and logit gradients (B, K) for a batch.

    For ``ls_mixup``, ``labels`` holds the first label of each pair and
    ``mix_partner`` / ``mix_lam`` the second label and mixing weight.
    """
    b, k = Z.shape
    rows = np.arange(b)
    q = batch_softmax(Z)

    if spec.kind == "ls_mixup":
        if mix_partner is None or mix_lam is None:
            raise ValueError("ls_mixup requires mix_partner and mix_lam")
        ce = mix_lam * batch_ce_hard(Z, labels) + (1.0 - mix_lam) * batch_ce_hard(Z, mix_partner)
        v = mix_lam * Z[rows, labels] + (1.0 - mix_lam) * Z[rows, mix_partner]
        reg = spec.alpha * np.mean(v[:, None] - Z, axis=1)
        g = q.copy()
        np.add.at(g, (rows, labels), -mix_lam)
        np.add.at(g, (rows, mix_partner), -(1.0 - mix_lam))
        extra = np.full((b, k), -spec.alpha / k)
        np.add.at(extra, (rows, labels), spec.alpha * mix_lam)
        np.add.at(extra, (rows, mix_partner), spec.alpha * (1.0 - mix_lam))
        return ce + reg, g + extra

    ce = batch_ce_hard(Z, labels)
    g = q.copy()
    g[rows, labels] -= 1.0

    if spec.kind == "none":
        return ce, g

    z_gt = Z[rows, labels]
    if spec.kind == "ls":
        reg = spec.alpha * np.mean(z_gt[:, None] - Z, axis=1)
        extra = np.full((b, k), -spec.alpha / k)
        extra[rows, labels] += spec.alpha
    elif spec.kind == "maxsup":
        top = np.argmax(Z, axis=1)
        z_top = Z[rows, top]
        reg = spec.alpha * np.mean(z_top[:, None] - Z, axis=1)
        extra = np.full((b, k), -spec.alpha / k)
        extra[rows, top] += spec.alpha
    elif spec.kind == "reg_only":
        diffs = z_gt[:, None] - Z
        below = diffs > 0.0
        m = below.sum(axis=1)
        safe_m = np.maximum(m, 1)
        reg = np.where(m > 0, spec.alpha / safe_m * np.where(below, diffs, 0.0).sum(axis=1), 0.0)
        extra = np.where(below, -(spec.alpha / safe_m)[:, None], 0.0)
        extra[rows, labels] += np.where(m > 0, spec.alpha, 0.0)
    elif spec.kind == "err_only_mean":
        diffs = z_gt[:, None] - Z
        above = diffs < 0.0
        n = above.sum(axis=1)
        safe_n = np.maximum(n, 1)
        reg = np.where(n > 0, spec.alpha / safe_n * np.where(above, diffs, 0.0).sum(axis=1), 0.0)
        extra = np.where(above, -(spec.alpha / safe_n)[:, None], 0.0)
        extra[rows, labels] += np.where(n > 0, spec.alpha, 0.0)
    elif spec.kind == "err_max":
        top = np.argmax(Z, axis=1)
        reg = spec.alpha * (z_gt - Z[rows, top])
        extra = np.zeros((b, k))
        extra[rows, labels] += spec.alpha
        np.add.at(extra, (rows, top), -spec.alpha)
    elif spec.kind == "logit_penalty":
        reg = 0.5 * spec.beta * (Z * Z).sum(axis=1)
        extra = spec.beta * Z
    elif spec.kind == "confidence_penalty":
        log_q = np.log(q)
        entropy = -(q * log_q).sum(axis=1)
        reg = -spec.beta * entropy
        extra = spec.beta * q * (log_q + entropy[:, None])
    else:
        raise ValueError(f"unknown regularizer kind {spec.kind!r}")
    return ce + reg, g + extra
