"""Total-variability subspace training and i-vector extraction.

Each recording's centered first-order statistics are modelled as

    f~  ~  N( N~ T w,  N~ Sigma ),      w ~ N(0, I_R)

where ``N~`` expands the per-component counts across feature dimensions,
``T`` is the (G*D, R) subspace and ``Sigma`` the per-component diagonal
residual covariances.  Training is EM over the latent ``w``; extraction
returns the posterior mean

    w_hat = L^{-1} T' Sigma^{-1} f~,      L = I + T' Sigma^{-1} N~ T,

with ``L`` required to be positive definite (its Cholesky factor is the
assertion).  The per-iteration objective is the exact marginal
log-likelihood of the statistics, which is non-decreasing over iterations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import (
    ContractError,
    DegenerateDataError,
    NumericError,
    RankError,
    ShapeError,
)
from .stats import BwStats
from .ubm import DiagonalGmm

log = logging.getLogger(__name__)

# Callback invoked once per EM iteration with (iteration, model snapshot
# *before* the update, total marginal log-likelihood of that snapshot).
IterationCallback = Callable[[int, "TvModel", float], None]


@dataclass
class TvModel:
    """Total-variability subspace with residual covariances."""

    t_matrix: np.ndarray   # (G * D, R); rows grouped by component
    sigma: np.ndarray      # (G, D) diagonal residual variances
    rank: int

    def __post_init__(self) -> None:
        self.t_matrix = np.asarray(self.t_matrix, dtype=np.float64)
        self.sigma = np.asarray(self.sigma, dtype=np.float64)
        g, d = self.sigma.shape
        if self.t_matrix.shape != (g * d, self.rank):
            raise ShapeError(
                f"T must be ({g * d}, {self.rank}), got {self.t_matrix.shape}"
            )
        if np.any(self.sigma <= 0):
            raise ShapeError("residual variances must be strictly positive")

    @property
    def num_components(self) -> int:
        return self.sigma.shape[0]

    @property
    def dim(self) -> int:
        return self.sigma.shape[1]


@dataclass
class IVector:
    """Posterior-mean subspace coordinates of one recording."""

    w: np.ndarray
    recording_id: str = ""

    def __post_init__(self) -> None:
        self.w = np.asarray(self.w, dtype=np.float64)
        if self.w.ndim != 1:
            raise ShapeError("i-vector must be 1-D")

    @property
    def rank(self) -> int:
        return self.w.shape[0]


def _check_stats(stats: Sequence[BwStats], g: int, d: int) -> None:
    for s in stats:
        if not s.centered:
            raise ContractError(
                f"recording {s.recording_id!r}: statistics must be centered"
            )
        if s.num_components != g or s.dim != d:
            raise ShapeError(
                f"recording {s.recording_id!r}: stats shape "
                f"({s.num_components}, {s.dim}) does not match model ({g}, {d})"
            )


def _posterior(
    t_matrix: np.ndarray,
    gram: np.ndarray,
    t_over_sigma: np.ndarray,
    n: np.ndarray,
    f_flat: np.ndarray,
    rank: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """(E[w], Cov[w], b, logdet L) for one recording."""
    l_mat = np.eye(rank) + np.einsum("g,grs->rs", n, gram)
    b = t_over_sigma.T @ f_flat
    try:
        cho = cho_factor(l_mat, lower=True)
    except LinAlgError as exc:
        raise NumericError("i-vector posterior precision is not positive definite") from exc
    ew = cho_solve(cho, b)
    cov = cho_solve(cho, np.eye(rank))
    logdet_l = 2.0 * float(np.log(np.diag(cho[0])).sum())
    return ew, cov, b, logdet_l


def _session_ll(
    s: BwStats,
    sigma: np.ndarray,
    log_sigma_rows: np.ndarray,
    b: np.ndarray,
    ew: np.ndarray,
    logdet_l: float,
) -> float:
    active = s.n > 0
    d = sigma.shape[1]
    if active.any():
        logdet_ns = float(
            (d * np.log(s.n[active]) + log_sigma_rows[active]).sum()
        )
        quad_f = float(
            np.sum(s.f[active] ** 2 / sigma[active] / s.n[active, None])
        )
    else:
        logdet_ns = 0.0
        quad_f = 0.0
    m_active = d * int(active.sum())
    return -0.5 * (
        m_active * np.log(2.0 * np.pi)
        + logdet_ns
        + logdet_l
        + quad_f
        - float(b @ ew)
    )


def session_log_likelihood(stats: BwStats, model: TvModel) -> float:
    """Exact marginal log-likelihood of one recording's centered statistics."""
    _check_stats([stats], model.num_components, model.dim)
    g, d, r = model.num_components, model.dim, model.rank
    sigma_flat = model.sigma.reshape(-1)
    t_over_sigma = model.t_matrix / sigma_flat[:, None]
    gram = np.einsum(
        "gdr,gds->grs",
        model.t_matrix.reshape(g, d, r),
        t_over_sigma.reshape(g, d, r),
    )
    ew, _, b, logdet_l = _posterior(
        model.t_matrix, gram, t_over_sigma, stats.n, stats.f.reshape(-1), r
    )
    log_sigma_rows = np.log(model.sigma).sum(axis=1)
    return _session_ll(stats, model.sigma, log_sigma_rows, b, ew, logdet_l)


def tv_log_likelihood(stats: Sequence[BwStats], model: TvModel) -> float:
    """Total marginal log-likelihood over a collection of recordings."""
    return float(sum(session_log_likelihood(s, model) for s in stats))


def train_tv(
    stats: Sequence[BwStats],
    gmm: DiagonalGmm,
    rank: int,
    iters: int = 15,
    seed: int = 0,
    reestimate_sigma: bool = False,
    on_iteration: IterationCallback | None = None,
) -> TvModel:
    """Train the total-variability subspace by EM.

    The subspace is initialised from a seeded standard-normal draw (scaled
    well below the residual standard deviations; the first M-step rescales
    it to the data).  Residual covariances start from the UBM variances and
    are only re-estimated when `reestimate_sigma` is set.  `on_iteration`
    observes each iteration's pre-update model and its total marginal
    log-likelihood; the sequence it sees is non-decreasing.
    """
    g, d = gmm.num_components, gmm.dim
    m = g * d
    if rank < 1 or rank > m:
        raise RankError(f"rank must be in [1, {m}], got {rank}")
    if len(stats) < rank:
        raise RankError(
            f"{len(stats)} recordings cannot support a rank-{rank} subspace"
        )
    _check_stats(stats, g, d)
    if max(float(np.abs(s.f).max(initial=0.0)) for s in stats) == 0.0:
        raise DegenerateDataError(
            "all first-order statistics are zero; the subspace is unidentifiable"
        )

    sigma0 = gmm.variances.copy()
    sigma_floor = 1e-3 * sigma0
    rng = np.random.default_rng(seed)
    t_matrix = rng.standard_normal((m, rank)) * (0.01 * np.sqrt(sigma0.mean()))
    sigma = sigma0.copy()

    n_all = np.stack([s.n for s in stats])          # (S, G)
    f_all = np.stack([s.f.reshape(-1) for s in stats])  # (S, M)
    active_counts = (n_all > 0).sum(axis=0)         # per-component session counts

    for it in range(iters):
        sigma_flat = sigma.reshape(-1)
        t_over_sigma = t_matrix / sigma_flat[:, None]
        gram = np.einsum(
            "gdr,gds->grs",
            t_matrix.reshape(g, d, rank),
            t_over_sigma.reshape(g, d, rank),
        )
        log_sigma_rows = np.log(sigma).sum(axis=1)

        c_acc = np.zeros((m, rank))
        a_acc = np.zeros((g, rank, rank))
        total_ll = 0.0
        for s_idx, s in enumerate(stats):
            ew, cov, b, logdet_l = _posterior(
                t_matrix, gram, t_over_sigma, n_all[s_idx], f_all[s_idx], rank
            )
            eww = cov + np.outer(ew, ew)
            c_acc += np.outer(f_all[s_idx], ew)
            a_acc += n_all[s_idx][:, None, None] * eww[None]
            total_ll += _session_ll(
                s, sigma, log_sigma_rows, b, ew, logdet_l
            )

        if on_iteration is not None:
            on_iteration(it, TvModel(t_matrix.copy(), sigma.copy(), rank), total_ll)

        t_new = np.empty_like(t_matrix)
        c_blocks = c_acc.reshape(g, d, rank)
        for comp in range(g):
            try:
                cho = cho_factor(a_acc[comp], lower=True)
                t_new[comp * d : (comp + 1) * d] = cho_solve(
                    cho, c_blocks[comp].T
                ).T
            except LinAlgError:
                # Unobserved or near-unobserved component: least-squares keeps
                # the update defined (typically zero rows).
                sol, *_ = np.linalg.lstsq(a_acc[comp], c_blocks[comp].T, rcond=None)
                t_new[comp * d : (comp + 1) * d] = sol.T
        t_matrix = t_new

        if reestimate_sigma:
            # Exact M-step under the session model, using only the E-step
            # accumulators (no frame-level second-order statistics needed):
            #   sigma_gd = mean over sessions with n_g > 0 of
            #              E[(f~ - n T w)^2] / n
            # which telescopes to the closed form below.
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(
                    (n_all > 0)[:, :, None],
                    f_all.reshape(len(stats), g, d) ** 2
                    / np.maximum(n_all, 1e-300)[:, :, None],
                    0.0,
                )
            f2_over_n = ratios.sum(axis=0)
            t_blocks = t_matrix.reshape(g, d, rank)
            cross = np.einsum("gdr,gdr->gd", c_blocks, t_blocks)
            quad = np.einsum("gdr,grs,gds->gd", t_blocks, a_acc, t_blocks)
            counts = np.maximum(active_counts, 1)[:, None]
            sigma_new = (f2_over_n - 2.0 * cross + quad) / counts
            keep = active_counts == 0
            sigma = np.maximum(sigma_new, sigma_floor)
            if keep.any():
                sigma[keep] = sigma0[keep]

        log.debug("tv iteration %d: log-likelihood %.6f", it, total_ll)

    return TvModel(t_matrix=t_matrix, sigma=sigma, rank=rank)


def extract_ivector(stats: BwStats, model: TvModel) -> IVector:
    """Posterior-mean i-vector of one recording's centered statistics."""
    _check_stats([stats], model.num_components, model.dim)
    g, d, r = model.num_components, model.dim, model.rank
    sigma_flat = model.sigma.reshape(-1)
    t_over_sigma = model.t_matrix / sigma_flat[:, None]
    gram = np.einsum(
        "gdr,gds->grs",
        model.t_matrix.reshape(g, d, r),
        t_over_sigma.reshape(g, d, r),
    )
    ew, _, _, _ = _posterior(
        model.t_matrix, gram, t_over_sigma, stats.n, stats.f.reshape(-1), r
    )
    return IVector(w=ew, recording_id=stats.recording_id)


def extract_ivectors(stats: Sequence[BwStats], model: TvModel) -> list[IVector]:
    """Extract i-vectors for many recordings (shared precomputation)."""
    if not stats:
        return []
    _check_stats(stats, model.num_components, model.dim)
    g, d, r = model.num_components, model.dim, model.rank
    sigma_flat = model.sigma.reshape(-1)
    t_over_sigma = model.t_matrix / sigma_flat[:, None]
    gram = np.einsum(
        "gdr,gds->grs",
        model.t_matrix.reshape(g, d, r),
        t_over_sigma.reshape(g, d, r),
    )
    out = []
    for s in stats:
        ew, _, _, _ = _posterior(
            model.t_matrix, gram, t_over_sigma, s.n, s.f.reshape(-1), r
        )
        out.append(IVector(w=ew, recording_id=s.recording_id))
    return out
