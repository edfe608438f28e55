"""Stage orchestration shared by the command-line tools.

Each stage function loads its input artifacts, validates the provenance
fingerprints (mixing artifacts produced under different configurations is a
contract error), runs the corresponding module, and writes the output
artifact with its own fingerprint and stage metadata.

Fingerprints hash a stage's configuration subset together with the
fingerprints of its upstream artifacts — not file contents — so artifacts
produced by the *same* configuration from different data splits (train /
enroll / test) are interchangeable where that is meaningful, while any
configuration drift is caught immediately.
"""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Sequence, TypeVar

import numpy as np

from . import backend as backend_mod
from . import da as da_mod
from . import fileio, frontend, metrics, stats as stats_mod, synth, tv as tv_mod, ubm as ubm_mod
from .config import FrontendConfig, PipelineConfig
from .errors import (
    ContractError,
    DataError,
    InsufficientDataError,
    KeyMismatchError,
    NoSpeechError,
)
from .fileio import ManifestEntry, fingerprint

log = logging.getLogger(__name__)

T = TypeVar("T")
U = TypeVar("U")


def parallel_map(
    fn: Callable[[T], U], items: Sequence[T], workers: int
) -> list[U]:
    """Order-preserving map, threaded when `workers` exceeds one."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def resolve_path(base: Path, path: str) -> Path:
    """Resolve a manifest-relative path against the manifest's directory."""
    p = Path(path)
    return p if p.is_absolute() else base / p


def _cfg_dict(cfg) -> dict:
    return dataclasses.asdict(cfg)


def frontend_fingerprint(cfg: FrontendConfig) -> int:
    return fingerprint("frontend", _cfg_dict(cfg))


# --- feature extraction ---------------------------------------------------


def compute_features(
    entry: ManifestEntry, base_dir: Path, cfg: FrontendConfig
) -> tuple[frontend.FeatureMatrix, list[str]]:
    """Full frontend chain for one manifest entry.

    Returns the features and the processing chain actually applied (recorded
    in archive metadata): mfcc, deltas, sad or sad-override, cms, fmllr.
    """
    if not entry.audio_path:
        raise DataError(f"recording {entry.recording_id!r} has no audio path")
    audio = frontend.read_wav(resolve_path(base_dir, entry.audio_path))
    chain = ["mfcc"]
    feats = frontend.compute_mfcc(audio, cfg)
    if cfg.include_deltas:
        feats = frontend.append_deltas(feats, cfg.delta_context)
        chain.append("deltas")
    if entry.sad_path:
        mask = frontend.load_sad_mask(
            resolve_path(base_dir, entry.sad_path),
            feats.num_frames,
            audio.sample_rate_hz,
            cfg,
        )
        chain.append("sad-override")
    else:
        mask = frontend.detect_speech(audio, cfg)
        chain.append("sad")
    feats = frontend.FeatureMatrix(
        frames=feats.frames, frame_shift_ms=feats.frame_shift_ms, speech_mask=mask
    )
    if not mask.any():
        raise NoSpeechError(
            f"recording {entry.recording_id!r} has no speech frames"
        )
    if cfg.apply_cms:
        feats = frontend.apply_cms(feats)
        chain.append("cms")
    fmllr_path = ""
    if entry.fmllr_path:
        fmllr_path = str(resolve_path(base_dir, entry.fmllr_path))
    elif cfg.fmllr_dir:
        candidate = Path(cfg.fmllr_dir) / f"{entry.recording_id}.fmllr"
        if candidate.exists():
            fmllr_path = str(candidate)
    if fmllr_path:
        feats = frontend.apply_fmllr(feats, frontend.load_fmllr(fmllr_path))
        chain.append("fmllr")
    return feats, chain


def extract_features_stage(
    manifest_path: Path,
    out_dir: Path,
    cfg: PipelineConfig,
) -> list[tuple[str, str]]:
    """Extract features for every manifest entry into `out_dir`.

    Returns a per-recording error report (empty when everything succeeded);
    successfully processed recordings are written even when others fail.
    """
    entries = fileio.read_manifest(manifest_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    base_dir = manifest_path.parent
    feat_fp = frontend_fingerprint(cfg.frontend)

    def work(entry: ManifestEntry) -> tuple[str, str]:
        try:
            feats, chain = compute_features(entry, base_dir, cfg.frontend)
            meta = {
                "stage": "features",
                "recording_id": entry.recording_id,
                "chain": chain,
                "config": _cfg_dict(cfg.frontend),
            }
            fileio.write_feature_record(
                fileio.feature_path(out_dir, entry.recording_id), feats, feat_fp, meta
            )
            return entry.recording_id, ""
        except FileNotFoundError as exc:
            return entry.recording_id, f"missing file: {exc}"
        except Exception as exc:  # per-recording isolation, reported upward
            return entry.recording_id, str(exc)

    results = parallel_map(work, entries, cfg.run.workers)
    return [(rec_id, err) for rec_id, err in results if err]


def load_features(
    feat_dir: Path, ids: Sequence[str]
) -> tuple[dict[str, frontend.FeatureMatrix], int]:
    """Load feature records for `ids`; all must share one fingerprint."""
    feat_fp: int | None = None
    out: dict[str, frontend.FeatureMatrix] = {}
    for rec_id in ids:
        path = fileio.feature_path(feat_dir, rec_id)
        if not path.exists():
            raise DataError(f"no feature record for recording {rec_id!r} in {feat_dir}")
        feats, fp, _ = fileio.read_feature_record(path)
        if feat_fp is None:
            feat_fp = fp
        elif fp != feat_fp:
            raise ContractError(
                f"feature record {rec_id!r} was produced under a different "
                f"configuration (fingerprint mismatch)"
            )
        out[rec_id] = feats
    if feat_fp is None:
        raise DataError("no recordings to load")
    return out, feat_fp


# --- model training stages ------------------------------------------------


def _ubm_config_subset(cfg: PipelineConfig) -> dict:
    return {
        "num_components": cfg.ubm.num_components,
        "iters_per_level": cfg.ubm.iters_per_level,
        "variance_floor_scale": cfg.ubm.variance_floor_scale,
    }


def train_ubm_stage(
    feat_dir: Path, manifest_path: Path, out_path: Path, cfg: PipelineConfig
) -> None:
    entries = fileio.read_manifest(manifest_path)
    features, feat_fp = load_features(feat_dir, [e.recording_id for e in entries])
    gmm = ubm_mod.train_gmm(
        [features[e.recording_id] for e in entries],
        cfg.ubm.num_components,
        iters_per_level=cfg.ubm.iters_per_level,
        variance_floor_scale=cfg.ubm.variance_floor_scale,
    )
    fp = fingerprint("ubm", _ubm_config_subset(cfg), {"features": feat_fp})
    meta = {
        "stage": "ubm",
        "config": _ubm_config_subset(cfg),
        "upstream": {"features": feat_fp},
    }
    fileio.write_gmm(out_path, gmm, fp, meta)


def train_supervised_ubm_stage(
    feat_dir: Path,
    manifest_path: Path,
    posterior_path: Path,
    out_path: Path,
    cfg: PipelineConfig,
) -> None:
    entries = fileio.read_manifest(manifest_path)
    features, feat_fp = load_features(feat_dir, [e.recording_id for e in entries])
    posteriors = ubm_mod.load_external_posteriors(
        posterior_path, cfg.ubm.num_components
    )
    missing = [e.recording_id for e in entries if e.recording_id not in posteriors]
    if missing:
        raise DataError(f"no external posteriors for recordings: {missing}")
    gmm = ubm_mod.train_supervised_gaussians(
        [features[e.recording_id] for e in entries],
        [posteriors[e.recording_id] for e in entries],
        cfg.ubm.num_components,
        variance_floor_scale=cfg.ubm.variance_floor_scale,
    )
    subset = {
        "num_components": cfg.ubm.num_components,
        "variance_floor_scale": cfg.ubm.variance_floor_scale,
        "external_posteriors": True,
    }
    fp = fingerprint("ubm", subset, {"features": feat_fp})
    meta = {"stage": "ubm", "config": subset, "upstream": {"features": feat_fp}}
    fileio.write_gmm(out_path, gmm, fp, meta)


def accumulate_stats_stage(
    feat_dir: Path,
    manifest_path: Path,
    ubm_path: Path,
    out_path: Path,
    cfg: PipelineConfig,
    posterior_path: Path | None = None,
) -> None:
    entries = fileio.read_manifest(manifest_path)
    features, feat_fp = load_features(feat_dir, [e.recording_id for e in entries])
    gmm, ubm_fp, ubm_meta = fileio.read_gmm(ubm_path)
    upstream_feat = ubm_meta.get("upstream", {}).get("features")
    if upstream_feat != feat_fp:
        raise ContractError(
            "UBM was trained on features with a different fingerprint than "
            f"{feat_dir} (expected {feat_fp}, model records {upstream_feat})"
        )
    external = None
    if posterior_path is not None:
        external = ubm_mod.load_external_posteriors(
            posterior_path, gmm.num_components
        )

    def work(entry: ManifestEntry) -> stats_mod.BwStats:
        feats = features[entry.recording_id]
        if external is not None:
            if entry.recording_id not in external:
                raise DataError(
                    f"no external posteriors for recording {entry.recording_id!r}"
                )
            post = external[entry.recording_id]
        else:
            post = ubm_mod.gmm_posteriors(gmm, feats, cfg.ubm.top_n)
        return stats_mod.accumulate_bw(feats, post, recording_id=entry.recording_id)

    all_stats = parallel_map(work, entries, cfg.run.workers)
    subset = {
        "top_n": cfg.ubm.top_n,
        "external_posteriors": posterior_path is not None,
    }
    fp = fingerprint("stats", subset, {"features": feat_fp, "ubm": ubm_fp})
    meta = {
        "stage": "stats",
        "config": subset,
        "upstream": {"features": feat_fp, "ubm": ubm_fp},
    }
    fileio.write_stats_archive(out_path, all_stats, fp, meta)


def _tv_config_subset(cfg: PipelineConfig) -> dict:
    return {
        "rank": cfg.tv.rank,
        "iters": cfg.tv.iters,
        "seed": cfg.tv.seed,
        "reestimate_sigma": cfg.tv.reestimate_sigma,
    }


def train_tv_stage(
    stats_path: Path, ubm_path: Path, out_path: Path, cfg: PipelineConfig
) -> None:
    all_stats, stats_fp, stats_meta = fileio.read_stats_archive(stats_path)
    gmm, ubm_fp, _ = fileio.read_gmm(ubm_path)
    if stats_meta.get("upstream", {}).get("ubm") != ubm_fp:
        raise ContractError(
            "statistics were accumulated against a different UBM "
            "(fingerprint mismatch)"
        )
    centered = [stats_mod.center_stats(s, gmm) for s in all_stats]
    model = tv_mod.train_tv(
        centered,
        gmm,
        rank=cfg.tv.rank,
        iters=cfg.tv.iters,
        seed=cfg.tv.seed,
        reestimate_sigma=cfg.tv.reestimate_sigma,
    )
    fp = fingerprint("tv", _tv_config_subset(cfg), {"stats": stats_fp, "ubm": ubm_fp})
    meta = {
        "stage": "tv",
        "config": _tv_config_subset(cfg),
        "upstream": {"stats": stats_fp, "ubm": ubm_fp},
    }
    fileio.write_tv_model(out_path, model, fp, meta)


def extract_ivectors_stage(
    stats_path: Path, ubm_path: Path, tv_path: Path, out_path: Path, cfg: PipelineConfig
) -> None:
    all_stats, stats_fp, stats_meta = fileio.read_stats_archive(stats_path)
    gmm, ubm_fp, _ = fileio.read_gmm(ubm_path)
    model, tv_fp, tv_meta = fileio.read_tv_model(tv_path)
    if stats_meta.get("upstream", {}).get("ubm") != ubm_fp:
        raise ContractError(
            "statistics were accumulated against a different UBM "
            "(fingerprint mismatch)"
        )
    if tv_meta.get("upstream", {}).get("stats") != stats_fp:
        raise ContractError(
            "subspace model was trained on statistics with a different "
            "fingerprint than this archive"
        )
    centered = [stats_mod.center_stats(s, gmm) for s in all_stats]
    ivectors = tv_mod.extract_ivectors(centered, model)
    fp = fingerprint("ivectors", {}, {"stats": stats_fp, "tv": tv_fp, "ubm": ubm_fp})
    meta = {
        "stage": "ivectors",
        "config": {},
        "upstream": {"stats": stats_fp, "tv": tv_fp, "ubm": ubm_fp},
    }
    fileio.write_ivector_archive(out_path, ivectors, fp, meta)


def _labels_for(
    ivectors: Sequence[tv_mod.IVector], manifest_path: Path, label_filter: str = ""
) -> da_mod.LabeledVectors:
    import re

    entries = {e.recording_id: e for e in fileio.read_manifest(manifest_path)}
    vectors, labels = [], []
    pattern = re.compile(label_filter) if label_filter else None
    for iv in ivectors:
        entry = entries.get(iv.recording_id)
        if entry is None:
            raise DataError(
                f"recording {iv.recording_id!r} is not in the manifest"
            )
        if not entry.speaker:
            raise DataError(
                f"recording {iv.recording_id!r} has no speaker label"
            )
        if pattern is not None and not pattern.search(entry.speaker):
            continue
        vectors.append(iv.w)
        labels.append(entry.speaker)
    if not vectors:
        raise InsufficientDataError("label filter left no training vectors")
    return da_mod.LabeledVectors(
        vectors=np.asarray(vectors), labels=np.asarray(labels)
    )


def _da_config_subset(cfg: PipelineConfig) -> dict:
    return {
        "method": cfg.da.method,
        "k": cfg.da.k,
        "alpha": cfg.da.alpha,
        "dim": cfg.da.dim,
        "all_pairs": cfg.da.all_pairs,
    }


def train_da_stage(
    ivector_path: Path,
    manifest_path: Path,
    out_path: Path,
    cfg: PipelineConfig,
    label_filter: str = "",
) -> None:
    ivectors, iv_fp, _ = fileio.read_ivector_archive(ivector_path)
    data = _labels_for(ivectors, manifest_path, label_filter)
    if cfg.da.method == "lda":
        proj = da_mod.compute_lda(data, cfg.da.dim)
    elif cfg.da.method == "nda":
        proj = da_mod.compute_nda(
            data,
            cfg.da.k,
            cfg.da.alpha,
            cfg.da.dim,
            one_vs_rest=not cfg.da.all_pairs,
        )
    else:
        raise ValueError(f"unknown DA method {cfg.da.method!r}")
    fp = fingerprint("da", _da_config_subset(cfg), {"ivectors": iv_fp})
    meta = {
        "stage": "da",
        "config": _da_config_subset(cfg),
        "upstream": {"ivectors": iv_fp},
    }
    fileio.write_projection(out_path, proj, fp, meta)


def train_plda_stage(
    ivector_path: Path,
    manifest_path: Path,
    projection_path: Path,
    out_plda: Path,
    out_normalizer: Path,
    cfg: PipelineConfig,
    label_filter: str = "",
) -> None:
    ivectors, iv_fp, _ = fileio.read_ivector_archive(ivector_path)
    proj, da_fp, da_meta = fileio.read_projection(projection_path)
    if da_meta.get("upstream", {}).get("ivectors") != iv_fp:
        raise ContractError(
            "projection was trained on i-vectors with a different fingerprint"
        )
    data = _labels_for(ivectors, manifest_path, label_filter)
    projected = da_mod.project(data.vectors, proj)
    normalizer = backend_mod.fit_normalizer(projected)
    normalized = backend_mod.normalize_rows(projected, normalizer)
    model = backend_mod.train_plda(
        da_mod.LabeledVectors(vectors=normalized, labels=data.labels),
        iters=cfg.plda.iters,
    )
    upstream = {"ivectors": iv_fp, "projection": da_fp}
    nz_fp = fingerprint("normalizer", {}, upstream)
    fileio.write_normalizer(
        out_normalizer,
        normalizer,
        nz_fp,
        {"stage": "normalizer", "config": {}, "upstream": upstream},
    )
    plda_fp = fingerprint("plda", {"iters": cfg.plda.iters}, upstream)
    fileio.write_plda(
        out_plda,
        model,
        plda_fp,
        {
            "stage": "plda",
            "config": {"iters": cfg.plda.iters},
            "upstream": upstream,
        },
    )


# --- scoring and evaluation ----------------------------------------------


def _check_scoring_chain(
    enroll_fp: int,
    test_fp: int,
    da_fp: int,
    da_meta: dict,
    nz_meta: dict,
    plda_meta: dict,
) -> None:
    if enroll_fp != test_fp:
        raise ContractError(
            "enroll and test i-vector archives have different fingerprints"
        )
    if da_meta.get("upstream", {}).get("ivectors") != enroll_fp:
        raise ContractError(
            "projection was trained on i-vectors with a different fingerprint "
            "than the archives being scored"
        )
    for name, meta in (("normalizer", nz_meta), ("PLDA model", plda_meta)):
        if meta.get("upstream", {}).get("projection") != da_fp:
            raise ContractError(
                f"{name} does not belong to this projection (fingerprint mismatch)"
            )


def score_stage(
    enroll_path: Path,
    test_path: Path,
    trials_path: Path,
    projection_path: Path,
    normalizer_path: Path,
    plda_path: Path,
    out_path: Path,
) -> list[str]:
    """Score a trial list; returns a report of unknown recording ids."""
    enroll_ivs, enroll_fp, _ = fileio.read_ivector_archive(enroll_path)
    test_ivs, test_fp, _ = fileio.read_ivector_archive(test_path)
    proj, da_fp, da_meta = fileio.read_projection(projection_path)
    normalizer, _, nz_meta = fileio.read_normalizer(normalizer_path)
    plda, _, plda_meta = fileio.read_plda(plda_path)
    _check_scoring_chain(enroll_fp, test_fp, da_fp, da_meta, nz_meta, plda_meta)
    trials = fileio.read_trials(trials_path)

    def prepare(ivs: Sequence[tv_mod.IVector]) -> tuple[dict[str, int], np.ndarray]:
        index = {iv.recording_id: i for i, iv in enumerate(ivs)}
        raw = np.stack([iv.w for iv in ivs]) if ivs else np.zeros((0, proj.input_dim))
        return index, backend_mod.normalize_rows(
            da_mod.project(raw, proj), normalizer
        )

    enroll_index, enroll_vecs = prepare(enroll_ivs)
    test_index, test_vecs = prepare(test_ivs)
    unknown = []
    e_idx, t_idx, kept = [], [], []
    for e_id, t_id in trials:
        if e_id not in enroll_index or t_id not in test_index:
            unknown.append(f"{e_id} {t_id}")
            continue
        e_idx.append(enroll_index[e_id])
        t_idx.append(test_index[t_id])
        kept.append((e_id, t_id))
    scores = backend_mod.score_pairs(
        plda,
        enroll_vecs,
        test_vecs,
        np.asarray(e_idx, dtype=np.intp),
        np.asarray(t_idx, dtype=np.intp),
    )
    fileio.write_scores(
        out_path, [(e, t, s) for (e, t), s in zip(kept, scores)]
    )
    return unknown


def evaluate_stage(
    scores_path: Path,
    key_path: Path,
    det_csv_path: Path | None = None,
    det_svg_path: Path | None = None,
) -> dict[str, float]:
    scores = fileio.read_scores(scores_path)
    key = fileio.read_key(key_path)
    values, targets = fileio.match_scores_to_key(scores, key)
    trials = metrics.TrialSet(scores=values, targets=targets)
    eer, eer_threshold = metrics.compute_eer(trials)
    dcf08, _ = metrics.compute_min_dcf(trials, metrics.DCF_PRESETS["sre08"])
    dcf10, _ = metrics.compute_min_dcf(trials, metrics.DCF_PRESETS["sre10"])
    if det_csv_path is not None:
        fileio.atomic_write_text(det_csv_path, metrics.det_csv(trials))
    if det_svg_path is not None:
        fileio.atomic_write_text(det_svg_path, metrics.det_svg(trials))
    return {
        "eer": eer,
        "eer_threshold": eer_threshold,
        "min_dcf_sre08": dcf08,
        "min_dcf_sre10": dcf10,
        "num_trials": float(trials.num_trials),
    }


# --- SAD-override rescoring ----------------------------------------------


def sad_report_stage(
    orig_scores_path: Path,
    manifest_path: Path,
    trials_path: Path,
    key_path: Path,
    ubm_path: Path,
    tv_path: Path,
    projection_path: Path,
    normalizer_path: Path,
    plda_path: Path,
    out_csv: Path,
    cfg: PipelineConfig,
    out_scores: Path | None = None,
) -> dict[str, int]:
    """Re-score only the trials touched by SAD overrides.

    Recordings whose manifest entries carry a speech-mask override are
    re-extracted from audio with that mask; the other side of each affected
    trial is re-extracted with the standard detector (deterministically
    identical to the original run).  Unaffected trials keep their original
    scores bit-for-bit.  Returns summary counts of target trials whose
    scores improved and non-target trials whose scores decreased.
    """
    entries = {e.recording_id: e for e in fileio.read_manifest(manifest_path)}
    base_dir = manifest_path.parent
    trials = fileio.read_trials(trials_path)
    key = fileio.read_key(key_path)
    orig = fileio.read_scores(orig_scores_path)
    orig_map = {(e, t): s for e, t, s in orig}

    overridden = {rid for rid, e in entries.items() if e.sad_path}
    if not overridden:
        raise DataError("no manifest entry carries a SAD override")
    affected = [
        (e, t) for e, t in trials if e in overridden or t in overridden
    ]
    for trial in affected:
        if trial not in orig_map:
            raise KeyMismatchError(
                f"trial {trial} is affected by an override but missing from "
                f"the original scores"
            )
        if trial not in key:
            raise KeyMismatchError(f"trial {trial} is missing from the key")

    gmm, ubm_fp, ubm_meta = fileio.read_gmm(ubm_path)
    model, tv_fp, tv_meta = fileio.read_tv_model(tv_path)
    proj, da_fp, da_meta = fileio.read_projection(projection_path)
    normalizer, _, nz_meta = fileio.read_normalizer(normalizer_path)
    plda, _, plda_meta = fileio.read_plda(plda_path)
    for name, meta in (("normalizer", nz_meta), ("PLDA model", plda_meta)):
        if meta.get("upstream", {}).get("projection") != da_fp:
            raise ContractError(
                f"{name} does not belong to this projection (fingerprint mismatch)"
            )
    feat_fp = frontend_fingerprint(cfg.frontend)
    if ubm_meta.get("upstream", {}).get("features") != feat_fp:
        raise ContractError(
            "frontend configuration does not match the one the UBM was "
            "trained with (fingerprint mismatch)"
        )

    needed = sorted({rid for trial in affected for rid in trial})
    missing = [rid for rid in needed if rid not in entries]
    if missing:
        raise DataError(f"trial recordings missing from manifest: {missing}")

    def ivector_for(rec_id: str, use_override: bool) -> np.ndarray:
        entry = entries[rec_id]
        if not use_override:
            entry = dataclasses.replace(entry, sad_path="")
        feats, _ = compute_features(entry, base_dir, cfg.frontend)
        post = ubm_mod.gmm_posteriors(gmm, feats, cfg.ubm.top_n)
        raw = stats_mod.accumulate_bw(feats, post, recording_id=rec_id)
        centered = stats_mod.center_stats(raw, gmm)
        iv = tv_mod.extract_ivector(centered, model)
        return backend_mod.normalize(
            da_mod.project(iv.w, proj), normalizer
        )

    vectors = {
        rid: ivector_for(rid, use_override=rid in overridden) for rid in needed
    }

    rows = []
    improved_targets = 0
    decreased_nontargets = 0
    for e_id, t_id in affected:
        new_score = backend_mod.plda_score(vectors[e_id], vectors[t_id], plda)
        old_score = orig_map[(e_id, t_id)]
        is_target = key[(e_id, t_id)]
        rows.append((e_id, t_id, old_score, new_score, is_target))
        if is_target and new_score > old_score:
            improved_targets += 1
        if not is_target and new_score < old_score:
            decreased_nontargets += 1

    lines = ["enroll_id,test_id,old_score,new_score,target"]
    for e_id, t_id, old_score, new_score, is_target in rows:
        lines.append(
            f"{e_id},{t_id},{old_score:.17g},{new_score:.17g},"
            f"{'target' if is_target else 'nontarget'}"
        )
    fileio.atomic_write_text(out_csv, "\n".join(lines) + "\n")

    if out_scores is not None:
        updated = {(e, t): new for e, t, _old, new, _tgt in rows}
        merged = [(e, t, updated.get((e, t), s)) for e, t, s in orig]
        fileio.write_scores(out_scores, merged)

    return {
        "affected_trials": len(affected),
        "targets_improved": improved_targets,
        "nontargets_decreased": decreased_nontargets,
    }


# --- synthetic corpus writing --------------------------------------------


def write_stats_corpus(
    corpus: synth.StatsCorpus, out_dir: Path, synth_cfg: dict
) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    ubm_fp = fingerprint("synth-ubm", synth_cfg)
    fileio.write_gmm(
        out_dir / "ubm.ivgm",
        corpus.gmm,
        ubm_fp,
        {"stage": "synth-ubm", "config": synth_cfg, "upstream": {}},
    )
    tv_fp = fingerprint("synth-tv", synth_cfg, {"ubm": ubm_fp})
    fileio.write_tv_model(
        out_dir / "tv_true.ivtv",
        corpus.tv_true,
        tv_fp,
        {"stage": "synth-tv", "config": synth_cfg, "upstream": {"ubm": ubm_fp}},
    )
    stats_fp = fingerprint("synth-stats", synth_cfg, {"ubm": ubm_fp})
    stats_meta = {
        "stage": "stats",
        "config": synth_cfg,
        "upstream": {"ubm": ubm_fp},
    }
    for name, split in (
        ("train", corpus.train),
        ("enroll", corpus.enroll),
        ("test", corpus.test),
    ):
        fileio.write_stats_archive(
            out_dir / f"{name}.ivbw", split, stats_fp, stats_meta
        )
        fileio.write_manifest(
            out_dir / f"{name}.manifest",
            [
                ManifestEntry(
                    recording_id=s.recording_id,
                    audio_path="",
                    speaker=corpus.speakers[s.recording_id],
                )
                for s in split
            ],
        )
    fileio.write_trials(out_dir / "trials.txt", corpus.trials)
    fileio.write_key(out_dir / "key.txt", corpus.key)


def write_ivector_corpus(
    corpus: synth.IvectorCorpus, out_dir: Path, synth_cfg: dict
) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    iv_fp = fingerprint("synth-ivectors", synth_cfg)
    meta = {"stage": "ivectors", "config": synth_cfg, "upstream": {}}
    for name, split in (
        ("train", corpus.train),
        ("enroll", corpus.enroll),
        ("test", corpus.test),
    ):
        fileio.write_ivector_archive(
            out_dir / f"{name}.iviv",
            [
                tv_mod.IVector(w=vec, recording_id=rid)
                for rid, vec in zip(split.ids, split.vectors)
            ],
            iv_fp,
            meta,
        )
        fileio.write_manifest(
            out_dir / f"{name}.manifest",
            [
                ManifestEntry(recording_id=rid, audio_path="", speaker=spk)
                for rid, spk in zip(split.ids, split.speakers)
            ],
        )
    fileio.write_trials(out_dir / "trials.txt", corpus.trials)
    fileio.write_key(out_dir / "key.txt", corpus.key)


def write_audio_corpus(corpus: synth.AudioCorpus, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    wav_dir = out_dir / "wav"
    wav_dir.mkdir(exist_ok=True)
    mask_dir = out_dir / "masks"
    by_id = {r.recording_id: r for r in corpus.recordings}
    for rec in corpus.recordings:
        frontend.write_wav(wav_dir / f"{rec.recording_id}.wav", rec.signal)
        if rec.contaminated:
            mask_dir.mkdir(exist_ok=True)
            lines = [f"{s:.6f} {e:.6f}" for s, e in rec.speech_segments]
            fileio.atomic_write_text(
                mask_dir / f"{rec.recording_id}.sad", "\n".join(lines) + "\n"
            )

    def entry(rec_id: str, with_override: bool) -> ManifestEntry:
        rec = by_id[rec_id]
        sad = (
            f"masks/{rec_id}.sad" if with_override and rec.contaminated else ""
        )
        return ManifestEntry(
            recording_id=rec_id,
            audio_path=f"wav/{rec_id}.wav",
            speaker=rec.speaker,
            sad_path=sad,
        )

    for name, ids in (
        ("train", corpus.train_ids),
        ("enroll", corpus.enroll_ids),
        ("test", corpus.test_ids),
    ):
        fileio.write_manifest(
            out_dir / f"{name}.manifest", [entry(rid, False) for rid in ids]
        )
    all_ids = corpus.train_ids + corpus.enroll_ids + corpus.test_ids
    fileio.write_manifest(
        out_dir / "override.manifest", [entry(rid, True) for rid in all_ids]
    )
    fileio.write_trials(out_dir / "trials.txt", corpus.trials)
    fileio.write_key(out_dir / "key.txt", corpus.key)
