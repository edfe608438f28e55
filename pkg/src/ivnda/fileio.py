"""Artifact serialisation: model files, archives, manifests, trials, scores.

Every binary artifact starts with a uniform header:

    magic (4 bytes) | version u32 | fingerprint u64 | meta_len u32 | meta JSON

followed by the format-specific payload (all integers u32, all floating
point IEEE 754, little-endian).  The fingerprint is a 64-bit hash of the
producing stage's configuration subset plus the fingerprints of its
upstream artifacts, so stages can reject mixed-provenance inputs without
re-reading them.  The meta JSON (canonical key order, no timestamps)
records the stage name, the config subset, and upstream fingerprints;
reruns with identical inputs produce byte-identical files.

Formats:

* ``IVFA``  one recording's features: T, D, frame_shift_ms f32, frames f32
  row-major, T mask bytes.  A feature *archive* is a directory holding one
  ``<recording_id>.ivfa`` per recording.
* ``IVGM``  diagonal GMM: G, D, weights/means/variances f64.
* ``IVBW``  stats archive: count; per record id, G, D, n f64[G], f f64[G*D].
* ``IVTV``  subspace model: G, D, R, sigma f64[G*D], T f64[(G*D)*R].
* ``IVIV``  i-vector archive: count, R; per record id, w f64[R].
* ``IVDA``  projection: R, M, method tag, k, alpha f64, basis f64[R*M],
  eigenvalues f64[M].
* ``IVNZ``  normaliser: M, mean f64[M], whitener f64[M*M].
* ``IVPL``  PLDA model: M, mu f64[M], B f64[M*M], W f64[M*M].
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .backend import Normalizer, PldaModel
from .da import Projection
from .errors import FormatError, KeyMismatchError
from .frontend import FeatureMatrix
from .stats import BwStats
from .tv import IVector, TvModel
from .ubm import DiagonalGmm

FORMAT_VERSION = 1

_METHOD_TAGS = {"lda": 0, "nda": 1}
_METHOD_NAMES = {v: k for k, v in _METHOD_TAGS.items()}


def fingerprint(stage: str, config: dict, upstream: dict[str, int] | None = None) -> int:
    """64-bit provenance hash of a stage's config subset and upstream hashes."""
    payload = json.dumps(
        {"stage": stage, "config": config, "upstream": upstream or {}},
        sort_keys=True,
        separators=(",", ":"),
    )
    digest = hashlib.blake2b(payload.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write via a temp file and rename, so readers never see partial files."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _pack_header(magic: bytes, fp: int, meta: dict) -> bytes:
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()
    return struct.pack("<4sIQI", magic, FORMAT_VERSION, fp, len(meta_bytes)) + meta_bytes


def _read_exact(fh: BinaryIO, n: int, path: Path) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise FormatError(f"{path}: truncated file")
    return data


def _unpack_header(fh: BinaryIO, magic: bytes, path: Path) -> tuple[int, dict]:
    raw = _read_exact(fh, struct.calcsize("<4sIQI"), path)
    got_magic, version, fp, meta_len = struct.unpack("<4sIQI", raw)
    if got_magic != magic:
        raise FormatError(
            f"{path}: bad magic {got_magic!r}, expected {magic!r}"
        )
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    try:
        meta = json.loads(_read_exact(fh, meta_len, path).decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: corrupt metadata block") from exc
    return fp, meta


def _pack_str(s: str) -> bytes:
    raw = s.encode()
    return struct.pack("<I", len(raw)) + raw


def _unpack_str(fh: BinaryIO, path: Path) -> str:
    (n,) = struct.unpack("<I", _read_exact(fh, 4, path))
    return _read_exact(fh, n, path).decode()


def _pack_f64(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def _read_f64(fh: BinaryIO, count: int, path: Path) -> np.ndarray:
    return np.frombuffer(_read_exact(fh, 8 * count, path), dtype="<f8").copy()


# --- features -------------------------------------------------------------


def feature_path(directory: str | Path, recording_id: str) -> Path:
    return Path(directory) / f"{recording_id}.ivfa"


def write_feature_record(
    path: str | Path, features: FeatureMatrix, fp: int, meta: dict
) -> None:
    t, d = features.frames.shape
    payload = struct.pack("<IIf", t, d, features.frame_shift_ms)
    payload += np.ascontiguousarray(features.frames, dtype="<f4").tobytes()
    payload += features.speech_mask.astype(np.uint8).tobytes()
    atomic_write_bytes(path, _pack_header(b"IVFA", fp, meta) + payload)


def read_feature_record(path: str | Path) -> tuple[FeatureMatrix, int, dict]:
    path = Path(path)
    with open(path, "rb") as fh:
        fp, meta = _unpack_header(fh, b"IVFA", path)
        t, d, shift = struct.unpack("<IIf", _read_exact(fh, 12, path))
        frames = np.frombuffer(
            _read_exact(fh, 4 * t * d, path), dtype="<f4"
        ).reshape(t, d).astype(np.float64)
        mask_bytes = _read_exact(fh, t, path)
        mask = np.frombuffer(mask_bytes, dtype=np.uint8)
        if np.any(mask > 1):
            raise FormatError(f"{path}: mask bytes must be 0 or 1")
    features = FeatureMatrix(
        frames=frames, frame_shift_ms=float(shift), speech_mask=mask.astype(bool)
    )
    return features, fp, meta


# --- GMM ------------------------------------------------------------------


def write_gmm(path: str | Path, gmm: DiagonalGmm, fp: int, meta: dict) -> None:
    payload = struct.pack("<II", gmm.num_components, gmm.dim)
    payload += _pack_f64(gmm.weights) + _pack_f64(gmm.means) + _pack_f64(gmm.variances)
    atomic_write_bytes(path, _pack_header(b"IVGM", fp, meta) + payload)


def read_gmm(path: str | Path) -> tuple[DiagonalGmm, int, dict]:
    path = Path(path)
    with open(path, "rb") as fh:
        fp, meta = _unpack_header(fh, b"IVGM", path)
        g, d = struct.unpack("<II", _read_exact(fh, 8, path))
        weights = _read_f64(fh, g, path)
        means = _read_f64(fh, g * d, path).reshape(g, d)
        variances = _read_f64(fh, g * d, path).reshape(g, d)
    return DiagonalGmm(weights=weights, means=means, variances=variances), fp, meta


# --- stats ----------------------------------------------------------------


def write_stats_archive(
    path: str | Path, stats: Sequence[BwStats], fp: int, meta: dict
) -> None:
    chunks = [_pack_header(b"IVBW", fp, meta), struct.pack("<I", len(stats))]
    for s in stats:
        if s.centered:
            raise ValueError(
                f"recording {s.recording_id!r}: archives store raw statistics only"
            )
        chunks.append(_pack_str(s.recording_id))
        chunks.append(struct.pack("<II", s.num_components, s.dim))
        chunks.append(_pack_f64(s.n))
        chunks.append(_pack_f64(s.f))
    atomic_write_bytes(path, b"".join(chunks))


def read_stats_archive(path: str | Path) -> tuple[list[BwStats], int, dict]:
    path = Path(path)
    out = []
    with open(path, "rb") as fh:
        fp, meta = _unpack_header(fh, b"IVBW", path)
        (count,) = struct.unpack("<I", _read_exact(fh, 4, path))
        for _ in range(count):
            rec_id = _unpack_str(fh, path)
            g, d = struct.unpack("<II", _read_exact(fh, 8, path))
            n = _read_f64(fh, g, path)
            f = _read_f64(fh, g * d, path).reshape(g, d)
            out.append(BwStats(n=n, f=f, recording_id=rec_id, centered=False))
    return out, fp, meta


# --- TV model -------------------------------------------------------------


def write_tv_model(path: str | Path, model: TvModel, fp: int, meta: dict) -> None:
    g, d = model.sigma.shape
    payload = struct.pack("<III", g, d, model.rank)
    payload += _pack_f64(model.sigma) + _pack_f64(model.t_matrix)
    atomic_write_bytes(path, _pack_header(b"IVTV", fp, meta) + payload)


def read_tv_model(path: str | Path) -> tuple[TvModel, int, dict]:
    path = Path(path)
    with open(path, "rb") as fh:
        fp, meta = _unpack_header(fh, b"IVTV", path)
        g, d, r = struct.unpack("<III", _read_exact(fh, 12, path))
        sigma = _read_f64(fh, g * d, path).reshape(g, d)
        t_matrix = _read_f64(fh, g * d * r, path).reshape(g * d, r)
    return TvModel(t_matrix=t_matrix, sigma=sigma, rank=r), fp, meta


# --- i-vectors ------------------------------------------------------------


def write_ivector_archive(
    path: str | Path, ivectors: Sequence[IVector], fp: int, meta: dict
) -> None:
    rank = ivectors[0].rank if ivectors else 0
    chunks = [_pack_header(b"IVIV", fp, meta), struct.pack("<II", len(ivectors), rank)]
    for iv in ivectors:
        if iv.rank != rank:
            raise ValueError("all i-vectors in an archive must share a rank")
        chunks.append(_pack_str(iv.recording_id))
        chunks.append(_pack_f64(iv.w))
    atomic_write_bytes(path, b"".join(chunks))


def read_ivector_archive(path: str | Path) -> tuple[list[IVector], int, dict]:
    path = Path(path)
    out = []
    with open(path, "rb") as fh:
        fp, meta = _unpack_header(fh, b"IVIV", path)
        count, rank = struct.unpack("<II", _read_exact(fh, 8, path))
        for _ in range(count):
            rec_id = _unpack_str(fh, path)
            w = _read_f64(fh, rank, path)
            out.append(IVector(w=w, recording_id=rec_id))
    return out, fp, meta


# --- projection -----------------------------------------------------------


def write_projection(path: str | Path, proj: Projection, fp: int, meta: dict) -> None:
    if proj.method not in _METHOD_TAGS:
        raise ValueError(f"projection method must be lda or nda, got {proj.method!r}")
    payload = struct.pack(
        "<IIIId",
        proj.input_dim,
        proj.output_dim,
        _METHOD_TAGS[proj.method],
        proj.k,
        proj.alpha,
    )
    payload += _pack_f64(proj.basis) + _pack_f64(proj.eigenvalues)
    atomic_write_bytes(path, _pack_header(b"IVDA", fp, meta) + payload)


def read_projection(path: str | Path) -> tuple[Projection, int, dict]:
    path = Path(path)
    with open(path, "rb") as fh:
        fp, meta = _unpack_header(fh, b"IVDA", path)
        r, m, tag, k, alpha = struct.unpack(
            "<IIIId", _read_exact(fh, struct.calcsize("<IIIId"), path)
        )
        if tag not in _METHOD_NAMES:
            raise FormatError(f"{path}: unknown projection method tag {tag}")
        basis = _read_f64(fh, r * m, path).reshape(r, m)
        eigenvalues = _read_f64(fh, m, path)
    proj = Projection(
        basis=basis,
        eigenvalues=eigenvalues,
        method=_METHOD_NAMES[tag],
        k=k,
        alpha=alpha,
    )
    return proj, fp, meta


# --- normaliser -----------------------------------------------------------


def write_normalizer(path: str | Path, nz: Normalizer, fp: int, meta: dict) -> None:
    payload = struct.pack("<I", nz.dim) + _pack_f64(nz.mean) + _pack_f64(nz.whitener)
    atomic_write_bytes(path, _pack_header(b"IVNZ", fp, meta) + payload)


def read_normalizer(path: str | Path) -> tuple[Normalizer, int, dict]:
    path = Path(path)
    with open(path, "rb") as fh:
        fp, meta = _unpack_header(fh, b"IVNZ", path)
        (m,) = struct.unpack("<I", _read_exact(fh, 4, path))
        mean = _read_f64(fh, m, path)
        whitener = _read_f64(fh, m * m, path).reshape(m, m)
    return Normalizer(mean=mean, whitener=whitener), fp, meta


# --- PLDA -----------------------------------------------------------------


def write_plda(path: str | Path, model: PldaModel, fp: int, meta: dict) -> None:
    payload = struct.pack("<I", model.dim)
    payload += _pack_f64(model.mu) + _pack_f64(model.b_cov) + _pack_f64(model.w_cov)
    atomic_write_bytes(path, _pack_header(b"IVPL", fp, meta) + payload)


def read_plda(path: str | Path) -> tuple[PldaModel, int, dict]:
    path = Path(path)
    with open(path, "rb") as fh:
        fp, meta = _unpack_header(fh, b"IVPL", path)
        (m,) = struct.unpack("<I", _read_exact(fh, 4, path))
        mu = _read_f64(fh, m, path)
        b_cov = _read_f64(fh, m * m, path).reshape(m, m)
        w_cov = _read_f64(fh, m * m, path).reshape(m, m)
    return PldaModel(mu=mu, b_cov=b_cov, w_cov=w_cov), fp, meta


# --- text formats ---------------------------------------------------------


@dataclass
class ManifestEntry:
    """One recording in a manifest.

    Columns: recording_id, audio path, then optional speaker label, fMLLR
    transform path and speech-mask override path ("-" for absent).
    """

    recording_id: str
    audio_path: str
    speaker: str = ""
    fmllr_path: str = ""
    sad_path: str = ""


def read_manifest(path: str | Path) -> list[ManifestEntry]:
    entries = []
    seen: set[str] = set()
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 2 or len(parts) > 5:
            raise FormatError(
                f"{path}:{line_no}: expected 2-5 columns, got {len(parts)}"
            )
        parts += ["-"] * (5 - len(parts))
        rec_id = parts[0]
        if rec_id in seen:
            raise FormatError(f"{path}:{line_no}: duplicate recording id {rec_id!r}")
        seen.add(rec_id)
        entries.append(
            ManifestEntry(
                recording_id=rec_id,
                audio_path="" if parts[1] == "-" else parts[1],
                speaker="" if parts[2] == "-" else parts[2],
                fmllr_path="" if parts[3] == "-" else parts[3],
                sad_path="" if parts[4] == "-" else parts[4],
            )
        )
    return entries


def write_manifest(path: str | Path, entries: Iterable[ManifestEntry]) -> None:
    lines = []
    for e in entries:
        cols = [
            e.recording_id,
            e.audio_path or "-",
            e.speaker or "-",
            e.fmllr_path or "-",
            e.sad_path or "-",
        ]
        while len(cols) > 2 and cols[-1] == "-":
            cols.pop()
        lines.append(" ".join(cols))
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_trials(path: str | Path) -> list[tuple[str, str]]:
    trials = []
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"{path}:{line_no}: expected 'enroll_id test_id'")
        trials.append((parts[0], parts[1]))
    return trials


def write_trials(path: str | Path, trials: Iterable[tuple[str, str]]) -> None:
    lines = [f"{e} {t}" for e, t in trials]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_key(path: str | Path) -> dict[tuple[str, str], bool]:
    key: dict[tuple[str, str], bool] = {}
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3 or parts[2] not in ("target", "nontarget"):
            raise FormatError(
                f"{path}:{line_no}: expected 'enroll_id test_id target|nontarget'"
            )
        key[(parts[0], parts[1])] = parts[2] == "target"
    return key


def write_key(path: str | Path, key: dict[tuple[str, str], bool]) -> None:
    lines = [
        f"{e} {t} {'target' if is_target else 'nontarget'}"
        for (e, t), is_target in key.items()
    ]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_scores(path: str | Path) -> list[tuple[str, str, float]]:
    scores = []
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise FormatError(f"{path}:{line_no}: expected 'enroll_id test_id score'")
        try:
            scores.append((parts[0], parts[1], float(parts[2])))
        except ValueError as exc:
            raise FormatError(f"{path}:{line_no}: non-numeric score") from exc
    return scores


def write_scores(path: str | Path, scores: Iterable[tuple[str, str, float]]) -> None:
    lines = [f"{e} {t} {s:.17g}" for e, t, s in scores]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def match_scores_to_key(
    scores: Sequence[tuple[str, str, float]],
    key: dict[tuple[str, str], bool],
) -> tuple[np.ndarray, np.ndarray]:
    """Align a score list with a key; every scored trial must be in the key."""
    values = np.empty(len(scores))
    targets = np.empty(len(scores), dtype=bool)
    for i, (enroll, test, score) in enumerate(scores):
        if (enroll, test) not in key:
            raise KeyMismatchError(
                f"trial ({enroll}, {test}) is scored but missing from the key"
            )
        values[i] = score
        targets[i] = key[(enroll, test)]
    return values, targets
