"""Acoustic frontend.

WAV decoding, MFCC extraction with appended delta/delta-delta coefficients,
energy/zero-crossing speech activity detection, cepstral mean subtraction
over speech frames, and application of externally estimated affine feature
transforms.

Frame geometry is shared by every stage: a frame ``t`` covers samples
``[t * shift, t * shift + frame_len)``, and a signal of ``n`` samples yields
``(n - frame_len) // shift + 1`` frames (no padding at either end).
"""

from __future__ import annotations

import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.fft import dct

from .config import FrontendConfig, SadConfig
from .errors import (
    AlignmentError,
    EmptyInputError,
    FormatError,
    InsufficientDataError,
    MatrixError,
    NoSpeechError,
    ShapeError,
    UnsupportedFormatError,
)

SUPPORTED_RATES = (8000, 16000)
PCM_SCALE = 32768.0  # int16 full scale; +32767 maps to 32767/32768


@dataclass
class AudioSignal:
    """Mono PCM audio as float64 samples in [-1, 1)."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self) -> None:
        if self.sample_rate_hz not in SUPPORTED_RATES:
            raise UnsupportedFormatError(
                f"unsupported sample rate {self.sample_rate_hz} Hz "
                f"(expected one of {SUPPORTED_RATES})"
            )
        if self.samples.size == 0:
            raise EmptyInputError("empty audio signal")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass
class FeatureMatrix:
    """A (num_frames, dim) matrix of frame features plus a speech mask.

    All frames are kept; non-speech frames are flagged rather than dropped so
    that frame indices stay aligned with the audio timeline.
    """

    frames: np.ndarray
    frame_shift_ms: float
    speech_mask: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2:
            raise ShapeError("feature matrix must be 2-D")
        if self.speech_mask is None:
            self.speech_mask = np.ones(self.frames.shape[0], dtype=bool)
        self.speech_mask = np.asarray(self.speech_mask, dtype=bool)
        if self.speech_mask.shape != (self.frames.shape[0],):
            raise AlignmentError(
                f"speech mask length {self.speech_mask.shape} does not match "
                f"{self.frames.shape[0]} frames"
            )

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    def speech_frames(self) -> np.ndarray:
        """Rows of `frames` where the mask is true."""
        return self.frames[self.speech_mask]


@dataclass
class FmllrTransform:
    """Affine feature-space transform o' = A o + b."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        self.a = np.asarray(self.a, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.a.ndim != 2 or self.a.shape[0] != self.a.shape[1]:
            raise ShapeError("fMLLR A must be square")
        if self.b.shape != (self.a.shape[0],):
            raise ShapeError("fMLLR b must match A's dimension")
        sign, logdet = np.linalg.slogdet(self.a)
        if sign == 0 or not np.isfinite(logdet) or np.linalg.cond(self.a) > 1e12:
            raise MatrixError("fMLLR A is singular or numerically non-invertible")

    @property
    def dim(self) -> int:
        return self.a.shape[0]


def read_wav(path: str | Path) -> AudioSignal:
    """Decode a 16-bit mono PCM WAV file.

    Raises :class:`FormatError` for files that are not RIFF/WAVE at all and
    :class:`UnsupportedFormatError` for valid WAVs in an encoding we do not
    accept (non-PCM, stereo, not 16-bit, unsupported rate).
    """
    try:
        with wave.open(str(path), "rb") as wav:
            channels = wav.getnchannels()
            width = wav.getsampwidth()
            rate = wav.getframerate()
            n = wav.getnframes()
            raw = wav.readframes(n)
    except wave.Error as exc:
        msg = str(exc)
        if "unknown format" in msg:
            raise UnsupportedFormatError(f"{path}: non-PCM WAV ({msg})") from exc
        raise FormatError(f"{path}: not a WAV file ({msg})") from exc
    except EOFError as exc:
        raise FormatError(f"{path}: truncated WAV file") from exc
    if channels != 1:
        raise UnsupportedFormatError(f"{path}: expected mono, got {channels} channels")
    if width != 2:
        raise UnsupportedFormatError(f"{path}: expected 16-bit PCM, got {8 * width}-bit")
    if rate not in SUPPORTED_RATES:
        raise UnsupportedFormatError(f"{path}: unsupported sample rate {rate} Hz")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / PCM_SCALE
    if samples.size == 0:
        raise EmptyInputError(f"{path}: WAV contains no samples")
    return AudioSignal(samples=samples, sample_rate_hz=rate)


def write_wav(path: str | Path, signal: AudioSignal) -> None:
    """Write a mono 16-bit PCM WAV (used by the synthetic-corpus generator)."""
    pcm = np.clip(np.round(signal.samples * PCM_SCALE), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(signal.sample_rate_hz)
        wav.writeframes(pcm.tobytes())


def frame_geometry(sample_rate_hz: int, cfg: FrontendConfig) -> tuple[int, int]:
    """(frame_len, frame_shift) in samples for this sample rate."""
    frame_len = int(round(cfg.frame_len_ms * sample_rate_hz / 1000.0))
    shift = int(round(cfg.frame_shift_ms * sample_rate_hz / 1000.0))
    return frame_len, shift


def num_frames(num_samples: int, sample_rate_hz: int, cfg: FrontendConfig) -> int:
    """Number of frames produced for a signal of `num_samples` samples."""
    frame_len, shift = frame_geometry(sample_rate_hz, cfg)
    if num_samples < frame_len:
        return 0
    return (num_samples - frame_len) // shift + 1


def _frame_indices(n: int, frame_len: int, shift: int) -> np.ndarray:
    count = (n - frame_len) // shift + 1
    return np.arange(count)[:, None] * shift + np.arange(frame_len)[None, :]


def fft_size(sample_rate_hz: int) -> int:
    """FFT length: 512 points at 8 kHz, 1024 at 16 kHz."""
    return 512 if sample_rate_hz == 8000 else 1024


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(num_filters: int, nfft: int, sample_rate_hz: int) -> np.ndarray:
    """Triangular mel filterbank, shape (num_filters, nfft // 2 + 1).

    Filter centres are spaced uniformly on the mel scale between 0 Hz and
    Nyquist; triangles are evaluated at the continuous bin frequencies.
    """
    edges_hz = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate_hz / 2.0), num_filters + 2))
    freqs = np.arange(nfft // 2 + 1) * (sample_rate_hz / nfft)
    bank = np.zeros((num_filters, freqs.size))
    for j in range(num_filters):
        left, center, right = edges_hz[j], edges_hz[j + 1], edges_hz[j + 2]
        up = (freqs - left) / (center - left)
        down = (right - freqs) / (right - center)
        bank[j] = np.clip(np.minimum(up, down), 0.0, None)
    return bank


def compute_mfcc(signal: AudioSignal, cfg: FrontendConfig) -> FeatureMatrix:
    """MFCCs with c0 as coefficient 0.

    Pipeline per frame: pre-emphasis (applied to the whole signal first),
    Hamming window, power spectrum, mel filterbank, floored log, orthonormal
    DCT-II, keep the first `num_ceps` coefficients.
    """
    sr = signal.sample_rate_hz
    frame_len, shift = frame_geometry(sr, cfg)
    x = signal.samples
    if x.size < frame_len:
        raise EmptyInputError(
            f"signal of {x.size} samples is shorter than one frame ({frame_len})"
        )
    emphasized = np.concatenate([x[:1], x[1:] - cfg.preemphasis * x[:-1]])
    frames = emphasized[_frame_indices(x.size, frame_len, shift)]
    frames = frames * np.hamming(frame_len)
    nfft = fft_size(sr)
    power = np.abs(np.fft.rfft(frames, n=nfft, axis=1)) ** 2
    bank = mel_filterbank(cfg.num_filters, nfft, sr)
    energies = power @ bank.T
    log_energies = np.log(np.maximum(energies, cfg.log_floor))
    ceps = dct(log_energies, type=2, norm="ortho", axis=1)[:, : cfg.num_ceps]
    return FeatureMatrix(frames=ceps, frame_shift_ms=cfg.frame_shift_ms)


def append_deltas(features: FeatureMatrix, context: int = 2) -> FeatureMatrix:
    """Append first- and second-order regression coefficients.

    The delta at frame ``t`` is the least-squares slope of each coefficient
    over frames ``t - context .. t + context`` (edges replicated), i.e.
    ``sum_j j * (x[t+j] - x[t-j]) / (2 * sum_j j^2)``.  Delta-deltas apply
    the same operator to the deltas.  Output dim is three times the input.
    """
    if context < 1:
        raise ValueError("delta context must be >= 1")
    window = 2 * context + 1
    if features.num_frames < window:
        raise InsufficientDataError(
            f"need at least {window} frames for delta regression, "
            f"got {features.num_frames}"
        )

    def regress(x: np.ndarray) -> np.ndarray:
        padded = np.pad(x, ((context, context), (0, 0)), mode="edge")
        t = x.shape[0]
        num = np.zeros_like(x)
        for j in range(1, context + 1):
            num += j * (padded[context + j : context + j + t]
                        - padded[context - j : context - j + t])
        return num / (2.0 * sum(j * j for j in range(1, context + 1)))

    delta = regress(features.frames)
    delta2 = regress(delta)
    stacked = np.concatenate([features.frames, delta, delta2], axis=1)
    return FeatureMatrix(
        frames=stacked,
        frame_shift_ms=features.frame_shift_ms,
        speech_mask=features.speech_mask.copy(),
    )


def _frame_log_energy_db(frames: np.ndarray) -> np.ndarray:
    mean_square = np.mean(frames**2, axis=1)
    return 10.0 * np.log10(mean_square + 1e-12)


def _frame_zcr(frames: np.ndarray) -> np.ndarray:
    signs = np.sign(frames)
    signs[signs == 0] = 1
    flips = signs[:, 1:] != signs[:, :-1]
    return flips.sum(axis=1) / (frames.shape[1] - 1)


def smooth_mask(mask: np.ndarray, window: int) -> np.ndarray:
    """Majority vote over a sliding window (edges replicated).

    With the default 5-frame window this fills isolated 1–2 frame dropouts
    inside speech, keeps silence gaps of 3+ frames, and removes isolated
    1–2 frame blips.
    """
    if window <= 1 or mask.size == 0:
        return mask.copy()
    half = window // 2
    padded = np.pad(mask.astype(np.int32), half, mode="edge")
    kernel = np.ones(window, dtype=np.int32)
    votes = np.convolve(padded, kernel, mode="valid")
    return votes * 2 > window


def detect_speech(signal: AudioSignal, cfg: FrontendConfig) -> np.ndarray:
    """Boolean speech mask on the MFCC frame grid.

    Frames are scored by log energy (dB re. full scale) and zero-crossing
    rate.  The energy threshold adapts to the recording: it sits
    ``energy_fraction`` of the way between the low and high energy
    percentiles.  High-ZCR frames get `zcr_margin_db` of energy slack so
    weak fricatives survive.  A majority vote over `smooth_frames` frames
    removes isolated blips and fills short dropouts.  A recording whose
    energy spread is below `min_spread_db` is treated as homogeneous:
    everything above the absolute floor is speech.
    """
    sad: SadConfig = cfg.sad
    frame_len, shift = frame_geometry(signal.sample_rate_hz, cfg)
    if signal.samples.size < frame_len:
        return np.zeros(0, dtype=bool)
    frames = signal.samples[_frame_indices(signal.samples.size, frame_len, shift)]
    energy_db = _frame_log_energy_db(frames)
    zcr = _frame_zcr(frames)

    above_floor = energy_db > sad.floor_db
    if not above_floor.any():
        return np.zeros(energy_db.size, dtype=bool)

    low = np.percentile(energy_db, sad.low_percentile)
    high = np.percentile(energy_db, sad.high_percentile)
    spread = high - low
    if spread < sad.min_spread_db:
        raw = above_floor.copy()
    else:
        threshold = low + sad.energy_fraction * spread
        loud = energy_db > threshold
        rescue = (energy_db > threshold - sad.zcr_margin_db) & (zcr >= sad.zcr_threshold)
        raw = (loud | rescue) & above_floor
    return smooth_mask(raw, sad.smooth_frames)


def apply_cms(features: FeatureMatrix) -> FeatureMatrix:
    """Subtract the mean of the speech frames from the speech frames.

    Non-speech rows are left untouched (they are excluded downstream anyway).
    Applying the operation twice changes nothing.
    """
    if not features.speech_mask.any():
        raise NoSpeechError("cannot compute cepstral mean: no speech frames")
    out = features.frames.copy()
    mean = out[features.speech_mask].mean(axis=0)
    out[features.speech_mask] -= mean
    return FeatureMatrix(
        frames=out,
        frame_shift_ms=features.frame_shift_ms,
        speech_mask=features.speech_mask.copy(),
    )


def apply_fmllr(features: FeatureMatrix, transform: FmllrTransform) -> FeatureMatrix:
    """Apply the affine transform o' = A o + b to every frame."""
    if transform.dim != features.dim:
        raise ShapeError(
            f"fMLLR dimension {transform.dim} does not match feature dim {features.dim}"
        )
    out = features.frames @ transform.a.T + transform.b
    return FeatureMatrix(
        frames=out,
        frame_shift_ms=features.frame_shift_ms,
        speech_mask=features.speech_mask.copy(),
    )


def load_fmllr(path: str | Path) -> FmllrTransform:
    """Read an affine transform from a text file.

    Line 1 is the dimension D; the next D lines hold D+1 whitespace-separated
    reals, one row of [A | b] each.
    """
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: empty fMLLR file")
    try:
        dim = int(lines[0].strip())
    except ValueError as exc:
        raise FormatError(f"{path}: first line must be the dimension") from exc
    if dim <= 0 or len(lines) != dim + 1:
        raise FormatError(
            f"{path}: expected {max(dim, 0) + 1} lines for dimension {dim}, "
            f"got {len(lines)}"
        )
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if len(parts) != dim + 1:
            raise FormatError(f"{path}:{i}: expected {dim + 1} values, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise FormatError(f"{path}:{i}: non-numeric value") from exc
    matrix = np.asarray(rows)
    return FmllrTransform(a=matrix[:, :dim], b=matrix[:, dim])


def load_sad_mask(
    path: str | Path,
    count: int,
    sample_rate_hz: int,
    cfg: FrontendConfig,
) -> np.ndarray:
    """Read an externally supplied speech mask for a recording.

    Two formats are accepted and auto-detected per file:

    * one ``0``/``1`` per line, exactly `count` lines (frame mask);
    * ``start end`` seconds per line (speech segments); a frame is speech
      when its centre falls inside a segment.
    """
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: empty speech-mask file")
    first = lines[0].split()
    if len(first) == 2:
        segments = []
        for i, line in enumerate(lines, start=1):
            parts = line.split()
            if len(parts) != 2:
                raise FormatError(f"{path}:{i}: expected 'start end'")
            try:
                start, end = float(parts[0]), float(parts[1])
            except ValueError as exc:
                raise FormatError(f"{path}:{i}: non-numeric segment bound") from exc
            if end <= start:
                raise FormatError(f"{path}:{i}: segment end must exceed start")
            segments.append((start, end))
        frame_len, shift = frame_geometry(sample_rate_hz, cfg)
        centers = (np.arange(count) * shift + frame_len / 2.0) / sample_rate_hz
        mask = np.zeros(count, dtype=bool)
        for start, end in segments:
            mask |= (centers >= start) & (centers < end)
        return mask
    if len(first) == 1:
        if len(lines) != count:
            raise AlignmentError(
                f"{path}: mask has {len(lines)} lines but the recording has "
                f"{count} frames"
            )
        mask = np.zeros(count, dtype=bool)
        for i, line in enumerate(lines):
            if line not in ("0", "1"):
                raise FormatError(f"{path}:{i + 1}: mask entries must be 0 or 1")
            mask[i] = line == "1"
        return mask
    raise FormatError(f"{path}: unrecognised speech-mask format")
