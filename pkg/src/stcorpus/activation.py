"""Activation sources for the segmenter: PCM16 WAV decoding, a frame-energy
VAD, and the plain-text trace format used to inject external VAD output."""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .segmenter import FrameTrace

PCM16_SCALE = 32768.0


class WavFormatError(ValueError):
    pass


class TraceFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class AudioBuffer:
    sample_rate_hz: int
    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclass(frozen=True)
class EnergyVadParams:
    frame_ms: float = 25.0
    hop_ms: float = 20.0
    floor_db: float = -60.0
    ceil_db: float = -20.0

    def validate(self) -> None:
        if not (self.frame_ms > 0 and self.hop_ms > 0):
            raise ValueError("frame_ms and hop_ms must be positive")
        if self.hop_ms > self.frame_ms:
            raise ValueError(f"hop_ms ({self.hop_ms}) must not exceed frame_ms ({self.frame_ms})")
        if not self.floor_db < self.ceil_db:
            raise ValueError(f"floor_db ({self.floor_db}) must be below ceil_db ({self.ceil_db})")


def read_wav(path) -> AudioBuffer:
    """Decode a 16-bit PCM RIFF/WAVE file (mono or stereo) to mono floats."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such WAV file: {path}")
    try:
        with wave.open(str(path), "rb") as w:
            channels = w.getnchannels()
            width = w.getsampwidth()
            rate = w.getframerate()
            raw = w.readframes(w.getnframes())
    except wave.Error as exc:
        msg = str(exc)
        chunk = "fmt " if "format" in msg else "RIFF"
        raise WavFormatError(f"{path}: bad '{chunk}' chunk: {msg}") from exc
    except EOFError as exc:
        raise WavFormatError(f"{path}: truncated 'RIFF' chunk") from exc
    if width != 2:
        raise WavFormatError(f"{path}: 'fmt ' chunk declares {8 * width}-bit samples, only PCM16 is supported")
    if channels not in (1, 2):
        raise WavFormatError(f"{path}: 'fmt ' chunk declares {channels} channels, expected 1 or 2")
    if not 8000 <= rate <= 48000:
        raise WavFormatError(f"{path}: 'fmt ' chunk declares {rate} Hz, expected 8000-48000")
    if len(raw) % (2 * channels):
        raise WavFormatError(f"{path}: 'data' chunk length {len(raw)} is not a whole number of frames")
    pcm = np.frombuffer(raw, dtype="<i2").astype(np.float64) / PCM16_SCALE
    if channels == 2:
        pcm = pcm.reshape(-1, 2).mean(axis=1)
    return AudioBuffer(rate, pcm)


def write_wav(path, audio: AudioBuffer) -> None:
    """Write mono PCM16; samples are clipped to the representable range."""
    pcm = np.clip(np.round(audio.samples * PCM16_SCALE), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(audio.sample_rate_hz))
        w.writeframes(pcm.tobytes())


def frame_rms_db(audio: AudioBuffer, frame_samples: int, hop_samples: int) -> np.ndarray:
    """RMS level in dBFS per analysis window; exact silence gives ``-inf``."""
    x = audio.samples
    if len(x) == 0:
        return np.zeros(0)
    if len(x) < frame_samples:
        windows = x[None, :]
    else:
        windows = sliding_window_view(x, frame_samples)[::hop_samples]
    rms = np.sqrt(np.mean(windows * windows, axis=1))
    with np.errstate(divide="ignore"):
        return 20.0 * np.log10(rms)


def energy_activation(audio: AudioBuffer, params: EnergyVadParams = EnergyVadParams()) -> FrameTrace:
    """Map frame energy linearly from ``[floor_db, ceil_db]`` onto ``[0, 1]``.

    Audio shorter than one analysis window yields a single frame over all of it.
    """
    params.validate()
    frame_samples = max(1, int(round(audio.sample_rate_hz * params.frame_ms / 1000.0)))
    hop_samples = max(1, int(round(audio.sample_rate_hz * params.hop_ms / 1000.0)))
    db = frame_rms_db(audio, frame_samples, hop_samples)
    db = np.where(np.isneginf(db), params.floor_db, db)
    act = np.clip((db - params.floor_db) / (params.ceil_db - params.floor_db), 0.0, 1.0)
    return FrameTrace(1000.0 / params.hop_ms, act, 0.0)


def read_trace(path) -> FrameTrace:
    """Read a trace file: a ``frame_rate_hz=<f> start_s=<f>`` header line,
    then one activation value per line."""
    with open(path, encoding="utf-8", newline="") as f:
        lines = f.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise TraceFormatError("missing header", 1)
    header = {}
    for item in lines[0].split():
        key, sep, value = item.partition("=")
        if not sep:
            raise TraceFormatError(f"malformed header item {item!r}", 1)
        header[key] = value
    if "frame_rate_hz" not in header or "start_s" not in header:
        raise TraceFormatError("missing header (need frame_rate_hz=... start_s=...)", 1)
    try:
        rate = float(header["frame_rate_hz"])
        start = float(header["start_s"])
    except ValueError as exc:
        raise TraceFormatError(f"bad header value: {exc}", 1) from None
    if not rate > 0 or not start >= 0:
        raise TraceFormatError("frame_rate_hz must be > 0 and start_s >= 0", 1)

    values = np.empty(len(lines) - 1)
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            v = float(line)
        except ValueError:
            raise TraceFormatError(f"not a number: {line!r}", lineno) from None
        if not 0.0 <= v <= 1.0:
            raise TraceFormatError(f"activation {v} outside [0, 1]", lineno)
        values[lineno - 2] = v
    return FrameTrace(rate, values, start)


def write_trace(trace: FrameTrace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"frame_rate_hz={trace.frame_rate_hz!r} start_s={trace.start_s!r}\n")
        for v in trace.values:
            f.write(f"{v:.6f}\n")
