"""Percentile-of-frame-power SNR estimation and noise banding.

The estimator frames the signal (25 ms rectangular window, 10 ms hop),
takes per-frame mean power, and reads the noise floor off the 10th
percentile and the active-speech level off the 90th.  It needs no voice
activity model, but it estimates the spread of frame energies, not any
particular reference SNR definition.
"""

from __future__ import annotations

import enum

import numpy as np
import scipy.io.wavfile

from .errors import SilentSignal, TooShort

WINDOW_S = 0.025
HOP_S = 0.010
NOISE_PERCENTILE = 10
SIGNAL_PERCENTILE = 90
SNR_CLAMP_DB = (-10.0, 60.0)
MIN_DURATION_S = 0.400
MIN_SAMPLE_RATE = 8000

# Band thresholds: low noise above 25 dB, high noise below 10 dB,
# medium in the closed interval between them.
LOW_NOISE_MIN_DB = 25.0
HIGH_NOISE_MAX_DB = 10.0


class NoiseBand(enum.Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


def noise_band(snr_db: float) -> NoiseBand:
    """Map an SNR to the three-way noise banding; 10 and 25 dB are Medium."""
    if not np.isfinite(snr_db):
        raise ValueError(f"SNR must be finite, got {snr_db}")
    if snr_db > LOW_NOISE_MIN_DB:
        return NoiseBand.LOW
    if snr_db < HIGH_NOISE_MAX_DB:
        return NoiseBand.HIGH
    return NoiseBand.MEDIUM


def frame_powers(samples: np.ndarray, sample_rate: int) -> np.ndarray:
    """Mean power of each 25 ms window at a 10 ms hop (rectangular)."""
    win = int(round(WINDOW_S * sample_rate))
    hop = int(round(HOP_S * sample_rate))
    if len(samples) < win:
        return np.zeros(0)
    frames = np.lib.stride_tricks.sliding_window_view(samples, win)[::hop]
    return np.mean(frames * frames, axis=1)


def estimate_snr(samples, sample_rate: int) -> float:
    """Estimate SNR in dB from mono samples in [-1, 1].

    Returns 10*log10(p90/p10) of the frame powers, clamped to [-10, 60].
    Raises TooShort below 400 ms and SilentSignal when 90% or more of the
    frames carry no energy.
    """
    if sample_rate < MIN_SAMPLE_RATE:
        raise ValueError(f"sample rate must be >= {MIN_SAMPLE_RATE} Hz, got {sample_rate}")
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("estimate_snr expects mono samples; average channels first")
    if len(x) < MIN_DURATION_S * sample_rate:
        raise TooShort(
            f"need at least {MIN_DURATION_S * 1000:.0f} ms of audio, "
            f"got {len(x) / sample_rate * 1000:.0f} ms"
        )
    if not np.any(x):
        raise SilentSignal("signal is all zeros")
    powers = frame_powers(x, sample_rate)
    p_noise, p_signal = np.percentile(powers, [NOISE_PERCENTILE, SIGNAL_PERCENTILE])
    if p_signal <= 0.0:
        raise SilentSignal("no frame carries energy at the signal percentile")
    if p_noise <= 0.0:
        return SNR_CLAMP_DB[1]
    snr = 10.0 * np.log10(p_signal / p_noise)
    return float(min(max(snr, SNR_CLAMP_DB[0]), SNR_CLAMP_DB[1]))


def read_wav_mono(path) -> tuple[np.ndarray, int]:
    """Read a PCM or float WAV; multi-channel input is averaged to mono."""
    sample_rate, data = scipy.io.wavfile.read(path)
    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        x = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.uint8:
        x = (data.astype(np.float64) - 128.0) / 128.0
    else:
        x = data.astype(np.float64)
    if x.ndim == 2:
        x = x.mean(axis=1)
    return x, int(sample_rate)
