"""Fixed-length feature vectors from interaction records.

Force and temperature windows are linearly resampled to a common rate; the
contact-microphone window is resampled to audio rate and turned into a
Mel-scaled power spectrogram (centered Hann STFT, unit-peak triangular
filters, optional natural-log compression).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from hapticgan.data.records import InteractionRecord, SensorStream

MODALITIES = ("force", "temperature", "mic")
STD_FLOOR = 1e-8
LOG_FLOOR = 1e-10


@dataclass(frozen=True)
class FeatureConfig:
    modalities: tuple[str, ...] = ("force", "temperature", "mic")
    ft_window_s: tuple[float, float] = (-0.1, 4.0)
    mic_window_s: tuple[float, float] = (-0.1, 0.1)
    ft_rate_hz: float = 100.0
    mic_rate_hz: float = 48000.0
    n_mels: int = 128
    n_fft: int = 2048
    hop: int = 512
    f_min: float = 0.0
    f_max: float | None = None
    log_compress: bool = True

    def __post_init__(self):
        mods = tuple(m for m in MODALITIES if m in self.modalities)
        unknown = set(self.modalities) - set(MODALITIES)
        if unknown:
            raise ValueError(f"unknown modalities {sorted(unknown)}")
        if not mods:
            raise ValueError("at least one modality is required")
        object.__setattr__(self, "modalities", mods)
        object.__setattr__(self, "ft_window_s", tuple(float(v) for v in self.ft_window_s))
        object.__setattr__(self, "mic_window_s", tuple(float(v) for v in self.mic_window_s))
        for name in ("ft_window_s", "mic_window_s"):
            a, b = getattr(self, name)
            if not b > a:
                raise ValueError(f"{name}: end must exceed start")
        if self.n_fft < 2 or self.n_fft & (self.n_fft - 1):
            raise ValueError("n_fft must be a power of two")
        if not 1 <= self.hop <= self.n_fft:
            raise ValueError("hop must lie in [1, n_fft]")
        if not 1 <= self.n_mels <= self.n_fft // 2 + 1:
            raise ValueError("n_mels must lie in [1, n_fft/2 + 1]")

    @property
    def mel_f_max(self) -> float:
        return self.mic_rate_hz / 2 if self.f_max is None else self.f_max

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("modalities", "ft_window_s", "mic_window_s"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureConfig":
        d = dict(d)
        for k in ("modalities", "ft_window_s", "mic_window_s"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


@dataclass(frozen=True)
class Segment:
    modality: str
    offset: int
    length: int


@dataclass
class FeatureVector:
    values: np.ndarray
    layout: tuple[Segment, ...]
    label: str | None
    object_id: str
    interaction_id: str
    coverage: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if sum(s.length for s in self.layout) != len(self.values):
            raise ValueError("segment lengths do not add up to the vector length")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"{self.interaction_id}: non-finite feature values")


# -- windowing and resampling ------------------------------------------------------------------


@dataclass
class Window:
    samples: np.ndarray      # (n, channels); edge-padded to cover the window
    coverage: float          # fraction of window grid points backed by real samples
    offset_s: float          # time of samples[0] relative to the window start, in [0, 1/rate)


def _ceil(x: float) -> int:
    # guard against k/rate round-off putting a grid point just past a boundary
    return int(np.ceil(x - 1e-9))


def extract_window(stream: SensorStream, contact_time_s: float, window) -> Window:
    """Samples whose times fall in [start, end) relative to contact.

    ``contact_time_s`` is kept for interface symmetry; stream times are already
    relative to contact via ``t0_offset_s``.
    """
    start, end = float(window[0]), float(window[1])
    if not end > start:
        raise ValueError("window end must exceed start")
    if stream.n_samples == 0:
        raise ValueError("cannot window an empty stream")
    rate = stream.rate_hz
    k0 = _ceil((start - stream.t0_offset_s) * rate)
    k1 = _ceil((end - stream.t0_offset_s) * rate)
    idx = np.arange(k0, max(k1, k0 + 1))
    valid = (idx >= 0) & (idx < stream.n_samples)
    samples = stream.samples[np.clip(idx, 0, stream.n_samples - 1)]
    offset = stream.t0_offset_s + k0 / rate - start
    return Window(samples, float(valid.mean()), float(offset))


def resample_linear(samples, src_rate_hz: float, dst_rate_hz: float, duration_s: float,
                    offset_s: float = 0.0) -> np.ndarray:
    """Linear interpolation onto ``round(duration * dst_rate)`` uniform points.

    Input sample ``k`` sits at ``offset_s + k / src_rate``; output point ``j`` at
    ``j / dst_rate``. Points outside the input span take the boundary value.
    Multichannel input (n, c) is resampled per column.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.shape[0] < 2:
        raise ValueError("resampling needs at least 2 samples")
    n_out = int(np.floor(duration_s * dst_rate_hz + 0.5))
    t_in = offset_s + np.arange(x.shape[0]) / src_rate_hz
    t_out = np.arange(n_out) / dst_rate_hz
    if x.ndim == 1:
        return np.interp(t_out, t_in, x)
    return np.stack([np.interp(t_out, t_in, x[:, c]) for c in range(x.shape[1])], axis=1)


# -- Mel spectrogram ---------------------------------------------------------------------------


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int, n_fft: int, sample_rate_hz: float, f_min: float = 0.0,
                   f_max: float | None = None) -> np.ndarray:
    """Triangular filters on the FFT bin grid, shape (n_mels, n_fft // 2 + 1).

    Centers are equally spaced in Mel between ``f_min`` and ``f_max``; each row
    is scaled so its largest bin weight is exactly 1.
    """
    if f_max is None:
        f_max = sample_rate_hz / 2
    if not (0.0 <= f_min < f_max <= sample_rate_hz / 2):
        raise ValueError(f"need 0 <= f_min < f_max <= sample_rate/2, got {f_min}, {f_max}")
    freqs = np.arange(n_fft // 2 + 1) * sample_rate_hz / n_fft
    edges = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2))
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = (freqs - lo) / (mid - lo)
    down = (hi - freqs) / (hi - mid)
    fb = np.maximum(0.0, np.minimum(up, down))
    peak = fb.max(axis=1, keepdims=True)
    if np.any(peak == 0):
        empty = np.flatnonzero(peak[:, 0] == 0).tolist()
        raise ValueError(f"Mel filters {empty} contain no FFT bin; lower n_mels or raise n_fft")
    return fb / peak


def stft_power(signal, n_fft: int, hop: int) -> np.ndarray:
    """|FFT|^2 of centered, reflect-padded Hann frames, shape (n_fft//2+1, n_frames)."""
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1 or len(x) < 1:
        raise ValueError("signal must be a non-empty 1-D array")
    pad = n_fft // 2
    mode = "reflect" if len(x) > 1 else "edge"
    xp = np.pad(x, pad, mode=mode)
    n_frames = 1 + len(x) // hop
    idx = np.arange(n_fft)[None, :] + hop * np.arange(n_frames)[:, None]
    window = np.hanning(n_fft + 1)[:-1]  # periodic Hann
    frames = xp[idx] * window
    spec = np.fft.rfft(frames, axis=1)
    return (spec.real ** 2 + spec.imag ** 2).T


def mel_spectrogram(signal, config: FeatureConfig | None = None,
                    filterbank: np.ndarray | None = None) -> np.ndarray:
    cfg = config or FeatureConfig()
    fb = filterbank if filterbank is not None else mel_filterbank(
        cfg.n_mels, cfg.n_fft, cfg.mic_rate_hz, cfg.f_min, cfg.mel_f_max)
    mel = fb @ stft_power(signal, cfg.n_fft, cfg.hop)
    if cfg.log_compress:
        mel = np.log(mel + LOG_FLOOR)
    return mel


# -- featurization -----------------------------------------------------------------------------


def _n_points(window, rate) -> int:
    return int(np.floor((window[1] - window[0]) * rate + 0.5))


def feature_length(config: FeatureConfig) -> int:
    n = 0
    n_ft = _n_points(config.ft_window_s, config.ft_rate_hz)
    if "force" in config.modalities:
        n += 2 * n_ft
    if "temperature" in config.modalities:
        n += n_ft
    if "mic" in config.modalities:
        n_audio = _n_points(config.mic_window_s, config.mic_rate_hz)
        n += config.n_mels * (1 + n_audio // config.hop)
    return n


class Featurizer:
    """Caches the Mel filterbank for repeated calls with one config."""

    def __init__(self, config: FeatureConfig):
        self.config = config
        self._fb = None
        if "mic" in config.modalities:
            self._fb = mel_filterbank(config.n_mels, config.n_fft, config.mic_rate_hz,
                                      config.f_min, config.mel_f_max)

    def __call__(self, record: InteractionRecord) -> FeatureVector:
        cfg = self.config
        parts, layout, coverage = [], [], {}
        offset = 0
        dur_ft = cfg.ft_window_s[1] - cfg.ft_window_s[0]
        for mod in cfg.modalities:
            stream = record.stream(mod)
            if mod == "mic":
                win = extract_window(stream, record.contact_time_s, cfg.mic_window_s)
                dur = cfg.mic_window_s[1] - cfg.mic_window_s[0]
                audio = resample_linear(win.samples[:, 0], stream.rate_hz, cfg.mic_rate_hz,
                                        dur, win.offset_s)
                vec = mel_spectrogram(audio, cfg, self._fb).ravel()
            else:
                win = extract_window(stream, record.contact_time_s, cfg.ft_window_s)
                res = resample_linear(win.samples, stream.rate_hz, cfg.ft_rate_hz, dur_ft,
                                      win.offset_s)
                # channel-major: force ch0 then ch1
                vec = res.T.ravel()
            coverage[mod] = win.coverage
            layout.append(Segment(mod, offset, len(vec)))
            offset += len(vec)
            parts.append(vec)
        return FeatureVector(np.concatenate(parts), tuple(layout), record.material,
                             record.object_id, record.interaction_id, coverage)


def featurize(record: InteractionRecord, config: FeatureConfig | None = None) -> FeatureVector:
    return Featurizer(config or FeatureConfig())(record)


def featurize_many(records, config: FeatureConfig) -> tuple[np.ndarray, list[FeatureVector]]:
    fz = Featurizer(config)
    vecs = [fz(r) for r in records]
    if not vecs:
        return np.zeros((0, feature_length(config))), vecs
    return np.stack([v.values for v in vecs]), vecs


# -- standardization ---------------------------------------------------------------------------


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray
    fitted_on: int

    def apply(self, x) -> np.ndarray:
        return standardizer_apply(self, x)


def standardizer_fit(vectors) -> Standardizer:
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("fit needs at least 2 vectors of equal length")
    return Standardizer(x.mean(axis=0), np.maximum(x.std(axis=0), STD_FLOOR), x.shape[0])


def standardizer_apply(std: Standardizer, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != len(std.mean):
        raise ValueError(f"vector length {x.shape[-1]} != standardizer length {len(std.mean)}")
    return (x - std.mean) / std.std


# -- export ------------------------------------------------------------------------------------


def export_features(path, matrix, vectors: list[FeatureVector], config: FeatureConfig) -> None:
    """Write ``path`` (binary32 LE, row-major) plus ``path.json`` describing the layout."""
    path = Path(path)
    m = np.ascontiguousarray(matrix, dtype="<f4")
    path.write_bytes(m.tobytes())
    layout = [asdict(s) for s in vectors[0].layout] if vectors else []
    sidecar = {
        "dtype": "float32-le", "rows": int(m.shape[0]), "cols": int(m.shape[1]),
        "layout": layout, "feature_config": config.to_dict(),
        "rows_meta": [{"interaction_id": v.interaction_id, "object_id": v.object_id,
                       "label": v.label} for v in vectors],
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=1))


def load_features(path) -> tuple[np.ndarray, dict]:
    sidecar = json.loads(Path(str(path) + ".json").read_text())
    m = np.frombuffer(Path(path).read_bytes(), dtype="<f4")
    return m.reshape(sidecar["rows"], sidecar["cols"]), sidecar


def write_pgm(path, matrix) -> None:
    """8-bit binary PGM; rows = Mel bands (row 0 = lowest band at the top), min-max scaled."""
    m = np.asarray(matrix, dtype=np.float64)
    lo, hi = float(m.min()), float(m.max())
    scaled = np.zeros_like(m) if hi == lo else (m - lo) / (hi - lo) * 255.0
    img = np.floor(scaled + 0.5).astype(np.uint8)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos].decode("ascii"))
    if tokens[0] != "P5":
        raise ValueError("not a binary PGM")
    w, h = int(tokens[1]), int(tokens[2])
    return np.frombuffer(raw[pos + 1:pos + 1 + w * h], dtype=np.uint8).reshape(h, w)


def write_csv_matrix(path, matrix) -> None:
    np.savetxt(path, np.asarray(matrix), delimiter=",", fmt="%.9g")


def read_csv_matrix(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)
