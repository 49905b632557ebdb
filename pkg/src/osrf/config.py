"""Run configuration: one validated, YAML-backed object for every CLI command."""

import json
import math
from pathlib import Path

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import InvalidConfig, IoError
from .rng import derive_seed
from .waveform.types import DESK_RATE_HZ, KNOWN_CLASSES, PAPER_RATE_HZ, UNKNOWN_CLASSES, ClassId


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


def _interval(v):
    lo, hi = v
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise ValueError(f"expected a finite interval [lo, hi] with lo <= hi, got {v}")
    return v


class SplitFractions(_Strict):
    train: float = Field(0.8, ge=0, le=1)
    val: float = Field(0.1, ge=0, le=1)
    test: float = Field(0.1, ge=0, le=1)

    @model_validator(mode="after")
    def _sums_to_one(self):
        total = self.train + self.val + self.test
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {total:g}")
        return self


class SliceSection(_Strict):
    slice_len: int = Field(8192, ge=1)
    n_slices_per_signal: int = Field(10, ge=1)
    fft_len: int = Field(4096, ge=1)
    n_segments: int = Field(2, ge=1)

    @model_validator(mode="after")
    def _geometry(self):
        if self.slice_len != self.n_segments * self.fft_len:
            raise ValueError("slice_len must equal n_segments * fft_len")
        return self


class ImpairmentSection(_Strict):
    iq_gain_db_range: tuple[float, float] = (-3.0, 3.0)
    freq_offset_hz_range: tuple[float, float] = (-2500.0, 2500.0)
    snr_db_range: tuple[float, float] = (-10.0, 20.0)
    fading_choices: list[str] = ["Rayleigh", "Rician"]

    _check = field_validator("iq_gain_db_range", "freq_offset_hz_range", "snr_db_range")(_interval)

    @field_validator("fading_choices")
    @classmethod
    def _fading(cls, v):
        if not v or any(f not in ("None", "Rayleigh", "Rician") for f in v):
            raise ValueError("fading_choices must be a non-empty subset of None/Rayleigh/Rician")
        return v


class ArchitectureSection(_Strict):
    conv_channels: list[int] = [16, 32, 64]
    pool: int = Field(4, ge=1)
    dense_units: list[int] = [128]

    @field_validator("conv_channels", "dense_units")
    @classmethod
    def _positive(cls, v):
        if any(c < 1 for c in v):
            raise ValueError("layer widths must be positive")
        return v


class TrainSection(_Strict):
    epochs: int = Field(10, ge=1)
    batch_size: int = Field(128, ge=1)
    lr: float = Field(3e-3, gt=0)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    eps: float = Field(1e-8, gt=0)
    loss: str = "bce"

    @field_validator("loss")
    @classmethod
    def _loss(cls, v):
        if v not in ("cce", "cce_normalized", "bce"):
            raise ValueError("loss must be cce, cce_normalized or bce")
        return v


class OpenSetSection(_Strict):
    threshold: float = Field(0.9999, ge=0, le=1)
    sweep_grid: list[float] = [0.0, 0.5, 0.9, 0.99, 0.999, 0.9999, 0.99999, 1.0]
    objective: str = "balanced"
    accuracy_floor: float | None = Field(None, ge=0, le=1)
    tune_snr_db: float = 10.0

    @field_validator("sweep_grid")
    @classmethod
    def _grid(cls, v):
        if not v or any(not 0 <= t <= 1 for t in v) or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("sweep_grid must be strictly ascending values in [0, 1]")
        return v

    @model_validator(mode="after")
    def _objective(self):
        if self.objective not in ("balanced", "constrained"):
            raise ValueError("objective must be balanced or constrained")
        if self.objective == "constrained" and self.accuracy_floor is None:
            raise ValueError("the constrained objective needs accuracy_floor")
        return self


class RunConfig(_Strict):
    """Everything a pipeline run depends on; unknown keys are rejected."""

    seed: int = Field(0, ge=0, lt=2 ** 64)
    sample_rate_hz: float = Field(DESK_RATE_HZ, gt=0)
    duration_s: float = Field(0.01, gt=0)
    known_classes: list[str] = [c.value for c in KNOWN_CLASSES]
    unknown_classes: list[str] = [c.value for c in UNKNOWN_CLASSES]
    signals_per_class: int = Field(100, ge=1)
    unknown_signals_per_class: int | None = Field(None, ge=1)
    split: SplitFractions = SplitFractions()
    slice: SliceSection = SliceSection()
    impairment: ImpairmentSection = ImpairmentSection()
    architecture: ArchitectureSection = ArchitectureSection()
    train: TrainSection = TrainSection()
    openset: OpenSetSection = OpenSetSection()
    snr_grid: list[float] = [float(v) for v in range(-20, 25, 5)]
    keep_iq: bool = False
    threads: int = Field(1, ge=1)
    deterministic: bool = False
    out_dir: str = "runs"

    @field_validator("known_classes", "unknown_classes")
    @classmethod
    def _classes(cls, v, info):
        pool = KNOWN_CLASSES if info.field_name == "known_classes" else UNKNOWN_CLASSES
        allowed = {c.value for c in pool}
        bad = [c for c in v if c not in allowed]
        if bad:
            raise ValueError(f"not valid {info.field_name}: {bad}")
        if len(set(v)) != len(v):
            raise ValueError("class names must be unique")
        return v

    @model_validator(mode="after")
    def _enough_samples(self):
        if not self.known_classes:
            raise ValueError("known_classes must not be empty")
        n = math.ceil(self.duration_s * self.sample_rate_hz - 1e-9)
        if n < self.slice.slice_len:
            raise ValueError(f"duration gives {n} samples, fewer than slice_len {self.slice.slice_len}")
        return self

    def sub_seed(self, purpose):
        return derive_seed(self.seed, purpose)

    @property
    def effective_threads(self):
        return 1 if self.deterministic else self.threads

    def manifest(self):
        from .dataset_io import ClassEntry, DatasetManifest

        n_unk = self.unknown_signals_per_class or self.signals_per_class
        entries = [ClassEntry(ClassId(c).value, True, self.signals_per_class) for c in self.known_classes]
        entries += [ClassEntry(ClassId(c).value, False, n_unk) for c in self.unknown_classes]
        return DatasetManifest(
            entries,
            seed=self.sub_seed("dataset"),
            split=self.split.model_dump(),
            sample_rate_hz=self.sample_rate_hz,
            duration_s=self.duration_s,
            slice=self.slice.model_dump(),
            impairment={k: list(v) for k, v in self.impairment.model_dump().items()},
            keep_iq=self.keep_iq,
        )

    def architecture_layers(self, num_classes):
        from .nn.model import default_architecture

        a = self.architecture
        return default_architecture((self.slice.n_segments, self.slice.fft_len), num_classes,
                                    tuple(a.conv_channels), a.pool, tuple(a.dense_units))

    def train_config(self):
        from .nn.model import TrainConfig

        t = self.train
        return TrainConfig(t.epochs, t.batch_size, self.sub_seed("shuffle"), t.lr, t.beta1,
                           t.beta2, t.eps, t.loss)

    def to_yaml(self):
        return yaml.safe_dump(json.loads(self.model_dump_json()), sort_keys=True)


PRESETS = {
    "desk": {},
    # 125 MHz, 131072-sample slices as two 65536-point segments, 1440 signals per class
    "paper-scale": {
        "sample_rate_hz": PAPER_RATE_HZ,
        "duration_s": 0.01,
        "signals_per_class": 1440,
        "slice": {"slice_len": 131072, "n_slices_per_signal": 10, "fft_len": 65536, "n_segments": 2},
    },
}


def _format_errors(exc: ValidationError):
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def _merge(base, over):
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def build_config(data=None, preset=None, overrides=None) -> RunConfig:
    """Precedence: ``overrides`` > ``data`` (file contents) > preset > defaults."""
    merged = {}
    if preset is not None:
        if preset not in PRESETS:
            raise InvalidConfig(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        merged = _merge(merged, PRESETS[preset])
    if data:
        if not isinstance(data, dict):
            raise InvalidConfig("config file must contain a mapping at the top level")
        merged = _merge(merged, data)
    if overrides:
        merged = _merge(merged, {k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig.model_validate(merged)
    except ValidationError as exc:
        raise InvalidConfig(_format_errors(exc)) from None


def load_config(path=None, preset=None, overrides=None) -> RunConfig:
    data = None
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise IoError(f"cannot read config {path}: {exc}") from exc
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise InvalidConfig(f"config {path} is not valid YAML: {exc}") from None
        preset = data.pop("preset", preset) if isinstance(data, dict) else preset
    return build_config(data, preset, overrides)


def json_schema():
    return RunConfig.model_json_schema()
