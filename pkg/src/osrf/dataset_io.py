"""Deterministic dataset builds and the ``OSRFDAT1`` record container.

Layout of one split file (all integers and reals little-endian)::

    b"OSRFDAT1"
    u32 n, n bytes of UTF-8 manifest JSON
    repeated: RecordHeader (fixed struct) + float32 features [+ float32 I/Q pairs]
    u32 CRC32 of every preceding byte

Base signals are assigned to train/val/test before slicing, so no slice of a
base signal can end up in two splits.
"""

import hashlib
import json
import math
import os
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .channel import Fading, ImpairmentConfig, augment
from .errors import ChecksumMismatch, InvalidManifest, IoError
from .features import FeatureTensor, SliceConfig, _shift_bursts, bootstrap_slices, preprocess
from .rng import derive_seed
from .waveform.families import gen_class
from .waveform.types import DESK_RATE_HZ, KNOWN_CLASSES, ClassId

SCHEMA_VERSION = 1
DATA_MAGIC = b"OSRFDAT1"
SPLITS = ("train", "val", "test")
SIDECAR = "manifest.json"
_FADING_CODE = {Fading.NONE: 0, Fading.RAYLEIGH: 1, Fading.RICIAN: 2}
_CHUNK = 1 << 20


@dataclass(frozen=True)
class ClassEntry:
    name: str
    known: bool
    count: int  # base signals


@dataclass
class DatasetManifest:
    classes: list
    seed: int = 0
    split: dict = field(default_factory=lambda: {"train": 0.8, "val": 0.1, "test": 0.1})
    sample_rate_hz: float = DESK_RATE_HZ
    duration_s: float = 0.01
    slice: dict = field(default_factory=lambda: asdict(SliceConfig()))
    impairment: dict = field(default_factory=lambda: {
        "iq_gain_db_range": [-3.0, 3.0],
        "freq_offset_hz_range": [-2500.0, 2500.0],
        "snr_db_range": [-10.0, 20.0],
        "fading_choices": ["Rayleigh", "Rician"],
    })
    keep_iq: bool = False
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        self.classes = [c if isinstance(c, ClassEntry) else ClassEntry(**c) for c in self.classes]
        self.validate()

    @classmethod
    def simple(cls, known, unknown=(), signals_per_class=10, **kw):
        """Manifest with the same base-signal count for every class."""
        entries = [ClassEntry(ClassId(c).value, True, signals_per_class) for c in known]
        entries += [ClassEntry(ClassId(c).value, False, signals_per_class) for c in unknown]
        return cls(entries, **kw)

    def validate(self):
        if self.schema_version != SCHEMA_VERSION:
            raise InvalidManifest(f"unsupported schema_version {self.schema_version}")
        if not self.classes:
            raise InvalidManifest("manifest lists no classes")
        names = [c.name for c in self.classes]
        if len(set(names)) != len(names):
            raise InvalidManifest("duplicate class names")
        for c in self.classes:
            try:
                ClassId(c.name)
            except ValueError:
                raise InvalidManifest(f"unknown class {c.name!r}") from None
            if not isinstance(c.count, int) or c.count < 1:
                raise InvalidManifest(f"class {c.name} needs a positive integer count")
        if not any(c.known for c in self.classes):
            raise InvalidManifest("at least one known class is required")
        if len(self.classes) > 0xFFFF:
            raise InvalidManifest("too many classes")
        if set(self.split) != set(SPLITS):
            raise InvalidManifest(f"split fractions must name exactly {SPLITS}")
        fr = [float(self.split[s]) for s in SPLITS]
        if any(not (0 <= f <= 1) for f in fr):
            raise InvalidManifest("split fractions must lie in [0, 1]")
        if abs(sum(fr) - 1.0) > 1e-9:
            raise InvalidManifest(f"split fractions sum to {sum(fr)}, not 1")
        try:
            cfg = self.slice_config
            imp = self.impairment_config(0)
        except ValueError as exc:
            raise InvalidManifest(str(exc)) from None
        if not isinstance(imp.snr_db, tuple):
            raise InvalidManifest("snr_db_range must be an interval")
        if not (self.sample_rate_hz > 0 and self.duration_s > 0):
            raise InvalidManifest("sample rate and duration must be positive")
        if int(math.ceil(self.duration_s * self.sample_rate_hz - 1e-9)) < cfg.slice_len:
            raise InvalidManifest("signal duration is shorter than one slice")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise InvalidManifest("seed must be a 64-bit unsigned integer")

    @property
    def slice_config(self):
        return SliceConfig(**self.slice)

    def impairment_config(self, seed, snr_db=None):
        imp = self.impairment
        return ImpairmentConfig(
            iq_gain_db_range=tuple(imp["iq_gain_db_range"]),
            freq_offset_hz_range=tuple(imp["freq_offset_hz_range"]),
            snr_db=tuple(imp["snr_db_range"]) if snr_db is None else snr_db,
            fading_choices=tuple(imp.get("fading_choices", ("Rayleigh", "Rician"))),
            seed=seed,
        )

    @property
    def known_classes(self):
        return [c.name for c in self.classes if c.known]

    @property
    def unknown_classes(self):
        return [c.name for c in self.classes if not c.known]

    def base_split_counts(self, count):
        """Base signals per split for a class with ``count`` signals."""
        n_val = int(round(self.split["val"] * count))
        n_test = int(round(self.split["test"] * count))
        n_val = min(n_val, count)
        n_test = min(n_test, count - n_val)
        return {"train": count - n_val - n_test, "val": n_val, "test": n_test}

    def split_of(self, count, index):
        c = self.base_split_counts(count)
        if index < c["train"]:
            return "train"
        return "val" if index < c["train"] + c["val"] else "test"

    def expected_counts(self):
        """{split: {class: n_records}} implied by the manifest."""
        per = self.slice_config.n_slices_per_signal
        out = {s: {} for s in SPLITS}
        for c in self.classes:
            for s, n in self.base_split_counts(c.count).items():
                out[s][c.name] = n * per
        return out

    def to_dict(self):
        d = asdict(self)
        d["classes"] = [asdict(c) for c in self.classes]
        return d

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(**d)
        except TypeError as exc:
            raise InvalidManifest(str(exc)) from None

    def canonical_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def hash(self):
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


# ------------------------------------------------------------------ records

_HEADER = struct.Struct("<HBBIIQIIdddddBQQIII")


@dataclass(frozen=True)
class RecordHeader:
    class_index: int  # position in manifest.classes
    split: int
    known: bool
    base_index: int
    slice_index: int
    base_seed: int
    slice_offset: int
    sample_count: int
    sample_rate_hz: float
    snr_db: float
    gain_db: float
    offset_hz: float
    k_factor_db: float  # NaN unless Rician
    fading: int
    impair_seed: int
    channel_seed: int
    n_values: int
    n_iq: int
    checksum: int = 0

    SIZE = _HEADER.size

    def pack(self, checksum=None):
        vals = asdict(self)
        if checksum is not None:
            vals["checksum"] = checksum
        vals["known"] = int(vals["known"])
        return _HEADER.pack(*vals.values())

    @classmethod
    def unpack(cls, buf):
        h = cls(*_HEADER.unpack(buf))
        return h.__class__(**{**asdict(h), "known": bool(h.known)})

    def to_dict(self):
        return asdict(self)


def _record_bytes(header: RecordHeader, values, iq=None):
    payload = np.ascontiguousarray(values, dtype="<f4").tobytes()
    if iq is not None:
        pairs = np.empty(2 * iq.size, dtype="<f4")
        pairs[0::2], pairs[1::2] = iq.real, iq.imag
        payload += pairs.tobytes()
    head = header.pack(checksum=0)
    crc = zlib.crc32(payload, zlib.crc32(head[:-4]))
    return header.pack(checksum=crc) + payload


def _slice_records(manifest, cls_index, base_index, split):
    """Records (in slice order) for one base signal; pure function of its inputs."""
    entry = manifest.classes[cls_index]
    cfg = manifest.slice_config
    base_seed = derive_seed(manifest.seed, "base", entry.name, base_index)
    sig = gen_class(entry.name, manifest.duration_s, base_seed, manifest.sample_rate_hz)
    out = []
    for j, sl in enumerate(bootstrap_slices(sig, cfg, derive_seed(base_seed, "slices"))):
        impair_seed = derive_seed(base_seed, "impair", j)
        imp = augment(sl, manifest.impairment_config(impair_seed))
        feat = preprocess(imp, cfg)
        rec = imp.meta["impairments"]
        header = RecordHeader(
            class_index=cls_index, split=SPLITS.index(split), known=entry.known,
            base_index=base_index, slice_index=j, base_seed=base_seed,
            slice_offset=sl.meta["slice_offset"], sample_count=sl.samples.size,
            sample_rate_hz=sl.sample_rate_hz, snr_db=rec["snr_db"], gain_db=rec["gain_db"],
            offset_hz=rec["offset_hz"],
            k_factor_db=math.nan if rec["k_factor_db"] is None else rec["k_factor_db"],
            fading=_FADING_CODE[Fading(rec["fading"])], impair_seed=impair_seed,
            channel_seed=rec["channel_seed"], n_values=feat.values.size,
            n_iq=imp.samples.size if manifest.keep_iq else 0,
        )
        out.append(_record_bytes(header, feat.values, imp.samples if manifest.keep_iq else None))
    return out


class _Writer:
    """Single writer per split file; tracks the running CRC of everything written."""

    def __init__(self, path, manifest_json):
        self.path = Path(path)
        self.tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        self.fh = open(self.tmp, "wb")
        self.crc = 0
        self.count = 0
        blob = manifest_json.encode()
        self._write(DATA_MAGIC + struct.pack("<I", len(blob)) + blob)

    def _write(self, b):
        self.fh.write(b)
        self.crc = zlib.crc32(b, self.crc)

    def add(self, rec):
        self._write(rec)
        self.count += 1

    def close(self):
        self.fh.write(struct.pack("<I", self.crc))
        self.fh.close()
        os.replace(self.tmp, self.path)


def split_path(root, split):
    return Path(root) / f"{split}.osrf"


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(_CHUNK), b""):
            h.update(chunk)
    return h.hexdigest()


def build_dataset(manifest: DatasetManifest, out_dir, threads=1, progress=None):
    """Generate, slice, impair, preprocess and write every split.

    Work is parallel per base signal (``threads`` workers); records reach the
    single writer in a fixed order, so the files are byte-identical for any
    thread count. Returns the sidecar dict.
    """
    manifest.validate()
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out_dir}: {exc}") from exc
    mjson = manifest.canonical_json()
    jobs = []
    for ci, entry in enumerate(manifest.classes):
        for bi in range(entry.count):
            jobs.append((ci, bi, manifest.split_of(entry.count, bi)))
    try:
        writers = {s: _Writer(split_path(out_dir, s), mjson) for s in SPLITS}
    except OSError as exc:
        raise IoError(f"cannot write dataset files in {out_dir}: {exc}") from exc

    def work(job):
        return job[2], _slice_records(manifest, *job)

    try:
        if threads and threads > 1:
            with ThreadPoolExecutor(max_workers=int(threads)) as pool:
                results = pool.map(work, jobs)
                for done, (split, recs) in enumerate(results, 1):
                    for r in recs:
                        writers[split].add(r)
                    if progress:
                        progress(done, len(jobs))
        else:
            for done, job in enumerate(jobs, 1):
                split, recs = work(job)
                for r in recs:
                    writers[split].add(r)
                if progress:
                    progress(done, len(jobs))
        for w in writers.values():
            w.close()
    except OSError as exc:
        raise IoError(f"failed writing dataset: {exc}") from exc

    files = {}
    for s in SPLITS:
        p = split_path(out_dir, s)
        files[s] = {"path": p.name, "records": writers[s].count, "sha256": _sha256(p)}
    sidecar = {
        "manifest": manifest.to_dict(),
        "manifest_hash": manifest.hash(),
        "files": files,
        "counts": manifest.expected_counts(),
    }
    sidecar["dataset_hash"] = dataset_hash(sidecar)
    with open(out_dir / SIDECAR, "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return sidecar


def dataset_hash(sidecar):
    """Hash over the manifest and every split file digest."""
    h = hashlib.sha256(sidecar["manifest_hash"].encode())
    for s in SPLITS:
        h.update(f"{s}:{sidecar['files'][s]['sha256']}".encode())
    return h.hexdigest()


# ------------------------------------------------------------------ reading


def read_sidecar(root):
    path = Path(root) / SIDECAR
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise IoError(f"no dataset manifest at {path}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def load_manifest(root):
    return DatasetManifest.from_dict(read_sidecar(root)["manifest"])


def verify_file(path):
    """Check the trailing CRC32 by streaming the file once."""
    size = os.path.getsize(path)
    if size < len(DATA_MAGIC) + 8:
        raise ChecksumMismatch(f"{path} is truncated")
    crc = 0
    remaining = size - 4
    with open(path, "rb") as fh:
        while remaining:
            chunk = fh.read(min(_CHUNK, remaining))
            if not chunk:
                raise ChecksumMismatch(f"{path} is truncated")
            crc = zlib.crc32(chunk, crc)
            remaining -= len(chunk)
        (stored,) = struct.unpack("<I", fh.read(4))
    if crc != stored:
        raise ChecksumMismatch(f"file checksum mismatch in {path}")


def iter_records(path, verify=True):
    """Yield ``(header, values, iq)`` in file order, checking every record CRC."""
    path = Path(path)
    if not path.exists():
        raise IoError(f"missing dataset file {path}")
    if verify:
        verify_file(path)
    end = os.path.getsize(path) - 4
    with open(path, "rb") as fh:
        if fh.read(len(DATA_MAGIC)) != DATA_MAGIC:
            raise IoError(f"{path} is not an OSRFDAT1 container")
        (n,) = struct.unpack("<I", fh.read(4))
        manifest = json.loads(fh.read(n).decode())
        shape = (manifest["slice"]["n_segments"], manifest["slice"]["fft_len"])
        while fh.tell() < end:
            raw = fh.read(RecordHeader.SIZE)
            if len(raw) != RecordHeader.SIZE:
                raise ChecksumMismatch(f"truncated record in {path}")
            header = RecordHeader.unpack(raw)
            payload = fh.read(4 * header.n_values + 8 * header.n_iq)
            if zlib.crc32(payload, zlib.crc32(raw[:-4])) != header.checksum:
                raise ChecksumMismatch(
                    f"record checksum mismatch in {path} (base {header.base_index}, "
                    f"slice {header.slice_index})")
            values = np.frombuffer(payload, dtype="<f4", count=header.n_values).reshape(shape)
            iq = None
            if header.n_iq:
                pairs = np.frombuffer(payload, dtype="<f4", offset=4 * header.n_values)
                iq = pairs[0::2].astype(np.float64) + 1j * pairs[1::2]
            yield header, values, iq


def load_split(root, split, verify=True):
    """Stream ``(FeatureTensor, class_index)`` pairs of one split in stored order."""
    if split not in SPLITS:
        raise InvalidManifest(f"split must be one of {SPLITS}")
    manifest = load_manifest(root)
    names = [c.name for c in manifest.classes]
    for header, values, iq in iter_records(split_path(root, split), verify=verify):
        meta = {"label": names[header.class_index], "header": header.to_dict()}
        if iq is not None:
            meta["iq"] = iq
        yield FeatureTensor(values, meta), header.class_index


@dataclass
class SplitArrays:
    """A split materialized as arrays for training or batch prediction."""

    x: np.ndarray  # (n, n_segments, fft_len) float32
    labels: np.ndarray  # known-class index, or -1 for unknown-class records
    headers: list
    class_names: list  # names of the records' classes, per record


def load_arrays(root, split, which="known", verify=True):
    """Load one split into memory.

    ``which`` selects known-class records, unknown-class records, or ``all``.
    Labels index the manifest's known classes in order.
    """
    manifest = load_manifest(root)
    names = [c.name for c in manifest.classes]
    known_index = {n: i for i, n in enumerate(manifest.known_classes)}
    xs, labels, headers, cls = [], [], [], []
    for header, values, _ in iter_records(split_path(root, split), verify=verify):
        if which == "known" and not header.known:
            continue
        if which == "unknown" and header.known:
            continue
        name = names[header.class_index]
        xs.append(values)
        labels.append(known_index.get(name, -1))
        headers.append(header)
        cls.append(name)
    shape = manifest.slice_config.feature_shape
    x = np.stack(xs) if xs else np.zeros((0,) + shape, dtype=np.float32)
    return SplitArrays(x, np.asarray(labels, dtype=np.int64), headers, cls)


def regenerate_base(manifest: DatasetManifest, header: RecordHeader):
    """The full clean base signal behind a record."""
    entry = manifest.classes[header.class_index]
    return gen_class(entry.name, manifest.duration_s, header.base_seed, manifest.sample_rate_hz)


def regenerate_slice(manifest: DatasetManifest, header: RecordHeader, base=None):
    """The clean (pre-impairment) slice a record was built from.

    Pass ``base`` (from ``regenerate_base``) to avoid re-synthesizing the
    base signal for every slice.
    """
    sig = base if base is not None else regenerate_base(manifest, header)
    a, n = header.slice_offset, header.sample_count
    meta = {"slice_offset": a}
    if sig.meta.get("bursts") is not None:
        meta["bursts"] = _shift_bursts(sig.meta["bursts"], a, n)
    return sig.replace(sig.samples[a:a + n].copy(), **meta)


def default_known_manifest(signals_per_class=100, **kw):
    return DatasetManifest.simple(KNOWN_CLASSES, signals_per_class=signals_per_class, **kw)
