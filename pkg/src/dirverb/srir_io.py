"""Reading SRIR datasets and writing analysis products.

Dataset manifest (``dirverb-manifest/1``)::

    {
      "schema": "dirverb-manifest/1",
      "frame": "right-handed hall frame, +x toward the stage, +z up, metres",
      "source_position": [0.0, 0.0, 1.5],
      "sample_rate_hz": 48000,
      "sh_order": 4,
      "channel_convention": "acn_sn3d",
      "entries": [{"id": "1", "position": [12.0, -3.0, 1.2], "audio_path": "pos01.wav"}]
    }

Audio paths are relative to the manifest. Audio is multichannel float WAV
with channels in ACN order. Every loaded :class:`Srir` is converted to N3D.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .decay import BandSpec, DecaySurface, DirectionalDecayMap
from .spherical import DirectionGrid, channel_degrees, num_channels, vectors_to_angles

MANIFEST_SCHEMA = "dirverb-manifest/1"
MAP_SCHEMA = "dirverb-map/1"
CONVENTIONS = ("acn_sn3d", "acn_n3d")


class SchemaVersionError(ValueError):
    pass


class ChannelCountError(ValueError):
    pass


class SampleRateMismatchError(ValueError):
    pass


@dataclass
class Srir:
    """Spatial room impulse response, ``samples`` is ``[channels x N]``."""

    samples: np.ndarray
    sample_rate_hz: int
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    sh_order: int = 0
    convention: str = "acn_n3d"

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        if self.convention not in CONVENTIONS:
            raise ValueError(f"unknown channel convention {self.convention!r}")
        if self.samples.shape[0] != num_channels(self.sh_order):
            raise ChannelCountError(
                f"order {self.sh_order} needs {num_channels(self.sh_order)} channels, "
                f"got {self.samples.shape[0]}")
        if self.samples.shape[1] == 0:
            raise ValueError("empty SRIR")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("SRIR contains non-finite samples")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample rate must be positive")

    def to_n3d(self) -> "Srir":
        if self.convention == "acn_n3d":
            return self
        return Srir(sn3d_to_n3d(self.samples), self.sample_rate_hz, self.position,
                    self.sh_order, "acn_n3d")


def sn3d_to_n3d(samples: np.ndarray) -> np.ndarray:
    order = int(np.sqrt(len(samples))) - 1
    return samples * np.sqrt(2 * channel_degrees(order) + 1)[:, None]


def n3d_to_sn3d(samples: np.ndarray) -> np.ndarray:
    order = int(np.sqrt(len(samples))) - 1
    return samples / np.sqrt(2 * channel_degrees(order) + 1)[:, None]


@dataclass
class ManifestEntry:
    id: str
    position: np.ndarray
    audio_path: Path


@dataclass
class DatasetManifest:
    source_position: np.ndarray
    entries: list[ManifestEntry]
    sample_rate_hz: int
    sh_order: int
    channel_convention: str
    frame: str = ""

    def __post_init__(self):
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("manifest entry ids must be unique")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if self.sh_order < 0:
            raise ValueError("sh_order must be non-negative")
        if self.channel_convention not in CONVENTIONS:
            raise ValueError(f"unknown channel convention {self.channel_convention!r}")


class Dataset:
    """A manifest plus lazily loaded SRIRs, addressed by entry id."""

    def __init__(self, manifest: DatasetManifest):
        self.manifest = manifest
        self._by_id = {e.id: e for e in manifest.entries}

    def __len__(self):
        return len(self.manifest.entries)

    @property
    def ids(self) -> list[str]:
        return [e.id for e in self.manifest.entries]

    def load(self, entry_id: str) -> Srir:
        e = self._by_id[entry_id]
        return read_srir(e.audio_path, self.manifest.sh_order,
                         self.manifest.channel_convention, e.position,
                         expected_rate=self.manifest.sample_rate_hz)

    def __iter__(self):
        for e in self.manifest.entries:
            yield e.id, self.load(e.id)


def read_srir(path, sh_order: int, convention: str = "acn_n3d", position=(0, 0, 0),
              expected_rate: int | None = None) -> Srir:
    """Load a multichannel WAV as an N3D :class:`Srir`."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", wavfile.WavFileWarning)
        fs, data = wavfile.read(path)
    if expected_rate is not None and fs != expected_rate:
        raise SampleRateMismatchError(f"{path}: header rate {fs} Hz, manifest {expected_rate} Hz")
    data = np.atleast_2d(data.T if data.ndim == 2 else data[None])
    if np.issubdtype(data.dtype, np.integer):
        data = data / float(np.iinfo(data.dtype).max)
    if data.shape[0] != num_channels(sh_order):
        raise ChannelCountError(
            f"{path}: order {sh_order} needs {num_channels(sh_order)} channels, "
            f"file has {data.shape[0]}")
    return Srir(data.astype(float), int(fs), position, sh_order, convention).to_n3d()


def write_wav(path, samples: np.ndarray, sample_rate_hz: int) -> None:
    """Write ``[channels x N]`` samples as 32-bit float WAV, atomically."""
    data = np.atleast_2d(np.asarray(samples, dtype=np.float32)).T
    _atomic_write(path, lambda f: wavfile.write(f, int(sample_rate_hz), data), binary=True)


def load_dataset(manifest_path) -> Dataset:
    """Parse and validate a dataset manifest; audio is loaded on demand."""
    manifest_path = Path(manifest_path)
    doc = json.loads(manifest_path.read_text())
    if doc.get("schema") != MANIFEST_SCHEMA:
        raise SchemaVersionError(f"expected schema {MANIFEST_SCHEMA!r}, got {doc.get('schema')!r}")
    root = manifest_path.parent
    entries = []
    for e in doc["entries"]:
        audio = root / e["audio_path"]
        if not audio.exists():
            raise FileNotFoundError(f"audio file {audio} not found")
        entries.append(ManifestEntry(str(e["id"]), np.asarray(e["position"], dtype=float), audio))
    manifest = DatasetManifest(np.asarray(doc["source_position"], dtype=float), entries,
                               int(doc["sample_rate_hz"]), int(doc["sh_order"]),
                               doc["channel_convention"], doc.get("frame", ""))
    # header checks up front, sample data stays on disk
    for e in entries:
        fs, n_ch = _wav_header(e.audio_path)
        if fs != manifest.sample_rate_hz:
            raise SampleRateMismatchError(
                f"{e.audio_path}: header rate {fs} Hz, manifest {manifest.sample_rate_hz} Hz")
        if n_ch != num_channels(manifest.sh_order):
            raise ChannelCountError(
                f"{e.audio_path}: order {manifest.sh_order} needs "
                f"{num_channels(manifest.sh_order)} channels, file has {n_ch}")
    return Dataset(manifest)


def _wav_header(path):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", wavfile.WavFileWarning)
        fs, data = wavfile.read(path, mmap=True)
    return int(fs), 1 if data.ndim == 1 else data.shape[1]


def write_manifest(path, manifest: DatasetManifest) -> None:
    root = Path(path).parent
    doc = {
        "schema": MANIFEST_SCHEMA,
        "frame": manifest.frame,
        "source_position": list(map(float, manifest.source_position)),
        "sample_rate_hz": manifest.sample_rate_hz,
        "sh_order": manifest.sh_order,
        "channel_convention": manifest.channel_convention,
        "entries": [{"id": e.id, "position": list(map(float, e.position)),
                     "audio_path": os.path.relpath(e.audio_path, root)}
                    for e in manifest.entries],
    }
    _atomic_write(path, lambda f: f.write(json.dumps(doc, indent=2)))


def _atomic_write(path, writer, binary=False):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb" if binary else "w") as f:
            writer(f)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def map_to_dict(m: DirectionalDecayMap) -> dict:
    g = m.grid
    return {
        "schema": MAP_SCHEMA,
        "position": m.position.tolist(),
        "grid": {"kind": g.kind, "azimuth_rad": g.azimuth.tolist(),
                 "elevation_rad": g.elevation.tolist(),
                 "weights": None if g.weights is None else g.weights.tolist()},
        "bands": m.bands.to_dict(),
        "t60_s": m.t60_s.tolist(),
        "edt_s": m.edt_s.tolist(),
        "edc0_db": m.edc0_db.tolist(),
        "mean_t60_s": m.mean_t60_s.tolist(),
        "flags": m.flags.tolist(),
    }


def map_from_dict(doc: dict) -> DirectionalDecayMap:
    if doc.get("schema") != MAP_SCHEMA:
        raise SchemaVersionError(f"expected schema {MAP_SCHEMA!r}, got {doc.get('schema')!r}")
    g = doc["grid"]
    grid = DirectionGrid(np.array(g["azimuth_rad"], dtype=float),
                         np.array(g["elevation_rad"], dtype=float),
                         None if g["weights"] is None else np.array(g["weights"], dtype=float),
                         kind=g["kind"])
    return DirectionalDecayMap(grid, BandSpec.from_dict(doc["bands"]), doc["t60_s"],
                               doc["edt_s"], doc["edc0_db"], doc["mean_t60_s"],
                               doc["position"], doc["flags"])


def write_decay_map(m: DirectionalDecayMap, path) -> None:
    """Serialise a map as ``dirverb-map/1`` JSON (float64 values round-trip exactly)."""
    text = json.dumps(map_to_dict(m))
    _atomic_write(path, lambda f: f.write(text))


def read_decay_map(path) -> DirectionalDecayMap:
    return map_from_dict(json.loads(Path(path).read_text()))


PLANES = ("lateral", "median", "transverse")


def plane_vectors(plane: str, angles_rad) -> np.ndarray:
    """Unit vectors sweeping a plane through the listener.

    lateral: horizontal, angle = azimuth. median: x-z plane, 0 = front,
    90 = up. transverse: y-z plane, 0 = left, 90 = up.
    """
    a = np.asarray(angles_rad, dtype=float)
    c, s, z = np.cos(a), np.sin(a), np.zeros_like(a)
    if plane == "lateral":
        return np.stack([c, s, z], axis=-1)
    if plane == "median":
        return np.stack([c, z, s], axis=-1)
    if plane == "transverse":
        return np.stack([z, c, s], axis=-1)
    raise ValueError(f"unknown plane {plane!r}; choose from {PLANES}")


def plane_grid(plane: str, n_angles: int = 72) -> DirectionGrid:
    """Equally spaced directions covering 360 degrees of a plane."""
    az, el = vectors_to_angles(plane_vectors(plane, 2 * np.pi * np.arange(n_angles) / n_angles))
    return DirectionGrid(az, el)


def export_polar_csv(edd_surface: DecaySurface, plane: str, path, n_angles: int = 72,
                     band: int = 0, time_step_s: float | None = None) -> int:
    """Write ``time_s,angle_deg,edd_db`` rows for polar plotting.

    Each of the `n_angles` plane angles takes the EDD of the nearest
    surface direction. Returns the number of data rows written.
    """
    values = np.asarray(edd_surface.values_db)
    if values.size == 0 or values.shape[-1] == 0:
        raise ValueError("empty EDD surface")
    angles = 2 * np.pi * np.arange(n_angles) / n_angles
    idx, _ = edd_surface.grid.nearest(plane_vectors(plane, angles))
    fs = edd_surface.sample_rate_hz
    n_t = values.shape[-1]
    step = 1 if time_step_s is None else max(1, int(round(time_step_s * fs)))
    t_idx = np.arange(0, n_t, step)
    per_dir = values[band][idx][:, t_idx]

    def write(f):
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["time_s", "angle_deg", "edd_db"])
        for ti, n in enumerate(t_idx):
            for ai, a in enumerate(angles):
                w.writerow([f"{n / fs:.9g}", f"{np.degrees(a):.6g}", f"{per_dir[ai, ti]:.6g}"])

    _atomic_write(path, write)
    return len(t_idx) * n_angles
