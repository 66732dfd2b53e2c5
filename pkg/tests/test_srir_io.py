import csv
import json

import numpy as np
import pytest
from scipy.io import wavfile

from dirverb.decay import directional_edc, edd
from dirverb.spherical import Direction, default_grid, pwd
from dirverb.srir_io import (PLANES, ChannelCountError, DatasetManifest, ManifestEntry,
                             SampleRateMismatchError, SchemaVersionError, Srir,
                             export_polar_csv, load_dataset, map_from_dict, map_to_dict,
                             n3d_to_sn3d, plane_grid, plane_vectors, read_decay_map, read_srir,
                             sn3d_to_n3d, write_decay_map, write_manifest, write_wav)
from dirverb.synth import isotropic_srir, plane_wave_srir, synthetic_map


def make_dataset(tmp_path, n=2, order=1, fs=48000, convention="acn_sn3d"):
    entries = []
    for i in range(n):
        s = isotropic_srir(order, 0.2, fs, 0.1, seed=i)
        path = tmp_path / f"pos{i}.wav"
        write_wav(path, n3d_to_sn3d(s.samples), fs)
        entries.append(ManifestEntry(f"pos{i}", np.array([i, 0.0, 1.2]), path))
    manifest = DatasetManifest(np.array([5.0, 0, 1.5]), entries, fs, order, convention)
    write_manifest(tmp_path / "manifest.json", manifest)
    return tmp_path / "manifest.json"


def test_dataset_round_trip(tmp_path):
    ds = load_dataset(make_dataset(tmp_path))
    assert ds.ids == ["pos0", "pos1"] and len(ds) == 2
    s = ds.load("pos1")
    assert s.convention == "acn_n3d" and s.sh_order == 1
    np.testing.assert_allclose(s.position, [1, 0, 1.2])
    ref = isotropic_srir(1, 0.2, 48000, 0.1, seed=1).samples
    np.testing.assert_allclose(s.samples, ref, rtol=1e-6, atol=1e-7)  # float32 storage
    assert [k for k, _ in ds] == ds.ids


def _edit_manifest(path, **changes):
    doc = json.loads(path.read_text())
    doc.update(changes)
    path.write_text(json.dumps(doc))


def test_manifest_schema_mismatch(tmp_path):
    path = make_dataset(tmp_path)
    _edit_manifest(path, schema="dirverb-manifest/9")
    with pytest.raises(SchemaVersionError):
        load_dataset(path)


def test_manifest_rate_mismatch(tmp_path):
    path = make_dataset(tmp_path)
    _edit_manifest(path, sample_rate_hz=44100)
    with pytest.raises(SampleRateMismatchError):
        load_dataset(path)


def test_manifest_channel_count_mismatch(tmp_path):
    path = make_dataset(tmp_path)
    _edit_manifest(path, sh_order=2)
    with pytest.raises(ChannelCountError):
        load_dataset(path)


def test_manifest_missing_audio_and_duplicates(tmp_path):
    path = make_dataset(tmp_path)
    doc = json.loads(path.read_text())
    doc["entries"][1]["id"] = "pos0"
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError):
        load_dataset(path)
    (tmp_path / "pos1.wav").unlink()
    with pytest.raises(OSError):
        load_dataset(path)


def test_unknown_convention_rejected():
    with pytest.raises(ValueError):
        DatasetManifest(np.zeros(3), [], 48000, 1, "fuma")


def test_sn3d_n3d_round_trip():
    s = np.random.default_rng(0).standard_normal((16, 10))
    np.testing.assert_allclose(n3d_to_sn3d(sn3d_to_n3d(s)), s, atol=1e-15)
    # order-1 channels scale by sqrt(3), order-3 by sqrt(7)
    np.testing.assert_allclose(sn3d_to_n3d(s)[1:4], np.sqrt(3) * s[1:4])
    np.testing.assert_allclose(sn3d_to_n3d(s)[9:], np.sqrt(7) * s[9:])


def test_read_srir_integer_and_channel_check(tmp_path):
    data = (np.random.default_rng(0).uniform(-0.5, 0.5, (100, 4)) * 32767).astype(np.int16)
    wavfile.write(tmp_path / "a.wav", 48000, data)
    s = read_srir(tmp_path / "a.wav", 1, "acn_n3d")
    np.testing.assert_allclose(s.samples, data.T / 32767)
    with pytest.raises(ChannelCountError):
        read_srir(tmp_path / "a.wav", 2)
    with pytest.raises(SampleRateMismatchError):
        read_srir(tmp_path / "a.wav", 1, expected_rate=44100)


def test_srir_validation():
    with pytest.raises(ValueError):
        Srir(np.zeros((5, 10)), 48000, (0, 0, 0), 1)
    with pytest.raises(ValueError):
        Srir(np.zeros((4, 10)), 0, (0, 0, 0), 1)


def test_write_wav_is_float32_and_leaves_no_temp(tmp_path):
    write_wav(tmp_path / "o.wav", np.ones((3, 50)) * 0.25, 44100)
    fs, data = wavfile.read(tmp_path / "o.wav")
    assert fs == 44100 and data.dtype == np.float32 and data.shape == (50, 3)
    assert [p.name for p in tmp_path.iterdir()] == ["o.wav"]


def test_decay_map_round_trip_is_exact(tmp_path):
    g = default_grid(24)
    rng = np.random.default_rng(0)
    m = synthetic_map(rng.uniform(0.3, 3, (3, 24)), g, edc0_db=rng.normal(size=24),
                      position=(1.1, 2.2, 3.3))
    m.flags[1, 4] = 1
    write_decay_map(m, tmp_path / "m.json")
    assert read_decay_map(tmp_path / "m.json") == m
    assert map_from_dict(map_to_dict(m)) == m


def test_decay_map_schema_checked():
    doc = map_to_dict(synthetic_map(1.0, default_grid(12)))
    doc["schema"] = "dirverb-map/0"
    with pytest.raises(SchemaVersionError):
        map_from_dict(doc)


@pytest.mark.parametrize("plane", PLANES)
def test_plane_vectors_are_unit_and_in_plane(plane):
    v = plane_vectors(plane, np.linspace(0, 2 * np.pi, 13))
    np.testing.assert_allclose(np.linalg.norm(v, axis=1), 1.0)
    normal = {"lateral": 2, "median": 1, "transverse": 0}[plane]
    np.testing.assert_allclose(v[:, normal], 0.0, atol=1e-15)
    assert len(plane_grid(plane, 36)) == 36


def test_unknown_plane():
    with pytest.raises(ValueError):
        plane_vectors("sagittal", [0.0])


def test_polar_csv(tmp_path):
    srir = plane_wave_srir(2, Direction(0.0, 0.0),
                           np.random.default_rng(0).standard_normal(480) * np.exp(-np.arange(480) / 100))
    dev = edd(directional_edc(pwd(srir, default_grid(240)), None))
    rows = export_polar_csv(dev, "lateral", tmp_path / "p.csv", n_angles=36, time_step_s=1e-3)
    with open(tmp_path / "p.csv") as f:
        table = list(csv.reader(f))
    assert table[0] == ["time_s", "angle_deg", "edd_db"]
    assert rows == len(table) - 1 == 10 * 36
    first = np.array([float(r[2]) for r in table[1:37]])
    # the source sits at azimuth 0, so angle 0 carries the largest deviation
    assert np.argmax(first) == 0 and first[0] > 0
