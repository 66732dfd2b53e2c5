"""``dirverb`` command-line driver.

Exit codes: 0 success, 1 validation failure, 2 I/O failure, 3 verify
tolerance exceeded. Progress goes to stderr, results to files or stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .decay import BandSpec, analyze_dirirs, analyze_position, directional_edc, edd
from .dfdn import DesignRequest, DfdnConfig, design, render
from .dfdn.network import resample_map
from .dfdn.render import check_block_size
from .interp import idw_weights, interpolate_map
from .spherical import (SHIPPED_TDESIGNS, DirectionGrid, default_grid, max_re_weights,
                        order_from_channels, pwd)
from .srir_io import (MAP_SCHEMA, MANIFEST_SCHEMA, PLANES, Srir, export_polar_csv,
                      load_dataset, plane_grid, read_decay_map, read_srir, write_decay_map,
                      write_wav)

log = logging.getLogger("dirverb")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_TOLERANCE = 0, 1, 2, 3


class ToleranceExceeded(Exception):
    pass


def cmd_analyze(args) -> int:
    dataset = load_dataset(args.manifest)
    if len(dataset) == 0:
        raise ValueError("manifest has no entries")
    bands = BandSpec.parse(args.bands)
    grid = default_grid(args.grid_size)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    weights = max_re_weights(dataset.manifest.sh_order) if args.max_re else None
    failed = []
    print("id\t" + "\t".join(f"T60_{b.low_hz:g}-{b.high_hz:g}Hz" for b in bands.bands))
    for entry_id in dataset.ids:
        log.info("analysing %s", entry_id)
        try:
            m = analyze_position(dataset.load(entry_id), grid, bands, degree_weights=weights)
        except ValueError as err:
            log.error("entry %s failed: %s", entry_id, err)
            failed.append(entry_id)
            continue
        write_decay_map(m, out_dir / f"{entry_id}.map.json")
        print(entry_id + "\t" + "\t".join(f"{v:.3f}" for v in m.mean_t60_s))
    if failed:
        log.error("%d of %d entries failed", len(failed), len(dataset))
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_edd(args) -> int:
    bands = None if args.band == "broadband" else BandSpec.parse(args.band)
    if args.channel_directions:
        cfg = DfdnConfig.load(args.channel_directions)
        from scipy.io import wavfile
        fs, data = wavfile.read(args.srir)
        y = np.atleast_2d(np.asarray(data, dtype=float).T)
        grid = cfg.group_directions
        if y.shape[0] != len(grid):
            raise ValueError(f"{y.shape[0]} channels but {len(grid)} channel directions")
        surface = directional_edc(y, bands, fs, grid)
        dev = edd(surface)
    else:
        from scipy.io import wavfile
        _, data = wavfile.read(args.srir, mmap=True)
        order = order_from_channels(1 if data.ndim == 1 else data.shape[1])
        srir = read_srir(args.srir, order, args.convention)
        sphere = default_grid(args.grid_size)
        plane = plane_grid(args.plane, args.angles)
        grid = DirectionGrid(np.concatenate([sphere.azimuth, plane.azimuth]),
                             np.concatenate([sphere.elevation, plane.elevation]))
        surface = directional_edc(pwd(srir, grid), bands)
        dev = edd(surface, mean_over=np.arange(len(sphere)))
    rows = export_polar_csv(dev, args.plane, args.out, n_angles=args.angles,
                            time_step_s=args.time_step)
    log.info("wrote %d rows to %s", rows, args.out)
    return EXIT_OK


def cmd_interp(args) -> int:
    maps = [read_decay_map(p) for p in args.maps]
    if not maps:
        raise ValueError("no input maps")
    query = idw_weights(args.target, [m.position for m in maps], args.m_nearest, args.power)
    for i, w in zip(query.neighbor_ids, query.weights):
        log.info("%s: d=%.3f m, w=%.4f", args.maps[i], np.linalg.norm(maps[i].position - query.target), w)
    write_decay_map(interpolate_map(maps, query), args.out)
    return EXIT_OK


def _load_or_design(args) -> DfdnConfig:
    if args.config:
        return DfdnConfig.load(args.config)
    m = read_decay_map(args.map)
    return design(m, DesignRequest(args.N, args.K, seed=args.seed, sample_rate_hz=args.fs))


def cmd_render(args) -> int:
    check_block_size(args.block_size)
    if args.length < 0:
        raise ValueError("length must be non-negative")
    cfg = _load_or_design(args)
    if args.save_config:
        cfg.save(args.save_config)
    fs = cfg.sample_rate_hz
    if args.impulse:
        x = np.zeros(1)
        x[0] = 1.0
        length = int(round(args.length * fs))
    else:
        from scipy.io import wavfile
        in_fs, data = wavfile.read(args.input)
        if in_fs != fs:
            raise ValueError(f"input is {in_fs} Hz, reverberator runs at {fs} Hz")
        x = np.asarray(data, dtype=float)
        x = x.mean(axis=1) if x.ndim == 2 else x
        if len(x) == 0:
            raise ValueError("input signal is empty")
        length = len(x) + int(round(args.length * fs))
    y = render(cfg, x, length, block_size=args.block_size)
    write_wav(args.out, y, fs)
    log.info("wrote %d channels x %d samples to %s", y.shape[0], y.shape[1], args.out)
    return EXIT_OK


def verify_map(m, K=12, N=16, seed=0, fs=48000, length_s=None, block_size=256):
    """Design, render and re-analyse; returns (config, target, achieved) T60 arrays."""
    cfg = design(m, DesignRequest(N, K, seed=seed, sample_rate_hz=fs))
    target, _ = resample_map(m, cfg.group_directions)
    length_s = length_s or max(4.0, 1.6 * float(target.max()))
    y = render(cfg, np.ones(1), int(round(length_s * fs)), block_size)
    achieved = analyze_dirirs(y, m.bands, fs, cfg.group_directions)
    return cfg, target, achieved


def cmd_verify(args) -> int:
    m = read_decay_map(args.map)
    cfg, target, achieved = verify_map(m, args.K, args.N, args.seed, args.fs, args.length)
    rel = achieved.t60_s / target - 1
    mean_rel = achieved.t60_s.mean(axis=1) / target.mean(axis=1) - 1
    print("band\tdirection\tazimuth_deg\televation_deg\ttarget_s\tachieved_s\trel_err")
    g = cfg.group_directions
    for bi, band in enumerate(m.bands.bands):
        for k in range(len(g)):
            print(f"{band.low_hz:g}-{band.high_hz:g}\t{k}\t{np.degrees(g.azimuth[k]):.1f}\t"
                  f"{np.degrees(g.elevation[k]):.1f}\t{target[bi, k]:.3f}\t"
                  f"{achieved.t60_s[bi, k]:.3f}\t{rel[bi, k]:+.4f}")
    for bi, band in enumerate(m.bands.bands):
        print(f"mean {band.low_hz:g}-{band.high_hz:g}\t{mean_rel[bi]:+.4f}")
    worst_dir, worst_mean = np.abs(rel).max(), np.abs(mean_rel).max()
    log.info("worst directional error %.2f %%, worst mean error %.2f %% "
             "(directional smoothing expected)", 100 * worst_dir, 100 * worst_mean)
    if worst_dir > args.tol_directional or worst_mean > args.tol_mean:
        raise ToleranceExceeded(f"directional {worst_dir:.3f} / mean {worst_mean:.3f} "
                                f"exceed {args.tol_directional} / {args.tol_mean}")
    return EXIT_OK


def cmd_info(args) -> int:
    if args.path is None:
        info = {"version": __version__, "shipped_t_designs": list(SHIPPED_TDESIGNS),
                "schemas": [MANIFEST_SCHEMA, MAP_SCHEMA, "dirverb-dfdn/1"]}
        print(json.dumps(info, indent=2))
        return EXIT_OK
    doc = json.loads(Path(args.path).read_text())
    schema = doc.get("schema")
    if schema == MAP_SCHEMA:
        m = read_decay_map(args.path)
        print(json.dumps({"schema": schema, "position": m.position.tolist(),
                          "directions": len(m.grid), "bands": m.bands.to_dict()["bands"],
                          "mean_t60_s": m.mean_t60_s.tolist(),
                          "flagged_cells": int(np.count_nonzero(m.flags))}, indent=2))
    elif schema == "dirverb-dfdn/1":
        c = DfdnConfig.load(args.path)
        print(json.dumps({"schema": schema, "groups": c.num_groups,
                          "channels_per_group": c.channels_per_group,
                          "sample_rate_hz": c.sample_rate_hz, "seed": c.seed,
                          "delay_range": [int(c.delays.min()), int(c.delays.max())]}, indent=2))
    elif schema == MANIFEST_SCHEMA:
        ds = load_dataset(args.path)
        print(json.dumps({"schema": schema, "entries": ds.ids,
                          "sh_order": ds.manifest.sh_order,
                          "sample_rate_hz": ds.manifest.sample_rate_hz}, indent=2))
    else:
        raise ValueError(f"unrecognised schema {schema!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dirverb", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="analyse every SRIR of a dataset into decay maps")
    a.add_argument("manifest")
    a.add_argument("--grid-size", type=int, default=840)
    a.add_argument("--bands", default="200-800,1000-2000,2000-6000")
    a.add_argument("--max-re", action="store_true", help="taper beams with max-rE weights")
    a.add_argument("--out-dir", required=True)
    a.set_defaults(func=cmd_analyze)

    e = sub.add_parser("edd", help="export polar EDD data for one plane")
    e.add_argument("srir")
    e.add_argument("--plane", choices=PLANES, default="lateral")
    e.add_argument("--band", default="broadband", help='"broadband" or "LOW-HIGH"')
    e.add_argument("--convention", choices=("acn_sn3d", "acn_n3d"), default="acn_sn3d")
    e.add_argument("--channel-directions", metavar="CONFIG",
                   help="input is a DFDN render; take channel directions from its config")
    e.add_argument("--grid-size", type=int, default=240)
    e.add_argument("--angles", type=int, default=72)
    e.add_argument("--time-step", type=float, default=0.01)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_edd)

    i = sub.add_parser("interp", help="interpolate decay maps at a listener position")
    i.add_argument("maps", nargs="+")
    i.add_argument("--target", type=float, nargs=3, required=True, metavar=("X", "Y", "Z"))
    i.add_argument("--m-nearest", type=int, default=4)
    i.add_argument("--power", type=float, default=1.0)
    i.add_argument("--out", required=True)
    i.set_defaults(func=cmd_interp)

    for name, func, helptext in (("render", cmd_render, "render a K-channel DFDN response"),
                                 ("verify", cmd_verify, "design, render and re-analyse a map")):
        r = sub.add_parser(name, help=helptext)
        if name == "render":
            src = r.add_mutually_exclusive_group(required=True)
            src.add_argument("--map")
            src.add_argument("--config")
            inp = r.add_mutually_exclusive_group(required=True)
            inp.add_argument("--input")
            inp.add_argument("--impulse", action="store_true")
            r.add_argument("--length", type=float, default=4.0,
                           help="seconds of output (impulse) or of tail after the input")
            r.add_argument("--block-size", type=int, default=256)
            r.add_argument("--save-config")
            r.add_argument("--out", required=True)
        else:
            r.add_argument("map")
            r.add_argument("--length", type=float, default=None)
            r.add_argument("--tol-directional", type=float, default=0.10)
            r.add_argument("--tol-mean", type=float, default=0.05)
        r.add_argument("--K", type=int, default=12)
        r.add_argument("--N", type=int, default=16)
        r.add_argument("--seed", type=int, default=0)
        r.add_argument("--fs", type=int, default=48000)
        r.set_defaults(func=func)

    n = sub.add_parser("info", help="describe the package or a dirverb file")
    n.add_argument("path", nargs="?")
    n.set_defaults(func=cmd_info)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ToleranceExceeded as err:
        log.error("tolerance exceeded: %s", err)
        return EXIT_TOLERANCE
    except (OSError, json.JSONDecodeError) as err:
        log.error("%s", err)
        return EXIT_IO
    except (ValueError, KeyError) as err:
        log.error("%s", err)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
