"""``holotomo`` command-line driver.

Exit codes: 0 success, 2 configuration error, 3 data error (missing or
malformed input, carrier separation), 4 numerical failure (degenerate
contrast, stationary objective, E_d above the configured threshold).
Timestamps go to ``<out>/run.log`` only, so every other artifact is a pure
function of the config and seed.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .config import ConfigError, RunConfig, default_config, load_config
from .fields import AxialBox, Field2D, FieldVolume, fft2c, ifft2c, volume_energy_profile
from .holography import (
    CarrierSeparationError,
    DegenerateContrastError,
    Hologram,
    compute_weights,
    demodulate_ftm,
    detect_carrier,
    focus_scan,
    subtract_background,
    unwrap_phase,
    z_ladder,
)
from .mgd import StationaryObjectiveError, make_initial_guess, run_mgd
from .phantom import make_phantom, simulate_hologram
from .propagation import _transfer, adjoint_A, bandlimit, forward_A
from .tv import TvConfig

log = logging.getLogger("holotomo")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class DataError(Exception):
    pass


class NumericalFailure(Exception):
    pass


# input helpers


def _read_input(path: str):
    p = Path(path)
    if not p.is_file():
        raise DataError(f"input file not found: {p}")
    if p.suffix.lower() in (".png", ".tif", ".tiff"):
        return "image", fileio.load_gray(p)
    try:
        return "field", fileio.load_field(p)
    except fileio.FileFormatError as exc:
        raise DataError(f"{p}: {exc}") from None


def _as_detector_input(path: str, cfg: RunConfig, kind: str):
    """Return a Hologram or a complex Field2D from ``path``.

    With ``kind="auto"`` a 2D file whose values are real and nonnegative is
    taken to be a hologram intensity.
    """
    tag, obj = _read_input(path)
    if tag == "image":
        grid = cfg.grid_spec()
        if obj.shape != grid.shape:
            raise DataError(f"{path}: image shape {obj.shape} does not match grid {grid.shape}")
        return Hologram(grid, obj)
    if isinstance(obj, FieldVolume):
        raise DataError(f"{path}: expected a 2D field or hologram, got a volume")
    vals = obj.values
    is_intensity = not np.any(vals.imag) and np.all(vals.real >= 0)
    if kind == "hologram" or (kind == "auto" and is_intensity):
        if not is_intensity:
            raise DataError(f"{path}: hologram values must be real and nonnegative")
        return Hologram(obj.grid, vals.real)
    return obj


def _demodulate(h: Hologram, cfg: RunConfig) -> Field2D:
    hs = cfg.hologram
    if hs.carrier_fx is None and hs.carrier_fy is None:
        carrier = detect_carrier(h)
        if hs.mask_radius is not None:
            carrier = type(carrier)(carrier.fx, carrier.fy, hs.mask_radius)
        log.info("detected carrier fx=%.6g fy=%.6g cycles/um", carrier.fx, carrier.fy)
    else:
        carrier = cfg.carrier()
    return demodulate_ftm(h, carrier)


def _detector_field(path: str, cfg: RunConfig, kind: str) -> Field2D:
    obj = _as_detector_input(path, cfg, kind)
    return _demodulate(obj, cfg) if isinstance(obj, Hologram) else obj


def _focus(v: Field2D, cfg: RunConfig):
    f = cfg.focus
    src = v if f.source == "raw" else subtract_background(v, cfg.background.window_radius_px)
    return focus_scan(src, f.z_min, f.z_max, f.z_step, f.radius_px)


# image export


def _slice_images(out: Path, vol: FieldVolume, prefix: str = "slice") -> None:
    amp = np.abs(vol.values)
    phases = []
    for j in range(vol.nz):
        s = vol.slice(j)
        phases.append(unwrap_phase(s) if np.any(amp[j] > 0) else np.zeros(amp[j].shape))
    phases = np.array(phases)
    a_max = float(amp.max())
    p_min, p_max = float(phases.min()), float(phases.max())
    for j in range(vol.nz):
        fileio.save_gray8(out / f"{prefix}{j:02d}_amplitude.png", amp[j], 0.0, a_max)
        fileio.save_colormap(out / f"{prefix}{j:02d}_phase.png", phases[j], p_min, p_max)


def backprop_sweep(v: Field2D, zs) -> np.ndarray:
    """``|back-propagated field|`` along the center row for each ``z``; shape ``(len(zs), nx)``."""
    spec = fft2c(v.values)
    row = v.grid.ny // 2
    return np.array([np.abs(ifft2c(_transfer(v.grid, -float(z)) * spec)[row]) for z in zs])


def periphery_fraction(energies: np.ndarray) -> float:
    total = energies.sum()
    return float((energies[0] + energies[-1]) / total) if total > 0 else 0.0


# subcommands


def cmd_simulate(args, cfg: RunConfig) -> int:
    out = args.out
    spec = cfg.phantom_spec()
    truth = make_phantom(spec)
    h = cfg.hologram
    holo = simulate_hologram(truth, cfg.reference(), h.snr_db, h.bits, seed=cfg.run.seed)
    fileio.save_field(out / "truth.htf", truth)
    fileio.save_field(out / "hologram.htf", Field2D(holo.grid, holo.intensity))
    fileio.save_gray16(out / "hologram.png", holo.intensity)
    log.info("simulated %d cell(s), z_center=%g", len(spec.cells), spec.box.z_center)
    print(f"wrote {out / 'hologram.htf'}, {out / 'hologram.png'}, {out / 'truth.htf'}")
    return EXIT_OK


def cmd_demodulate(args, cfg: RunConfig) -> int:
    obj = _as_detector_input(args.input, cfg, "hologram")
    v = _demodulate(obj, cfg)
    fileio.save_field(args.out / "field.htf", v)
    print(f"wrote {args.out / 'field.htf'}  norm={v.norm():.6g}")
    return EXIT_OK


def cmd_focus(args, cfg: RunConfig) -> int:
    v = _detector_field(args.input, cfg, args.input_kind)
    scan = _focus(v, cfg)
    fileio.write_focus_csv(args.out / "focus.csv", scan)
    print(f"z_focus = {scan.z_focus!r}")
    return EXIT_OK


def cmd_reconstruct(args, cfg: RunConfig) -> int:
    out = args.out
    v = _detector_field(args.input, cfg, args.input_kind)
    scan = _focus(v, cfg)
    fileio.write_focus_csv(out / "focus.csv", scan)
    z_center = cfg.box.z_center if cfg.box.z_center is not None else scan.z_focus
    box = AxialBox(cfg.box.nz, z_center)
    box.validate(v.grid.dz)
    log.info("focus at %g um; box z_center=%g", scan.z_focus, z_center)

    weights = None
    if cfg.weights.enabled:
        weights = compute_weights(v, box, cfg.weights.radius_px)
        log.info("weights %s", np.array2string(weights.weights, precision=4))
    data = v
    if cfg.background.enabled:
        # the window leaks energy outside the pupil; A cannot reach it
        data = bandlimit(subtract_background(v, cfg.background.window_radius_px))

    mcfg = cfg.mgd_config(weights)
    guess = make_initial_guess(data, box, mcfg)
    ub = adjoint_A(data, box)
    tv = TvConfig.for_guess(guess, cfg.tv.rel_epsilon)
    state = run_mgd(data, box, tv, mcfg, initial=guess)

    fileio.save_field(out / "volume.htf", state.guess)
    fileio.save_field(out / "ub.htf", ub)
    fileio.write_history_csv(out / "history.csv", state.history)
    if cfg.export.images:
        _slice_images(out, state.guess)

    energies = volume_energy_profile(state.guess)
    frac = periphery_fraction(energies)
    lines = [
        ("z_focus_um", scan.z_focus),
        ("z_center_um", z_center),
        ("weights", "off" if weights is None else " ".join(f"{w:.6f}" for w in weights.weights)),
        ("iterations", state.iter),
        ("final_theta", state.theta),
        ("e_d", state.e_d),
        ("e_d_threshold", cfg.run.e_d_threshold),
        ("periphery_energy_fraction", frac),
        ("slice_energies", " ".join(f"{e:.6e}" for e in energies)),
    ]
    text = "".join(f"{k} = {val}\n" for k, val in lines)
    (out / "summary.txt").write_text(text)
    sys.stdout.write(text)
    if not state.e_d < cfg.run.e_d_threshold:
        raise NumericalFailure(f"E_d = {state.e_d:.3e} did not reach threshold {cfg.run.e_d_threshold:g}")
    return EXIT_OK


def cmd_inspect(args, cfg: RunConfig) -> int:
    tag, obj = _read_input(args.input)
    if tag == "image":
        raise DataError(f"{args.input}: inspect expects a field file")
    g = obj.grid
    if isinstance(obj, FieldVolume):
        energies = volume_energy_profile(obj)
        print(f"volume  nx={g.nx} ny={g.ny} nz={obj.nz}  z_center={obj.z_center!r} um")
        print(f"grid    dx={g.dx!r} dy={g.dy!r} dz={g.dz!r} um  wavelength={g.wavelength!r}  na={g.na!r}")
        print(f"norm    {obj.norm()!r}")
        print("slice  z_um  energy")
        for j, (z, e) in enumerate(zip(obj.z_positions, energies)):
            print(f"{j:5d}  {z:.6g}  {float(e)!r}")
        detector = forward_A(obj)
    else:
        print(f"field2d  nx={g.nx} ny={g.ny}")
        print(f"grid    dx={g.dx!r} dy={g.dy!r} wavelength={g.wavelength!r}  na={g.na!r}")
        print(f"norm    {obj.norm()!r}")
        detector = obj
    if args.sweep:
        e = cfg.export
        zs = z_ladder(
            args.z_min if args.z_min is not None else e.sweep_z_min,
            args.z_max if args.z_max is not None else e.sweep_z_max,
            args.z_step if args.z_step is not None else e.sweep_z_step,
        )
        img = backprop_sweep(detector, zs)
        fileio.save_gray8(args.out / "xz_sweep.png", img, 0.0, float(img.max()))
        print(f"wrote {args.out / 'xz_sweep.png'} ({len(zs)} z samples)")
    return EXIT_OK


def cmd_export(args, cfg: RunConfig) -> int:
    tag, obj = _read_input(args.input)
    if tag == "image":
        raise DataError(f"{args.input}: export expects a field file")
    vol = obj if isinstance(obj, FieldVolume) else FieldVolume(obj.grid, 1.0, obj.values[None])
    _slice_images(args.out, vol, prefix=Path(args.input).stem + "_")
    print(f"wrote {2 * vol.nz} images to {args.out}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "demodulate": cmd_demodulate,
    "focus": cmd_focus,
    "reconstruct": cmd_reconstruct,
    "inspect": cmd_inspect,
    "export": cmd_export,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="run configuration file")
    common.add_argument("--seed", type=int, help="override [run] seed")
    common.add_argument("--weights", choices=("on", "off"), help="override [weights] enabled")
    common.add_argument("--max-iters", type=int, metavar="N", help="override [mgd] max_iters")
    common.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
    common.add_argument("-v", "--verbose", action="store_true", help="debug-level run.log")

    parser = argparse.ArgumentParser(prog="holotomo", description="Multi-slice holographic tomography.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="synthesize a phantom hologram")
    for name, text in (
        ("demodulate", "FTM-demodulate a hologram to a complex field"),
        ("focus", "autofocus scan, writes focus.csv"),
        ("reconstruct", "full pipeline: demodulate, focus, weights, MGD, export"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("input")
        if name != "demodulate":
            p.add_argument("--input-kind", choices=("auto", "hologram", "field"), default="auto")
    p = sub.add_parser("inspect", parents=[common], help="print a field/volume summary")
    p.add_argument("input")
    p.add_argument("--sweep", action="store_true", help="write an x-z back-propagation sweep image")
    p.add_argument("--z-min", type=float)
    p.add_argument("--z-max", type=float)
    p.add_argument("--z-step", type=float)
    p = sub.add_parser("export", parents=[common], help="write per-slice amplitude and phase PNGs")
    p.add_argument("input")
    return parser


def _setup_log(out: Path, verbose: bool) -> logging.Handler:
    handler = logging.FileHandler(out / "run.log", mode="a")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("holotomo")
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    root.addHandler(handler)
    root.propagate = False
    return handler


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else default_config()
        weights = None if args.weights is None else args.weights == "on"
        cfg = cfg.with_overrides(args.seed, weights, args.max_iters).validate()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    args.out = Path(args.out)
    args.out.mkdir(parents=True, exist_ok=True)
    handler = _setup_log(args.out, args.verbose)
    log.info("holotomo %s", " ".join(sys.argv[1:] if argv is None else argv))
    try:
        return COMMANDS[args.command](args, cfg)
    except (DataError, fileio.FileFormatError, CarrierSeparationError) as exc:
        msg, code = f"data error: {exc}", EXIT_DATA
    except (DegenerateContrastError, StationaryObjectiveError, NumericalFailure) as exc:
        msg, code = f"numerical failure: {exc}", EXIT_NUMERIC
    except ValueError as exc:
        msg, code = f"data error: {exc}", EXIT_DATA
    finally:
        logging.getLogger("holotomo").removeHandler(handler)
        handler.close()
    print(msg, file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
