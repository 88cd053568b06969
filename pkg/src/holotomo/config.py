"""Run configuration: a sectioned ``key = value`` text format.

Example::

    [grid]
    nx = 128
    ny = 128
    # comments start with '#' or ';'

    [cell]            # may be repeated, one section per cell
    center_x = 0.0
    radius = 2.4

Unknown sections or keys are rejected with the offending line number.
``auto`` (or ``none``) selects the documented default for optional values.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .fields import AxialBox, GridSpec
from .holography import Carrier
from .mgd import DECAY_RULES, MgdConfig
from .phantom import Cell, Dip, PhantomSpec, Reference, default_scene, paper_reference, two_cell_scene


class ConfigError(ValueError):
    pass


def _auto(s: str) -> bool:
    return s.lower() in ("auto", "none", "")


def p_int(s):
    return int(s)


def p_float(s):
    v = float(s)
    if v != v:
        raise ValueError("NaN is not allowed")
    return v


def p_opt_float(s):
    return None if _auto(s) else p_float(s)


def p_opt_int(s):
    return None if _auto(s) else int(s)


def p_bool(s):
    low = s.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected on/off, got {s!r}")


def p_choice(*options):
    def parse(s):
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {s!r}")
        return s

    return parse


def _f(default, parse):
    return field(default=default, metadata={"parse": parse})


@dataclass(frozen=True)
class RunSection:
    seed: int = _f(0, p_int)
    e_d_threshold: float = _f(1e-2, p_float)  # reconstruct exits 4 above this


@dataclass(frozen=True)
class GridSection:
    nx: int = _f(280, p_int)
    ny: int = _f(280, p_int)
    sensor_pitch: float = _f(3.45, p_float)
    magnification: float = _f(40.0, p_float)
    dz: float = _f(0.75, p_float)
    wavelength: float = _f(0.65, p_float)
    na: float = _f(0.75, p_float)


@dataclass(frozen=True)
class BoxSection:
    nz: int = _f(5, p_int)
    z_center: float | None = _f(None, p_opt_float)  # None: use the focus estimate


@dataclass(frozen=True)
class PhantomSection:
    scene: str = _f("single", p_choice("single", "two_cell"))
    z_center: float = _f(9.0, p_float)
    peak_phase: float = _f(1.5, p_float)
    support_scale: float = _f(2.5, p_float)
    support_order: int = _f(8, p_int)


@dataclass(frozen=True)
class CellSection:
    center_x: float = _f(0.0, p_float)
    center_y: float = _f(0.0, p_float)
    radius: float = _f(2.4, p_float)
    peak_phase: float = _f(1.5, p_float)
    first_slice: int = _f(1, p_int)
    last_slice: int = _f(3, p_int)
    dip_x: float | None = _f(None, p_opt_float)
    dip_y: float | None = _f(None, p_opt_float)
    dip_radius: float | None = _f(None, p_opt_float)
    dip_depth: float | None = _f(None, p_opt_float)


@dataclass(frozen=True)
class HologramSection:
    carrier_fx: float | None = _f(None, p_opt_float)
    carrier_fy: float | None = _f(None, p_opt_float)
    reference_amplitude: float = _f(1.0, p_float)
    mask_radius: float | None = _f(None, p_opt_float)
    snr_db: float | None = _f(None, p_opt_float)
    bits: int | None = _f(None, p_opt_int)


@dataclass(frozen=True)
class BackgroundSection:
    enabled: bool = _f(True, p_bool)
    window_radius_px: float | None = _f(None, p_opt_float)  # inf disables the window


@dataclass(frozen=True)
class FocusSection:
    z_min: float = _f(0.0, p_float)
    z_max: float = _f(18.0, p_float)
    z_step: float = _f(0.75, p_float)
    radius_px: int | None = _f(None, p_opt_int)
    source: str = _f("raw", p_choice("raw", "background"))


@dataclass(frozen=True)
class WeightsSection:
    enabled: bool = _f(True, p_bool)
    radius_px: int | None = _f(None, p_opt_int)


@dataclass(frozen=True)
class TvSection:
    rel_epsilon: float = _f(1e-3, p_float)


@dataclass(frozen=True)
class MgdSection:
    max_iters: int = _f(500, p_int)
    theta_stop: float = _f(2.8, p_float)
    theta_patience: int = _f(20, p_int)
    t_init: float | None = _f(None, p_opt_float)
    t_init_scale: float = _f(0.01, p_float)
    t_decay: float = _f(0.5, p_float)
    decay_patience: int = _f(10, p_int)
    decay_rule: str = _f("stall", p_choice(*DECAY_RULES))
    t_floor_ratio: float = _f(1e-6, p_float)
    residual_gain: float = _f(0.5, p_float)
    noise_amplitude: float = _f(0.01, p_float)


@dataclass(frozen=True)
class ExportSection:
    images: bool = _f(True, p_bool)
    sweep_z_min: float = _f(0.0, p_float)
    sweep_z_max: float = _f(18.0, p_float)
    sweep_z_step: float = _f(0.25, p_float)


SECTIONS = {
    "run": RunSection,
    "grid": GridSection,
    "box": BoxSection,
    "phantom": PhantomSection,
    "hologram": HologramSection,
    "background": BackgroundSection,
    "focus": FocusSection,
    "weights": WeightsSection,
    "tv": TvSection,
    "mgd": MgdSection,
    "export": ExportSection,
}
REPEATED = {"cell": CellSection}


@dataclass(frozen=True)
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    grid: GridSection = field(default_factory=GridSection)
    box: BoxSection = field(default_factory=BoxSection)
    phantom: PhantomSection = field(default_factory=PhantomSection)
    cells: tuple[CellSection, ...] = ()
    hologram: HologramSection = field(default_factory=HologramSection)
    background: BackgroundSection = field(default_factory=BackgroundSection)
    focus: FocusSection = field(default_factory=FocusSection)
    weights: WeightsSection = field(default_factory=WeightsSection)
    tv: TvSection = field(default_factory=TvSection)
    mgd: MgdSection = field(default_factory=MgdSection)
    export: ExportSection = field(default_factory=ExportSection)
    source: str = "<defaults>"
    section_lines: dict = field(default_factory=dict, compare=False)

    # derived objects

    def grid_spec(self) -> GridSpec:
        g = self.grid
        return GridSpec.from_sensor(g.nx, g.ny, g.sensor_pitch, g.magnification, g.dz, g.wavelength, g.na)

    def phantom_spec(self) -> PhantomSpec:
        grid = self.grid_spec()
        ph = self.phantom
        if self.cells:
            cells = []
            for i, c in enumerate(self.cells):
                dip = None
                if c.dip_depth is not None:
                    dip = Dip(
                        (c.dip_x if c.dip_x is not None else c.center_x,
                         c.dip_y if c.dip_y is not None else c.center_y),
                        c.dip_radius if c.dip_radius is not None else 0.3 * c.radius,
                        c.dip_depth,
                    )
                try:
                    cells.append(Cell((c.center_x, c.center_y), c.radius, c.peak_phase,
                                      (c.first_slice, c.last_slice), dip))
                except ValueError as exc:
                    raise ConfigError(f"{self._where(f'cell{i}')}: {exc}") from None
            spec = PhantomSpec(grid, AxialBox(self.box.nz, ph.z_center), tuple(cells))
        elif ph.scene == "two_cell":
            spec = two_cell_scene(grid, ph.z_center, self.box.nz)
        else:
            spec = default_scene(grid, ph.z_center, self.box.nz)
            spec = dataclasses.replace(
                spec, cells=tuple(dataclasses.replace(c, peak_phase=ph.peak_phase) for c in spec.cells)
            )
        return dataclasses.replace(spec, support_scale=ph.support_scale, support_order=ph.support_order)

    def reference(self) -> Reference:
        grid = self.grid_spec()
        h = self.hologram
        if h.carrier_fx is None and h.carrier_fy is None:
            ref = paper_reference(grid)
            return Reference(ref.fx, ref.fy, h.reference_amplitude)
        return Reference(h.carrier_fx or 0.0, h.carrier_fy or 0.0, h.reference_amplitude)

    def carrier(self) -> Carrier:
        ref = self.reference()
        return Carrier(ref.fx, ref.fy, self.hologram.mask_radius)

    def mgd_config(self, weights=None) -> MgdConfig:
        m = self.mgd
        return MgdConfig(
            max_iters=m.max_iters,
            theta_stop=m.theta_stop,
            theta_patience=m.theta_patience,
            t_init=m.t_init,
            t_init_scale=m.t_init_scale,
            t_decay=m.t_decay,
            decay_patience=m.decay_patience,
            decay_rule=m.decay_rule,
            t_floor_ratio=m.t_floor_ratio,
            residual_gain=m.residual_gain,
            noise_amplitude=m.noise_amplitude,
            weights=weights,
            rng_seed=self.run.seed,
        )

    def with_overrides(self, seed=None, weights=None, max_iters=None) -> "RunConfig":
        cfg = self
        if seed is not None:
            cfg = dataclasses.replace(cfg, run=dataclasses.replace(cfg.run, seed=seed))
        if weights is not None:
            cfg = dataclasses.replace(cfg, weights=dataclasses.replace(cfg.weights, enabled=weights))
        if max_iters is not None:
            cfg = dataclasses.replace(cfg, mgd=dataclasses.replace(cfg.mgd, max_iters=max_iters))
        return cfg

    def validate(self) -> "RunConfig":
        """Build every derived object so nested invariants fail at load time."""
        checks = [
            ("grid", self.grid_spec),
            ("phantom", self.phantom_spec),
            ("mgd", self.mgd_config),
            ("hologram", self.reference),
        ]
        for name, build in checks:
            try:
                build()
            except ConfigError:
                raise
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{self._where(name)}: {exc}") from None
        if self.box.z_center is not None:
            try:
                AxialBox(self.box.nz, self.box.z_center).validate(self.grid_spec().dz)
            except ValueError as exc:
                raise ConfigError(f"{self._where('box')}: {exc}") from None
        f = self.focus
        if not (0 <= f.z_min < f.z_max and f.z_step > 0):
            raise ConfigError(f"{self._where('focus')}: need 0 <= z_min < z_max and z_step > 0")
        if not self.run.e_d_threshold > 0:
            raise ConfigError(f"{self._where('run')}: e_d_threshold must be positive")
        if not self.tv.rel_epsilon > 0:
            raise ConfigError(f"{self._where('tv')}: rel_epsilon must be positive")
        return self

    def _where(self, section):
        line = self.section_lines.get(section)
        return f"{self.source}:{line}" if line else f"{self.source} [{section}]"


def _strip_comment(line: str) -> str:
    for mark in ("#", ";"):
        pos = line.find(mark)
        if pos >= 0:
            line = line[:pos]
    return line.strip()


def _build(cls, items, source):
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value, lineno in items:
        if key not in known:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in kwargs:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            kwargs[key] = known[key].metadata["parse"](value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
    return cls(**kwargs)


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    blocks: list[tuple[str, int, list]] = []
    current = None
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"{source}:{lineno}: malformed section header")
            name = line[1:-1].strip().lower()
            if name not in SECTIONS and name not in REPEATED:
                raise ConfigError(f"{source}:{lineno}: unknown section [{name}]")
            if name in SECTIONS:
                if name in seen:
                    raise ConfigError(f"{source}:{lineno}: duplicate section [{name}]")
                seen.add(name)
            current = (name, lineno, [])
            blocks.append(current)
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        if current is None:
            raise ConfigError(f"{source}:{lineno}: key outside of any section")
        key, value = (part.strip() for part in line.split("=", 1))
        current[2].append((key.lower(), value, lineno))

    kwargs = {}
    cells = []
    lines = {}
    for name, lineno, items in blocks:
        if name in REPEATED:
            lines[f"{name}{len(cells)}"] = lineno
            cells.append(_build(REPEATED[name], items, source))
        else:
            lines[name] = lineno
            kwargs[name] = _build(SECTIONS[name], items, source)
    return RunConfig(**kwargs, cells=tuple(cells), source=source, section_lines=lines)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    return parse_config(text, str(path)).validate()


def default_config() -> RunConfig:
    return RunConfig().validate()
