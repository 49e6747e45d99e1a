"""Scenario files: an INI-style document with three sections.

    [topology]
    road_width = 20        ; meters
    road_length = 300      ; meters
    theta = 50             ; degrees
    phi = 30               ; beamwidth, degrees
    slot = 100             ; T_s in ticks (optional)
    control_slot = 1       ; T_s' in ticks (optional)
    delta = 16             ; detection window in ticks (optional)

    [obstacle]
    mode = single          ; single | grid | random
    x = 92.3               ; single: center and radius
    y = 10
    radius = 1
    x_range = 0 300        ; grid: inclusive ranges, step, radius set
    y_range = 0 20
    step = 1
    radii = 0.5 1 2 3
    count = 100            ; random: number of draws, seed, radius set
    seed = 7
    appear_time = 250      ; ticks (optional)

    [output]
    dir = out              ; optional; falls back to $BTDSIM_OUTPUT_DIR, then "."
    table = results.tsv
    summary = summary.txt
"""

from __future__ import annotations

import configparser
import math
import os
import random
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .geometry import InvalidGeometry, Obstacle, TopologyConfig, build_topology, interference_free_margin

OUTPUT_ENV = "BTDSIM_OUTPUT_DIR"

MODES = ("single", "grid", "random")


class ParseError(ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class ValidationError(ValueError):
    def __init__(self, reason: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {reason}" if line else reason)
        self.line = line
        self.reason = reason


@dataclass(frozen=True)
class ObstacleSpec:
    mode: str = "single"
    x: float = 0.0
    y: float = 0.0
    radius: float = 1.0
    x_range: Tuple[float, float] = (0.0, 0.0)
    y_range: Tuple[float, float] = (0.0, 0.0)
    step: float = 1.0
    radii: Tuple[float, ...] = (1.0,)
    count: int = 1
    seed: int = 0
    appear_time: int = 250


@dataclass(frozen=True)
class OutputSpec:
    dir: str = ""
    table: str = "results.tsv"
    summary: str = "summary.txt"

    def resolved_dir(self) -> str:
        return self.dir or os.environ.get(OUTPUT_ENV, "") or "."


@dataclass(frozen=True)
class ScenarioFile:
    topology: TopologyConfig
    obstacle: ObstacleSpec = ObstacleSpec()
    output: OutputSpec = OutputSpec()
    warnings: Tuple[str, ...] = field(default=(), compare=False)

    def cells(self) -> List[Tuple[float, float, float]]:
        """Obstacle (x, y, radius) triples in sweep order: x, then y, then radius."""
        ob = self.obstacle
        if ob.mode == "single":
            return [(ob.x, ob.y, ob.radius)]
        if ob.mode == "grid":
            xs = _axis(*ob.x_range, ob.step)
            ys = _axis(*ob.y_range, ob.step)
            return [(x, y, r) for x in xs for y in ys for r in ob.radii]
        rng = random.Random(ob.seed)
        cfg = self.topology
        return [
            (rng.uniform(0.0, cfg.road_length), rng.uniform(0.0, cfg.road_width), rng.choice(ob.radii))
            for _ in range(ob.count)
        ]

    def obstacles(self) -> List[Obstacle]:
        t = self.obstacle.appear_time
        return [Obstacle((x, y), r, appear_time=t) for x, y, r in self.cells()]


def _axis(lo: float, hi: float, step: float) -> List[float]:
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [lo + i * step for i in range(n)]


# --- parsing ---------------------------------------------------------------


def _line_of(text: str, section: str, key: Optional[str] = None) -> Optional[int]:
    current = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            if key is None and current == section:
                return no
            continue
        if current == section and key is not None:
            name = line.split("=", 1)[0].split(":", 1)[0].strip().lower()
            if name == key:
                return no
    return None


class _Reader:
    def __init__(self, text: str, cp: configparser.ConfigParser):
        self.text = text
        self.cp = cp

    def _raw(self, section: str, key: str) -> Optional[str]:
        if not self.cp.has_section(section) or not self.cp.has_option(section, key):
            return None
        return self.cp.get(section, key).strip()

    def fail(self, section: str, key: Optional[str], reason: str) -> ParseError:
        return ParseError(_line_of(self.text, section, key) or 0, reason)

    def number(self, section: str, key: str, kind=float, default=None, required=False):
        raw = self._raw(section, key)
        if raw is None:
            if required:
                raise self.fail(section, None, f"[{section}] is missing '{key}'")
            return default
        try:
            value = kind(raw)
        except ValueError:
            raise self.fail(section, key, f"'{key}' expects {kind.__name__}, got {raw!r}") from None
        if kind is float and not math.isfinite(value):
            raise self.fail(section, key, f"'{key}' must be finite")
        return value

    def numbers(self, section: str, key: str, count: Optional[int] = None, default=None):
        raw = self._raw(section, key)
        if raw is None:
            return default
        try:
            values = tuple(float(v) for v in raw.replace(",", " ").split())
        except ValueError:
            raise self.fail(section, key, f"'{key}' expects numbers, got {raw!r}") from None
        if not values or (count is not None and len(values) != count):
            want = f"{count} numbers" if count else "at least one number"
            raise self.fail(section, key, f"'{key}' expects {want}, got {raw!r}")
        return values

    def text_value(self, section: str, key: str, default: str = "") -> str:
        raw = self._raw(section, key)
        return default if raw is None else raw


_KNOWN = {
    "topology": {"road_width", "road_length", "theta", "phi", "slot", "control_slot", "delta"},
    "obstacle": {"mode", "x", "y", "radius", "x_range", "y_range", "step", "radii", "count", "seed", "appear_time"},
    "output": {"dir", "table", "summary"},
}


def parse_scenario(text: str, strict_interference: bool = False) -> ScenarioFile:
    """Parse and validate a scenario file. Unknown keys and sections are rejected."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError(exc.lineno, "content before the first [section] header") from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ParseError(lineno, f"cannot parse {line!r}") from None
    except configparser.DuplicateOptionError as exc:
        raise ParseError(exc.lineno or 0, f"duplicate key '{exc.option}'") from None
    except configparser.DuplicateSectionError as exc:
        raise ParseError(exc.lineno or 0, f"duplicate section [{exc.section}]") from None

    rd = _Reader(text, cp)
    for section in cp.sections():
        if section not in _KNOWN:
            raise rd.fail(section, None, f"unknown section [{section}]")
        for key in cp.options(section):
            if key not in _KNOWN[section]:
                raise rd.fail(section, key, f"unknown key '{key}' in [{section}]")
    if not cp.has_section("topology"):
        raise ParseError(0, "missing [topology] section")

    t = "topology"
    width = rd.number(t, "road_width", required=True)
    length = rd.number(t, "road_length", required=True)
    theta = rd.number(t, "theta", required=True)
    phi = rd.number(t, "phi", required=True)
    slot = rd.number(t, "slot", int, 100)
    cs = rd.number(t, "control_slot", int, 1)
    delta = rd.number(t, "delta", int, None)
    try:
        cfg = TopologyConfig(width, length, theta, phi, slot=slot, control_slot=cs, delta=delta)
        topo = build_topology(cfg)
    except InvalidGeometry as exc:
        raise ValidationError(str(exc), _line_of(text, t)) from None
    if topo.N * cs >= slot:
        raise ValidationError(f"N*control_slot = {topo.N * cs} must be below slot = {slot}",
                              _line_of(text, t, "control_slot") or _line_of(text, t))
    if slot // 3 <= cs:
        raise ValidationError("slot/3 must exceed control_slot", _line_of(text, t, "slot"))
    if cfg.detection_interval < 13 * cs:
        raise ValidationError("delta must be at least 13*control_slot to fit three probes and a multicast",
                              _line_of(text, t, "delta"))

    warnings: List[str] = []
    margin, ok = interference_free_margin(theta, phi)
    if not ok:
        msg = (f"interference-free condition fails: margin {margin:.4f} deg "
               f"is not above phi/2 = {phi / 2:.4f} deg")
        if strict_interference:
            raise ValidationError(msg, _line_of(text, t, "phi") or _line_of(text, t))
        warnings.append(msg)

    o = "obstacle"
    mode = rd.text_value(o, "mode", "single").lower()
    if mode not in MODES:
        raise rd.fail(o, "mode", f"mode must be one of {', '.join(MODES)}, got {mode!r}")
    appear = rd.number(o, "appear_time", int, 2 * slot + slot // 2)
    spec_kw = dict(mode=mode, appear_time=appear)
    if mode == "single":
        spec_kw.update(x=rd.number(o, "x", required=True), y=rd.number(o, "y", required=True),
                       radius=rd.number(o, "radius", required=True))
    elif mode == "grid":
        spec_kw.update(
            x_range=rd.numbers(o, "x_range", 2, default=(0.0, length)),
            y_range=rd.numbers(o, "y_range", 2, default=(0.0, width)),
            step=rd.number(o, "step", default=1.0),
            radii=rd.numbers(o, "radii", default=(1.0,)),
        )
    else:
        spec_kw.update(count=rd.number(o, "count", int, required=True),
                       seed=rd.number(o, "seed", int, 0),
                       radii=rd.numbers(o, "radii", default=(1.0,)))
    spec = ObstacleSpec(**spec_kw)
    _validate_obstacle(text, spec, cfg)

    out = OutputSpec(
        dir=rd.text_value("output", "dir"),
        table=rd.text_value("output", "table", "results.tsv"),
        summary=rd.text_value("output", "summary", "summary.txt"),
    )
    return ScenarioFile(cfg, spec, out, tuple(warnings))


def _validate_obstacle(text: str, spec: ObstacleSpec, cfg: TopologyConfig) -> None:
    def bad(key: str, reason: str) -> ValidationError:
        return ValidationError(reason, _line_of(text, "obstacle", key) or _line_of(text, "obstacle"))

    if spec.appear_time < 0:
        raise bad("appear_time", "appear_time must be non-negative")
    if spec.mode == "single":
        if spec.radius < 0:
            raise bad("radius", f"radius must be non-negative, got {spec.radius}")
        if not (0 <= spec.x <= cfg.road_length and 0 <= spec.y <= cfg.road_width):
            raise bad("x", f"center ({spec.x}, {spec.y}) lies outside the road")
        return
    if any(r < 0 for r in spec.radii):
        raise bad("radii", f"radii must be non-negative, got {spec.radii}")
    if spec.mode == "random":
        if spec.count <= 0:
            raise bad("count", "count must be positive")
        return
    if spec.step <= 0:
        raise bad("step", "step must be positive")
    for key, (lo, hi), top in (("x_range", spec.x_range, cfg.road_length), ("y_range", spec.y_range, cfg.road_width)):
        if lo > hi:
            raise bad(key, f"{key} is empty ({lo} > {hi})")
        if lo < 0 or hi > top:
            raise bad(key, f"{key} leaves the road [0, {top}]")


# --- emitting --------------------------------------------------------------


def _num(v: float) -> str:
    return repr(float(v))


def emit_scenario(sf: ScenarioFile) -> str:
    cfg, ob, out = sf.topology, sf.obstacle, sf.output
    lines = [
        "[topology]",
        f"road_width = {_num(cfg.road_width)}",
        f"road_length = {_num(cfg.road_length)}",
        f"theta = {_num(cfg.theta)}",
        f"phi = {_num(cfg.phi)}",
        f"slot = {cfg.slot}",
        f"control_slot = {cfg.control_slot}",
    ]
    if cfg.delta is not None:
        lines.append(f"delta = {cfg.delta}")
    lines += ["", "[obstacle]", f"mode = {ob.mode}", f"appear_time = {ob.appear_time}"]
    if ob.mode == "single":
        lines += [f"x = {_num(ob.x)}", f"y = {_num(ob.y)}", f"radius = {_num(ob.radius)}"]
    elif ob.mode == "grid":
        lines += [
            f"x_range = {_num(ob.x_range[0])} {_num(ob.x_range[1])}",
            f"y_range = {_num(ob.y_range[0])} {_num(ob.y_range[1])}",
            f"step = {_num(ob.step)}",
            "radii = " + " ".join(_num(r) for r in ob.radii),
        ]
    else:
        lines += [f"count = {ob.count}", f"seed = {ob.seed}",
                  "radii = " + " ".join(_num(r) for r in ob.radii)]
    lines += ["", "[output]"]
    if out.dir:
        lines.append(f"dir = {out.dir}")
    lines += [f"table = {out.table}", f"summary = {out.summary}", ""]
    return "\n".join(lines)
