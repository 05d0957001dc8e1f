"""Scenario files: a small sectioned ``key = value`` format.

See ``docs/scenario-format.md`` for the full description.  In short::

    [system]
    name = sign
    dimension = 1

    [surfaces]
    s = x1

    [regions]
    + = -1
    - = 1

Each section header is ``[name]``; each entry is ``key = value``; ``#``
starts a comment.  Expressions are parsed when the file is loaded, and
errors carry the file name and line number.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field as dc_field
from importlib import resources
from pathlib import Path
from typing import Mapping

import numpy as np

from .certify import DomainSpec
from .expr import ParseError, parse
from .field import (FieldDefinitionError, FieldReport, PiecewiseField, SwitchingSurface,
                    pattern_to_key, validate_field)
from .lyapunov import ComparisonTriple, PiecewiseScalar
from .simulate import IntegratorConfig

MODES = ("check1", "check2", "simulate", "all")
SECTIONS = ("system", "parameters", "surfaces", "regions", "lyapunov", "domain", "simulate")


class ScenarioError(ValueError):
    def __init__(self, message: str, path: str = "<string>", line: int | None = None):
        where = f"{path}:{line}" if line else path
        super().__init__(f"{where}: {message}")
        self.path, self.line = path, line


@dataclass
class _Entry:
    value: str
    line: int | None


def bundled(name: str) -> Path:
    """Path of a bundled scenario (``sign``, ``adaptive`` or ``frozen``)."""
    name = name if name.endswith(".scn") else f"{name}.scn"
    path = resources.files("nslasalle") / "scenarios" / name
    if not path.is_file():
        raise FileNotFoundError(f"no bundled scenario {name!r}")
    return Path(str(path))


def parse_sections(text: str, path: str = "<string>") -> dict[str, dict[str, _Entry]]:
    sections: dict[str, dict[str, _Entry]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\[\s*([A-Za-z_]+)\s*\]", line)
        if m:
            current = m.group(1).lower()
            if current not in SECTIONS:
                raise ScenarioError(f"unknown section [{current}]", path, lineno)
            if current in sections:
                raise ScenarioError(f"duplicate section [{current}]", path, lineno)
            sections[current] = {}
            continue
        if current is None:
            raise ScenarioError("entry outside of any section", path, lineno)
        if "=" not in line:
            raise ScenarioError("expected 'key = value'", path, lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ScenarioError("empty key", path, lineno)
        if key in sections[current]:
            raise ScenarioError(f"duplicate key {key!r} in [{current}]", path, lineno)
        sections[current][key] = _Entry(value, lineno)
    return sections


@dataclass
class Scenario:
    name: str
    dimension: int
    mode: str
    parameters: dict[str, float]
    field: PiecewiseField
    V: PiecewiseScalar
    triple: ComparisonTriple
    domain: DomainSpec
    t_grid: list[float]
    safety: float
    derivative_tol: float
    x0: np.ndarray
    t0: float
    tf: float
    integrator: IntegratorConfig
    tail_fraction: float = 0.25
    convergence_tol: float = 1e-4
    path: str = "<string>"
    field_report: FieldReport | None = None
    texts: dict[str, str] = dc_field(default_factory=dict)


class _Reader:
    def __init__(self, sections, path):
        self.sections = sections
        self.path = path

    def section(self, name, required=True) -> dict[str, _Entry]:
        if name not in self.sections:
            if required:
                raise ScenarioError(f"missing section [{name}]", self.path)
            return {}
        return self.sections[name]

    def get(self, section, key, default=None, required=False) -> _Entry | None:
        entry = self.sections.get(section, {}).get(key)
        if entry is None:
            if required:
                raise ScenarioError(f"missing key {key!r} in [{section}]", self.path)
            return _Entry(default, None) if default is not None else None
        return entry

    def number(self, section, key, default=None, cast=float):
        entry = self.get(section, key, default, required=default is None)
        try:
            return cast(entry.value)
        except (TypeError, ValueError):
            raise ScenarioError(f"[{section}] {key}: expected a number, got {entry.value!r}",
                                self.path, entry.line) from None

    def numbers(self, section, key, default=None) -> list[float]:
        entry = self.get(section, key, default, required=default is None)
        try:
            return [float(v) for v in entry.value.split(",")]
        except ValueError:
            raise ScenarioError(f"[{section}] {key}: expected comma-separated numbers",
                                self.path, entry.line) from None

    def expression(self, entry: _Entry, dimension, names, what):
        try:
            return parse(entry.value, dimension, names)
        except ParseError as err:
            d = err.diagnostic
            raise ScenarioError(f"{what}: {d.message} at column {d.offset + 1} of {entry.value!r}",
                                self.path, entry.line) from None


def _t_grid(text: str, path, line) -> list[float]:
    """``a:b:step`` (inclusive) or a comma-separated list."""
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            count = int(round((stop - start) / step)) + 1
            return [start + k * step for k in range(count)]
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise ScenarioError(f"bad t_grid {text!r}", path, line) from None


def loads(text: str, path: str = "<string>",
          overrides: Mapping[str, str] | None = None) -> Scenario:
    """Build a :class:`Scenario` from file text; ``overrides`` maps ``section.key`` to value."""
    sections = parse_sections(text, path)
    for dotted, value in (overrides or {}).items():
        if "." not in dotted:
            raise ScenarioError(f"override {dotted!r} must be written section.key", path)
        sec, key = dotted.split(".", 1)
        if sec not in SECTIONS:
            raise ScenarioError(f"override names unknown section [{sec}]", path)
        sections.setdefault(sec, {})[key] = _Entry(value, None)
    r = _Reader(sections, path)

    name = r.get("system", "name", Path(path).stem).value
    n = r.number("system", "dimension", cast=int)
    if n < 1:
        raise ScenarioError("dimension must be positive", path, r.get("system", "dimension").line)
    mode = r.get("system", "mode", "all").value
    if mode not in MODES:
        raise ScenarioError(f"mode must be one of {', '.join(MODES)}", path,
                            r.get("system", "mode").line)

    params = {}
    for key, entry in r.section("parameters", required=False).items():
        try:
            params[key] = float(entry.value)
        except ValueError:
            raise ScenarioError(f"parameter {key!r} is not a number", path, entry.line) from None
    names = list(params)

    surf_entries = list(r.section("surfaces", required=False).items())
    surfaces = [SwitchingSurface.from_expression(
        r.expression(e, n, names, f"surface {k!r}"), n, k) for k, e in surf_entries]
    pieces = {}
    for pattern, entry in r.section("regions").items():
        try:
            key = () if pattern == "*" else pattern_to_key(pattern)
        except FieldDefinitionError as err:
            raise ScenarioError(str(err), path, entry.line) from None
        if len(key) != len(surfaces):
            raise ScenarioError(f"region {pattern!r} has arity {len(key)}, "
                                f"expected {len(surfaces)} (one sign per surface)", path, entry.line)
        comps = [c.strip() for c in entry.value.split(",")]
        if len(comps) != n:
            raise ScenarioError(f"region {pattern!r} has {len(comps)} components, expected {n}",
                                path, entry.line)
        pieces[key] = [r.expression(_Entry(c, entry.line), n, names, f"region {pattern!r}")
                       for c in comps]
    try:
        F = PiecewiseField(n, surfaces, pieces, params, name)
    except FieldDefinitionError as err:
        raise ScenarioError(str(err), path, None) from None

    lyap = r.section("lyapunov")
    v_surfaces, v_pieces = [], {}
    for key, entry in lyap.items():
        if key.startswith("surface."):
            v_surfaces.append(SwitchingSurface.from_expression(
                r.expression(entry, n, names, f"lyapunov {key}"), n, key[8:]))
        elif key == "V":
            v_pieces[()] = r.expression(entry, n, names, "V")
        elif key.startswith("V[") and key.endswith("]"):
            try:
                k = pattern_to_key(key[2:-1])
            except FieldDefinitionError as err:
                raise ScenarioError(str(err), path, entry.line) from None
            v_pieces[k] = r.expression(entry, n, names, key)
        elif key not in ("W1", "W2", "W"):
            raise ScenarioError(f"unknown key {key!r} in [lyapunov]", path, entry.line)
    if not v_pieces:
        raise ScenarioError("[lyapunov] needs V or V[pattern] entries", path)
    try:
        V = PiecewiseScalar(n, v_surfaces, v_pieces, params, "V")
    except FieldDefinitionError as err:
        raise ScenarioError(str(err), path, None) from None
    W1, W2, W = (r.expression(r.get("lyapunov", k, required=True), n, names, k)
                 for k in ("W1", "W2", "W"))
    try:
        triple = ComparisonTriple(W1, W2, W, params)
    except ValueError as err:
        raise ScenarioError(str(err), path) from None

    dom = r.section("domain")
    box = r.numbers("domain", "box")
    if len(box) != 2 * n:
        raise ScenarioError(f"box needs {2 * n} numbers (lo, hi per axis)", path,
                            dom["box"].line)
    try:
        spec = DomainSpec(tuple(box[0::2]), tuple(box[1::2]), r.number("domain", "r"),
                          r.number("domain", "samples", 64, int),
                          r.number("domain", "sphere_samples", 256, int))
    except ValueError as err:
        raise ScenarioError(str(err), path, dom.get("r", _Entry("", None)).line) from None
    tg = r.get("domain", "t_grid", "0")
    t_grid = _t_grid(tg.value, path, tg.line)

    x0 = np.array(r.numbers("simulate", "x0"))
    if len(x0) != n:
        raise ScenarioError(f"x0 needs {n} components", path, r.get("simulate", "x0").line)
    try:
        cfg = IntegratorConfig(h=r.number("simulate", "h", 1e-3),
                               event_tol=r.number("simulate", "event_tol", 1e-12),
                               surface_tol=r.number("simulate", "surface_tol", 1e-9),
                               max_steps=r.number("simulate", "max_steps", 10_000_000, int),
                               exit_check_period=r.number("simulate", "exit_check_period", 1, int))
    except ValueError as err:
        raise ScenarioError(str(err), path) from None

    if not V.is_smooth:
        continuity = V.check_continuity(spec.grid()[:: max(1, len(spec.grid()) // 400)], t_grid[:3])
        if not continuity.passed:
            raise ScenarioError(f"V is discontinuous across its surfaces (gap {continuity.worst_gap!r} "
                                f"at {continuity.witness})", path)
    report = validate_field(F, spec.box, t_grid, samples_per_axis=min(spec.samples_per_axis, 17))

    return Scenario(
        name=name, dimension=n, mode=mode, parameters=params, field=F, V=V, triple=triple,
        domain=spec, t_grid=t_grid, safety=r.number("domain", "safety", 0.9),
        derivative_tol=r.number("domain", "tol", 1e-9), x0=x0,
        t0=r.number("simulate", "t0", 0.0), tf=r.number("simulate", "tf"), integrator=cfg,
        tail_fraction=r.number("simulate", "tail_fraction", 0.25),
        convergence_tol=r.number("simulate", "tol", 1e-4), path=path, field_report=report,
        texts={k: e.value for k, e in lyap.items()},
    )


def load_scenario(path, overrides: Mapping[str, str] | None = None) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise FileNotFoundError(f"cannot read scenario {str(path)!r}: {err.strerror}") from None
    return loads(text, str(path), overrides)
