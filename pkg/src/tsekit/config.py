"""YAML design files.

Layout (lengths in metres, angles in degrees)::

    scissor:
      l0: 0.457137
      links: [0.211644, 0.211644, 0.211644]
      alpha_min_deg: 10.81
      alpha_max_deg: 69.58
    layout:
      eta_deg: 30
      r_actuator: 0.0321222
      stroke_min: 0.0
      stroke_max: 0.84
    plate:
      r_top: 0.203182
"""

from __future__ import annotations

import math
from pathlib import Path

import yaml

from .core import (
    DEFAULT_ALPHA_MAX,
    DEFAULT_ALPHA_MIN,
    PROTOTYPE_LENGTH,
    ActuatorLayout,
    DomainError,
    ScissorGeometry,
    TopPlate,
    TseDesign,
)

# Slide stroke chosen so the default workspace grid gives %ws of about 0.28;
# the published design table does not list the actuator stroke.
PROTOTYPE_STROKE = (0.0, 0.84)
PROTOTYPE_PARAMETERS = dict(k1=0.2647, k2_deg=30.0, k3=0.0186, k4=0.11765, L=PROTOTYPE_LENGTH)


class ConfigError(ValueError):
    def __init__(self, message, line=None, source="<config>"):
        self.line = line
        self.source = source
        loc = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(loc + message)


def prototype_design() -> TseDesign:
    p = PROTOTYPE_PARAMETERS
    return TseDesign.from_parameters(
        p["k1"], math.radians(p["k2_deg"]), p["k3"], p["k4"], L=p["L"], stroke=PROTOTYPE_STROKE
    )


PRESETS = {"prototype": prototype_design}


def preset(name: str) -> TseDesign:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r} (known: {', '.join(PRESETS)})") from None


_SCHEMA = {
    "scissor": {"l0": True, "links": True, "alpha_min_deg": False, "alpha_max_deg": False},
    "layout": {"eta_deg": True, "r_actuator": True, "stroke_min": True, "stroke_max": True},
    "plate": {"r_top": True},
}


def _line(node) -> int:
    return node.start_mark.line + 1


def _number(node, source) -> float:
    if not isinstance(node, yaml.ScalarNode):
        raise ConfigError("expected a number", _line(node), source)
    try:
        return float(node.value)
    except ValueError:
        raise ConfigError(f"expected a number, got {node.value!r}", _line(node), source) from None


def _mapping(node, source, what) -> dict:
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError(f"{what} must be a mapping", _line(node), source)
    out = {}
    for k, v in node.value:
        if k.value in out:
            raise ConfigError(f"duplicate key {k.value!r}", _line(k), source)
        out[k.value] = (k, v)
    return out


def parse_design(text: str, source: str = "<config>") -> TseDesign:
    """Parse a design document; errors carry the offending line number."""
    try:
        root = yaml.compose(text)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark else None
        raise ConfigError(f"YAML syntax error: {exc.problem}", line, source) from None
    if root is None:
        raise ConfigError("empty document", 1, source)
    top = _mapping(root, source, "document")
    for name in top:
        if name not in _SCHEMA:
            raise ConfigError(f"unknown section {name!r}", _line(top[name][0]), source)
    values: dict[str, dict] = {}
    for section, fields in _SCHEMA.items():
        if section not in top:
            raise ConfigError(f"missing section {section!r}", _line(root), source)
        knode, vnode = top[section]
        sec = _mapping(vnode, source, f"section {section!r}")
        for key, (kn, _) in sec.items():
            if key not in fields:
                raise ConfigError(f"unknown field {section}.{key}", _line(kn), source)
        vals = {}
        for name, required in fields.items():
            if name not in sec:
                if required:
                    raise ConfigError(f"missing field {section}.{name}", _line(knode), source)
                continue
            node = sec[name][1]
            if name == "links":
                if not isinstance(node, yaml.SequenceNode):
                    raise ConfigError("scissor.links must be a list", _line(node), source)
                vals[name] = (tuple(_number(n, source) for n in node.value), node)
            else:
                vals[name] = (_number(node, source), node)
        values[section] = vals

    sc, la, pl = values["scissor"], values["layout"], values["plate"]

    def build(ctor, section, **kwargs):
        try:
            return ctor(**kwargs)
        except DomainError as exc:
            # point at the first field the message names, else the section
            line = _line(top[section][1])
            for name, (_, node) in values[section].items():
                if name.replace("_deg", "").rstrip("s") in str(exc):
                    line = _line(node)
                    break
            raise ConfigError(str(exc), line, source) from None

    amin = math.radians(sc["alpha_min_deg"][0]) if "alpha_min_deg" in sc else DEFAULT_ALPHA_MIN
    amax = math.radians(sc["alpha_max_deg"][0]) if "alpha_max_deg" in sc else DEFAULT_ALPHA_MAX
    scissor = build(
        ScissorGeometry, "scissor", l0=sc["l0"][0], link_lengths=sc["links"][0], alpha_min=amin, alpha_max=amax
    )
    layout = build(
        ActuatorLayout,
        "layout",
        eta=math.radians(la["eta_deg"][0]),
        r_actuator=la["r_actuator"][0],
        stroke_min=la["stroke_min"][0],
        stroke_max=la["stroke_max"][0],
    )
    plate = build(TopPlate, "plate", r_top=pl["r_top"][0])
    return TseDesign(scissor, layout, plate)


def load_design(path) -> TseDesign:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read file: {exc.strerror}", None, str(path)) from None
    return parse_design(text, source=str(path))


def design_to_dict(design: TseDesign) -> dict:
    sc, la, pl = design.scissor, design.layout, design.plate
    return {
        "scissor": {
            "l0": sc.l0,
            "links": list(sc.link_lengths),
            "alpha_min_deg": math.degrees(sc.alpha_min),
            "alpha_max_deg": math.degrees(sc.alpha_max),
        },
        "layout": {
            "eta_deg": math.degrees(la.eta),
            "r_actuator": la.r_actuator,
            "stroke_min": la.stroke_min,
            "stroke_max": la.stroke_max,
        },
        "plate": {"r_top": pl.r_top},
    }


def dump_design(design: TseDesign) -> str:
    return yaml.safe_dump(design_to_dict(design), sort_keys=False)
