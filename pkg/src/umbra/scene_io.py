"""Scene files, mapped-scene files and machine-readable reports.

A scene file is a UTF-8 JSON document::

    {"ellipsoid": {"d": 2.9},
     "balls": [{"center": [0, 0, 1], "radius": 0.9}, ...],
     "semantics": "closed"}

Unknown fields are rejected.  Reals are written in shortest round-trip
form, so emitting and re-reading a scene is lossless.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GeometryError, ParseError, ValidationError
from .geometry import Ball, EllipsoidMetric, HitSemantics, LinearMap, MappedBall
from .verifier import SURFACE_TOL, SceneConfig

SCHEMA = 1


class SceneWarning(UserWarning):
    pass


def _reject_constant(name):
    raise ValueError(f"non-finite number {name}")


def _load(text: str):
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except ValueError as exc:
        raise ParseError("$", f"not a valid JSON document ({exc})") from None


def _exact_keys(obj, path, required, optional=()):
    if not isinstance(obj, dict):
        raise ParseError(path or "$", "expected an object")
    for key in required:
        if key not in obj:
            raise ParseError(f"{path}.{key}" if path else key)
    extra = sorted(set(obj) - set(required) - set(optional))
    if extra:
        where = f"{path}.{extra[0]}" if path else extra[0]
        raise ParseError(where, "unknown field")


def _real(value, path) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(path, "expected a number")
    value = float(value)
    if not math.isfinite(value):
        raise ParseError(path, "expected a finite number")
    return value


def _vector(value, path) -> tuple[float, float, float]:
    if not isinstance(value, list) or len(value) != 3:
        raise ParseError(path, "expected an array of 3 numbers")
    return tuple(_real(v, f"{path}[{i}]") for i, v in enumerate(value))


def _semantics(value, path="semantics") -> HitSemantics:
    try:
        return HitSemantics(value)
    except ValueError:
        raise ParseError(path, 'expected "closed" or "open"') from None


def _balls(raw, ellipsoid: EllipsoidMetric) -> list[Ball]:
    if not isinstance(raw, list):
        raise ParseError("balls", "expected an array")
    balls = []
    for i, item in enumerate(raw):
        path = f"balls[{i}]"
        _exact_keys(item, path, ("center", "radius"))
        center = _vector(item["center"], f"{path}.center")
        radius = _real(item["radius"], f"{path}.radius")
        if radius <= 0:
            raise ValidationError(f"{path}.radius", f"radius must be positive, got {radius!r}")
        if center == (0.0, 0.0, 0.0):
            raise ValidationError(f"{path}.center", "center must differ from the origin")
        dev = ellipsoid.deviation(center)
        if dev > SURFACE_TOL:
            raise ValidationError(f"{path}.center",
                                  f"center is off the ellipsoid surface by {dev:.6g}", dev)
        if radius >= math.hypot(*center):
            warnings.warn(f"{path}: radius {radius!r} does not exclude the center", SceneWarning, stacklevel=3)
        balls.append(Ball(center, radius))
    return balls


def _ellipsoid(raw) -> EllipsoidMetric:
    _exact_keys(raw, "ellipsoid", ("d",))
    d = _real(raw["d"], "ellipsoid.d")
    if d < 1.0:
        raise ValidationError("ellipsoid.d", f"axis ratio must be >= 1, got {d!r}")
    return EllipsoidMetric(d)


def scene_from_dict(doc) -> SceneConfig:
    _exact_keys(doc, "", ("ellipsoid", "balls", "semantics"))
    ellipsoid = _ellipsoid(doc["ellipsoid"])
    balls = _balls(doc["balls"], ellipsoid)
    return SceneConfig(ellipsoid, tuple(balls), _semantics(doc["semantics"]))


def loads_scene(text: str) -> SceneConfig:
    return scene_from_dict(_load(text))


def parse_scene(path) -> SceneConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(str(path), f"cannot read file ({exc})") from None
    return loads_scene(text)


def scene_to_dict(cfg: SceneConfig) -> dict:
    return {
        "ellipsoid": {"d": float(cfg.d)},
        "balls": [{"center": [float(x) for x in b.center], "radius": float(b.radius)} for b in cfg.balls],
        "semantics": cfg.semantics.value,
    }


def dumps_scene(cfg: SceneConfig) -> str:
    return json.dumps(scene_to_dict(cfg), indent=2) + "\n"


def write_scene(cfg: SceneConfig, path) -> None:
    Path(path).write_text(dumps_scene(cfg), encoding="utf-8")


def digest(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return "sha256:" + hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class MappedScene:
    """Balls pushed through a linear map, plus the image ellipsoid."""

    ellipsoid: EllipsoidMetric
    map: LinearMap
    balls: tuple[Ball, ...]
    semantics: HitSemantics

    @property
    def mapped_balls(self) -> list[MappedBall]:
        return [MappedBall(b, self.map) for b in self.balls]


def mapped_scene_to_dict(ms: MappedScene) -> dict:
    return {
        "schema": SCHEMA,
        "kind": "mapped-scene",
        "ellipsoid": {"d": float(ms.ellipsoid.d)},
        "map": [[float(v) for v in row] for row in ms.map.matrix],
        "balls": [{"center": [float(x) for x in b.center], "radius": float(b.radius)} for b in ms.balls],
        "semantics": ms.semantics.value,
    }


def mapped_scene_from_dict(doc) -> MappedScene:
    _exact_keys(doc, "", ("schema", "kind", "ellipsoid", "map", "balls", "semantics"))
    if doc["schema"] != SCHEMA or doc["kind"] != "mapped-scene":
        raise ParseError("kind", "not a mapped-scene document of schema 1")
    raw = doc["map"]
    if not isinstance(raw, list) or len(raw) != 3:
        raise ParseError("map", "expected a 3x3 array")
    rows = [_vector(r, f"map[{i}]") for i, r in enumerate(raw)]
    try:
        lmap = LinearMap(np.array(rows))
    except GeometryError as exc:
        raise ValidationError("map", str(exc)) from None
    d = _real(doc["ellipsoid"].get("d") if isinstance(doc["ellipsoid"], dict) else None, "ellipsoid.d")
    # ball centers live in the preimage, so no surface check here
    balls = []
    for i, item in enumerate(doc["balls"]):
        _exact_keys(item, f"balls[{i}]", ("center", "radius"))
        balls.append(Ball(_vector(item["center"], f"balls[{i}].center"), _real(item["radius"], f"balls[{i}].radius")))
    return MappedScene(EllipsoidMetric(d), lmap, tuple(balls), _semantics(doc["semantics"]))


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


@dataclass
class Report:
    command: str
    verdict: str | None = None
    method: str | None = None
    witness: list[float] | None = None
    margins: list[float] | None = None
    fraction_covered: float | None = None
    timing_s: float = 0.0
    input_digest: str | None = None
    details: dict = field(default_factory=dict)
    exit_code: int = 0

    def to_dict(self) -> dict:
        from . import __version__

        return _jsonable({
            "schema": SCHEMA,
            "tool": "umbra",
            "version": __version__,
            "command": self.command,
            "verdict": self.verdict,
            "method": self.method,
            "witness": self.witness,
            "margins": self.margins,
            "fraction_covered": self.fraction_covered,
            "timing_s": self.timing_s,
            "input_digest": self.input_digest,
            "exit_code": self.exit_code,
            "details": self.details,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        lines = [f"command: {self.command}"]
        if self.verdict is not None:
            lines.append(f"verdict: {self.verdict}" + (f" ({self.method})" if self.method else ""))
        if self.witness is not None:
            lines.append("witness: " + " ".join(repr(float(v)) for v in self.witness))
        if self.margins is not None:
            lines.append("margins: " + " ".join(f"{float(m):.17g}" for m in self.margins))
        if self.fraction_covered is not None:
            lines.append(f"fraction_covered: {self.fraction_covered!r}")
        for key, value in _jsonable(self.details).items():
            if isinstance(value, (dict, list)):
                value = json.dumps(value)
            lines.append(f"{key}: {value}")
        lines.append(f"timing_s: {self.timing_s:.3f}")
        if self.input_digest:
            lines.append(f"input_digest: {self.input_digest}")
        lines.append(f"exit_code: {self.exit_code}")
        return "\n".join(lines) + "\n"
