"""JSON encodings of systems, points, functions, atoms, and directions.

Matrices are row-major arrays of arrays of finite doubles.  Emission uses
the shortest round-tripping float representation, so a dump/parse cycle
reproduces canonicalized values bit for bit.
"""

import json
import math

import numpy as np

from .envelope import NcPolynomial
from .errors import DimensionMismatch
from .systems import (ComplexNcPoint, NcPoint, OperatorSystem,
                      validate_point, validate_system, validate_trivial)


def _matrix_to_json(mat):
    return [[float(v) for v in row] for row in np.asarray(mat, dtype=float)]


def _matrix_from_json(data, what="matrix"):
    arr = np.array(data, dtype=float)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{what} must be a 2-d array")
    if not np.all(np.isfinite(arr)):
        raise DimensionMismatch(f"{what} has non-finite entries")
    return arr


def system_to_json(system: OperatorSystem) -> dict:
    data = {
        "ambient_dim": system.ambient_dim,
        "generators": [
            {"matrix": _matrix_to_json(g), "sign": int(s)}
            for g, s in system.generators
        ],
    }
    if system.label:
        data["label"] = system.label
    return data


def system_from_json(data: dict) -> OperatorSystem:
    m = int(data["ambient_dim"])
    gens = [( _matrix_from_json(g["matrix"], "generator"), int(g["sign"]))
            for g in data.get("generators", [])]
    label = data.get("label")
    if not gens:
        return validate_trivial(m, label=label)
    system = validate_system(gens, label=label)
    if system.ambient_dim != m:
        raise DimensionMismatch("ambient_dim disagrees with generator shapes")
    return system


def point_to_json(point) -> dict:
    if isinstance(point, ComplexNcPoint):
        return {
            "level": point.level,
            "images": [_matrix_to_json(x) for x in point.real_part],
            "imag": [_matrix_to_json(y) for y in point.imag_part],
        }
    return {
        "level": point.level,
        "images": [_matrix_to_json(x) for x in point.images],
    }


def point_from_json(data: dict, system: OperatorSystem = None):
    level = int(data["level"])
    images = [_matrix_from_json(x, "image") for x in data.get("images", [])]
    if "imag" in data and data["imag"] is not None:
        imag = [_matrix_from_json(y, "image") for y in data["imag"]]
        return ComplexNcPoint(level, images, imag)
    if system is not None:
        return validate_point(system, level, images)
    return NcPoint(level, images)


def function_to_json(f: NcPolynomial) -> dict:
    data = {"terms": [{"word": list(w), "coeff": float(c)}
                      for w, c in f.terms]}
    if f.label:
        data["label"] = f.label
    return data


def function_from_json(data: dict) -> NcPolynomial:
    terms = [(tuple(t["word"]), float(t["coeff"])) for t in data["terms"]]
    for w, c in terms:
        if not math.isfinite(c):
            raise DimensionMismatch("non-finite coefficient")
    return NcPolynomial(terms, label=data.get("label"))


def atoms_to_json(atoms) -> list:
    return [point_to_json(a) for a in atoms]


def atoms_from_json(data, system: OperatorSystem = None):
    return [point_from_json(p, system) for p in data]


def direction_to_json(h) -> list:
    return _matrix_to_json(h)


def direction_from_json(data):
    return _matrix_from_json(data, "direction")


def dumps(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True)


def load_path(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def dump_path(path, data):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(data))
        fh.write("\n")
