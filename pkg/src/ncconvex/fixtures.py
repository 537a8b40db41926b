"""Built-in fixtures: three small systems with named points and functions.

* ``skew``: the system spanned by the 2x2 rotation generator
  J = [[0, -1], [1, 0]] (J^2 = -I).  Its state space at level n is the
  skew-symmetric contractions; shipped points are the level-1 origin and
  the generator itself as a level-2 point.
* ``interval``: span{I, diag(1, -1)}, the operator interval [-1, 1];
  shipped points are -1, 0, 1 at level 1, with the square and negated
  square polynomials.
* ``quaternion``: the standard 4x4 skew triple i, j, k with
  i^2 = j^2 = k^2 = -I and ij = k (verified at load time), plus the
  compression of the defining representation to its first two
  coordinates.
"""

from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from .envelope import NcPolynomial
from .errors import UnknownFixture
from .systems import NcPoint, OperatorSystem, validate_system

FIXTURE_NAMES = ("skew", "interval", "quaternion")


@dataclass(frozen=True)
class Fixture:
    name: str
    system: OperatorSystem
    points: Dict[str, NcPoint]
    functions: Dict[str, NcPolynomial]
    provenance: str


def _rotation():
    return np.array([[0.0, -1.0], [1.0, 0.0]])


def _skew_fixture() -> Fixture:
    j = _rotation()
    system = validate_system([(j, -1)], label="skew")
    points = {
        "zero": NcPoint(1, [np.zeros((1, 1))]),
        "rotation": NcPoint(2, [j]),
    }
    provenance = ("span{I, J} in M_2(R) with J the quarter-turn rotation; "
                  "members at level n are the skew contractions")
    return Fixture("skew", system, points, {}, provenance)


def _interval_fixture() -> Fixture:
    g = np.diag([1.0, -1.0])
    system = validate_system([(g, +1)], label="interval")
    points = {
        "minus-one": NcPoint(1, [np.array([[-1.0]])]),
        "zero": NcPoint(1, [np.array([[0.0]])]),
        "plus-one": NcPoint(1, [np.array([[1.0]])]),
    }
    functions = {
        "square": NcPolynomial([((0, 0), 1.0)], label="square"),
        "neg-square": NcPolynomial([((0, 0), -1.0)], label="neg-square"),
    }
    provenance = ("span{I, diag(1, -1)} in M_2(R); the operator interval "
                  "[-1, 1] with endpoint characters at +/-1")
    return Fixture("interval", system, points, functions, provenance)


def quaternion_generators() -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Standard 4x4 matrices for i, j, k (block form over 2x2 rotations)."""
    r = _rotation()
    z = np.zeros((2, 2))
    e = np.eye(2)
    qi = np.block([[r, z], [z, -r]])
    qj = np.block([[z, e], [-e, z]])
    qk = np.block([[z, r], [r, z]])
    return qi, qj, qk


def _quaternion_fixture() -> Fixture:
    qi, qj, qk = quaternion_generators()
    eye = np.eye(4)
    for name, q in (("i", qi), ("j", qj), ("k", qk)):
        if not np.allclose(q @ q, -eye):
            raise AssertionError(f"{name}^2 != -I in the quaternion fixture")
    if not np.allclose(qi @ qj, qk):
        raise AssertionError("ij != k in the quaternion fixture")
    system = validate_system([(qi, -1), (qj, -1), (qk, -1)],
                             label="quaternion")
    points = {
        "re-compression": NcPoint(2, [q[:2, :2] for q in (qi, qj, qk)]),
        "identity-rep": NcPoint(4, [qi, qj, qk]),
    }
    provenance = ("the quaternions as a real *-subalgebra of M_4(R); "
                  "re-compression is the cut-down to the first two "
                  "coordinates of the defining representation")
    return Fixture("quaternion", system, points, {}, provenance)


_BUILDERS = {
    "skew": _skew_fixture,
    "interval": _interval_fixture,
    "quaternion": _quaternion_fixture,
}


def load_fixture(name: str) -> Fixture:
    """Load a named fixture; raises :class:`UnknownFixture` otherwise."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise UnknownFixture(
            f"no fixture {name!r}; available: {', '.join(FIXTURE_NAMES)}"
        ) from None
    return builder()
