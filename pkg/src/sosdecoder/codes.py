"""CSS code families: rotated surface codes and triangular 6.6.6 color codes."""

import json
from dataclasses import dataclass, field

import numpy as np

from . import gf2


@dataclass(frozen=True, eq=False)
class CssCode:
    family: str
    distance: int
    hx: np.ndarray
    hz: np.ndarray
    logicals_x: np.ndarray = field(default=None)
    logicals_z: np.ndarray = field(default=None)

    def __post_init__(self):
        hx = gf2.as_bits(self.hx, ndim=2)
        hz = gf2.as_bits(self.hz, ndim=2)
        if hx.shape[1] != hz.shape[1]:
            raise ValueError("hx and hz must have the same number of columns")
        object.__setattr__(self, "hx", hx)
        object.__setattr__(self, "hz", hz)
        if self.logicals_x is None or self.logicals_z is None:
            lx, lz = compute_logicals(hx, hz)
        else:
            lx = gf2.as_bits(np.atleast_2d(self.logicals_x), ndim=2)
            lz = gf2.as_bits(np.atleast_2d(self.logicals_z), ndim=2)
        object.__setattr__(self, "logicals_x", lx)
        object.__setattr__(self, "logicals_z", lz)

    @property
    def n(self):
        return self.hx.shape[1]

    @property
    def k(self):
        return self.logicals_x.shape[0]

    @property
    def name(self):
        return f"{self.family}_d{self.distance}"

    def sector(self, kind="x"):
        """Checks detecting ``kind`` errors and the logical they are scored against.

        X errors are caught by Z checks and flip the logical when they overlap
        the Z logical an odd number of times; Z errors the other way round.
        """
        if kind == "x":
            return self.hz, self.hx, self.logicals_z
        if kind == "z":
            return self.hx, self.hz, self.logicals_x
        raise ValueError(f"unknown error sector {kind!r}")

    def to_dict(self):
        return {
            "family": self.family,
            "distance": int(self.distance),
            "n": int(self.n),
            "hx": self.hx.astype(int).tolist(),
            "hz": self.hz.astype(int).tolist(),
            "lx": self.logicals_x.astype(int).tolist(),
            "lz": self.logicals_z.astype(int).tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        n = int(d["n"])
        hx = np.array(d["hx"], dtype=np.int64).reshape(-1, n)
        hz = np.array(d["hz"], dtype=np.int64).reshape(-1, n)
        lx = np.array(d["lx"], dtype=np.int64).reshape(-1, n)
        lz = np.array(d["lz"], dtype=np.int64).reshape(-1, n)
        return cls(d["family"], int(d["distance"]), hx, hz, lx, lz)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _gf2_inverse(m):
    k = m.shape[0]
    aug = np.concatenate([m.astype(np.uint8), np.eye(k, dtype=np.uint8)], axis=1)
    red, pivots, rk = gf2.rref(aug)
    if rk < k or pivots[:k] != list(range(k)):
        raise ValueError("matrix is singular over GF(2)")
    return red[:, k:]


def _independent_kernel_vectors(h_kernel, h_stab):
    # rows of ker(h_kernel) that are independent modulo rowspace(h_stab)
    stab = gf2.rowspace_basis(h_stab)
    ker = gf2.nullspace_basis(h_kernel)
    picked = []
    current = stab
    rk = stab.shape[0]
    for v in ker:
        trial = np.vstack([current, v[None, :]])
        r = gf2.rank(trial)
        if r > rk:
            picked.append(v)
            current, rk = trial, r
    return np.array(picked, dtype=np.uint8).reshape(-1, h_kernel.shape[1])


def compute_logicals(hx, hz):
    """Logical operator representatives ``(lx, lz)`` with ``lx lz^T = I``.

    ``lx`` spans ker(hz) / rowspace(hx), ``lz`` spans ker(hx) / rowspace(hz).
    """
    hx = np.asarray(hx, dtype=np.uint8)
    hz = np.asarray(hz, dtype=np.uint8)
    if np.any(gf2.matmul(hx, hz.T)):
        raise ValueError("inconsistent check matrices: hx hz^T != 0")
    lx = _independent_kernel_vectors(hz, hx)
    lz = _independent_kernel_vectors(hx, hz)
    if lx.shape[0] != lz.shape[0]:
        raise ValueError("inconsistent check matrices: logical counts differ")
    if lx.shape[0]:
        pairing = gf2.matmul(lx, lz.T)
        lz = gf2.matmul(_gf2_inverse(pairing).T, lz)
    return lx, lz


def build_rotated_surface(d):
    """Rotated surface code on a ``d x d`` vertex grid, qubit index ``row * d + col``.

    Plaquette ``(r, c)`` covers the vertices ``(r..r+1, c..c+1)`` that lie in
    the grid; bulk plaquettes alternate X/Z by ``(r + c) % 2`` and the weight-2
    boundary plaquettes keep X on the top/bottom edges and Z on the left/right.
    """
    if int(d) != d or d < 2:
        raise ValueError(f"surface code distance must be an integer >= 2, got {d}")
    d = int(d)
    x_faces, z_faces = [], []
    for r in range(-1, d):
        for c in range(-1, d):
            support = [
                rr * d + cc
                for rr in (r, r + 1)
                for cc in (c, c + 1)
                if 0 <= rr < d and 0 <= cc < d
            ]
            is_x = (r + c) % 2 == 0
            bulk = 0 <= r < d - 1 and 0 <= c < d - 1
            vertical_edge = (r in (-1, d - 1)) and 0 <= c < d - 1
            horizontal_edge = (c in (-1, d - 1)) and 0 <= r < d - 1
            if bulk:
                (x_faces if is_x else z_faces).append(sorted(support))
            elif vertical_edge and is_x:
                x_faces.append(sorted(support))
            elif horizontal_edge and not is_x:
                z_faces.append(sorted(support))
    n = d * d
    hx = _rows_to_matrix(x_faces, n)
    hz = _rows_to_matrix(z_faces, n)
    return CssCode("surface", d, hx, hz)


def _rows_to_matrix(rows, n):
    m = np.zeros((len(rows), n), dtype=np.uint8)
    for i, sup in enumerate(rows):
        m[i, sup] = 1
    return m


def _color_lattice(d):
    """Data-qubit and face-centre sites of the triangular 6.6.6 patch."""
    size = 3 * (d - 1) // 2
    qubits, faces = [], []
    for y in range(size + 1):
        face_pos = (2, 0, 1)[y % 3]
        for x in range(y, 2 * size - y + 1, 2):
            if ((x - y) // 2) % 3 == face_pos:
                faces.append((y, x))
            else:
                qubits.append((y, x))
    return sorted(qubits), sorted(faces)


def build_color_code(d):
    """Triangular patch of the hexagonal (6.6.6) color code.

    Sites sit on a triangular lattice; every third site is a face centre and
    the face acts on its (up to six) lattice neighbours. Qubits and faces are
    indexed in (row, col) order. The code is self-dual: ``hx == hz``.
    """
    if d not in (3, 5, 7):
        raise ValueError(f"color code distance must be 3, 5 or 7, got {d}")
    qubits, faces = _color_lattice(d)
    index = {q: i for i, q in enumerate(qubits)}
    rows = []
    for (y, x) in faces:
        sup = []
        for dy, dx in ((0, -2), (0, 2), (-1, -1), (-1, 1), (1, -1), (1, 1)):
            q = (y + dy, x + dx)
            if q in index:
                sup.append(index[q])
        rows.append(sorted(sup))
    h = _rows_to_matrix(rows, len(qubits))
    return CssCode("color", d, h, h.copy())


def build_code(family, d):
    if family == "surface":
        return build_rotated_surface(d)
    if family == "color":
        return build_color_code(d)
    raise ValueError(f"unknown code family {family!r}")


def validate(code):
    """List every violated CSS-code invariant (empty list means valid)."""
    problems = []
    hx, hz, lx, lz = code.hx, code.hz, code.logicals_x, code.logicals_z
    n = hx.shape[1]
    if np.any(gf2.matmul(hx, hz.T)):
        problems.append("commutation: hx hz^T != 0")
    if lx.shape[0] == 0 or lz.shape[0] == 0:
        problems.append("missing logical operators")
    else:
        if lx.shape != lz.shape:
            problems.append("logical counts differ between sectors")
        if np.any(gf2.matmul(hz, lx.T)):
            problems.append("logical X does not commute with Z checks")
        if np.any(gf2.matmul(hx, lz.T)):
            problems.append("logical Z does not commute with X checks")
        if lx.shape == lz.shape and not np.array_equal(gf2.matmul(lx, lz.T), np.eye(lx.shape[0], dtype=np.uint8)):
            problems.append("logical operators are not pairwise anticommuting")
        k_expected = n - gf2.rank(hx) - gf2.rank(hz)
        if lx.shape[0] != k_expected:
            problems.append(f"expected {k_expected} logical qubits, found {lx.shape[0]}")
    if code.family == "surface" and n != code.distance ** 2:
        problems.append(f"surface code should have d^2={code.distance ** 2} qubits, has {n}")
    if code.family not in ("surface", "color"):
        problems.append(f"unknown family {code.family!r}")
    return problems
