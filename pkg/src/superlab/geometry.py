"""Emitter geometries.

All lengths are in units of the transition wavelength (lambda0 = 1), so the
resonant wavenumber is ``2*pi``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

K0 = 2.0 * np.pi


class GeometryError(ValueError):
    pass


def _unit(v, name):
    v = np.asarray(v, dtype=float).reshape(3)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise GeometryError(f"{name} must be non-zero")
    return v / norm


@dataclass(frozen=True)
class EmitterArray:
    """Positions, dipole orientation and drive wavevector of an array.

    ``drive_wavevector`` defaults to normal incidence on the x-y plane, which
    makes every drive phase ``k . r_i`` vanish for planar arrays.
    """

    positions: np.ndarray
    polarization: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    drive_wavevector: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, K0]))

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.shape[-1] != 3:
            raise GeometryError(f"positions must be (N, 3), got {pos.shape}")
        d = np.asarray(self.polarization, dtype=float).reshape(3)
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise GeometryError("polarization must be a unit vector")
        k = np.asarray(self.drive_wavevector, dtype=float).reshape(3)
        if abs(np.linalg.norm(k) - K0) > 1e-12:
            raise GeometryError("|drive_wavevector| must equal 2*pi")
        if len(pos) > 1:
            diff = pos[:, None, :] - pos[None, :, :]
            dist = np.linalg.norm(diff, axis=-1)
            dist[np.diag_indices(len(pos))] = np.inf
            if dist.min() <= 0.0:
                raise GeometryError("coincident emitters; use Dicke backend")
        pos.setflags(write=False)
        d.setflags(write=False)
        k.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "polarization", d)
        object.__setattr__(self, "drive_wavevector", k)

    @property
    def n_atoms(self) -> int:
        return len(self.positions)

    @property
    def phases(self) -> np.ndarray:
        """Drive phases ``k . r_i``."""
        return self.positions @ self.drive_wavevector

    def with_drive_angle(self, theta: float) -> "EmitterArray":
        return EmitterArray(self.positions, self.polarization, drive_direction(theta))


def drive_direction(theta: float) -> np.ndarray:
    """Wavevector at angle ``theta`` from the x axis, tilting towards +z.

    ``theta = 0`` runs along a chain built by :func:`chain`; ``theta = pi/2``
    is normal incidence on the array plane.
    """
    return K0 * np.array([np.cos(theta), 0.0, np.sin(theta)])


def chain(n: int, a: float, theta: float = np.pi / 2, polarization=(0.0, 0.0, 1.0)) -> EmitterArray:
    """Linear chain of ``n`` emitters along x with spacing ``a``."""
    if n < 1:
        raise GeometryError("chain needs at least one emitter")
    if n > 1 and a <= 0:
        raise GeometryError("spacing must be positive")
    pos = np.zeros((n, 3))
    pos[:, 0] = a * np.arange(n)
    return EmitterArray(pos, _unit(polarization, "polarization"), drive_direction(theta))


def square(n: int, a: float, theta: float = np.pi / 2, polarization=(0.0, 0.0, 1.0)) -> EmitterArray:
    """``n x n`` square lattice in the x-y plane (``n**2`` emitters)."""
    if n < 1:
        raise GeometryError("square needs n >= 1")
    if n > 1 and a <= 0:
        raise GeometryError("spacing must be positive")
    ix, iy = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    pos = np.zeros((n * n, 3))
    pos[:, 0] = a * ix.ravel()
    pos[:, 1] = a * iy.ravel()
    return EmitterArray(pos, _unit(polarization, "polarization"), drive_direction(theta))


def ring(n: int, a: float, polarization=(0.0, 0.0, 1.0)) -> EmitterArray:
    """Regular polygon in the x-y plane with nearest-neighbour distance ``a``.

    Every site is equivalent, which makes the effective-spin reduction exact.
    """
    if n < 2:
        raise GeometryError("ring needs at least two emitters")
    radius = a / (2.0 * np.sin(np.pi / n))
    phi = 2.0 * np.pi * np.arange(n) / n
    pos = np.stack([radius * np.cos(phi), radius * np.sin(phi), np.zeros(n)], axis=1)
    return EmitterArray(pos, _unit(polarization, "polarization"))


def fixed_length_chain(n: int, length: float, theta: float = np.pi / 2) -> EmitterArray:
    """Chain of ``n`` emitters spread evenly over total length ``length``."""
    if n < 2:
        raise GeometryError("fixed-length chain needs n >= 2")
    return chain(n, length / (n - 1), theta)


def read_positions(path) -> np.ndarray:
    """Read a CSV with header ``x,y,z`` (units of lambda0)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["x", "y", "z"]:
            raise GeometryError(f"{path}: header must be exactly x,y,z")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            try:
                rows.append([float(row[c]) for c in ("x", "y", "z")])
            except (TypeError, ValueError) as exc:
                raise GeometryError(f"{path}:{lineno}: bad coordinate ({exc})") from None
    if not rows:
        raise GeometryError(f"{path}: no positions")
    return np.array(rows)


def custom(path, theta: float = np.pi / 2, polarization=(0.0, 0.0, 1.0)) -> EmitterArray:
    return EmitterArray(read_positions(path), _unit(polarization, "polarization"), drive_direction(theta))


def write_positions(path, array: EmitterArray) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "z"])
        for r in array.positions:
            w.writerow([repr(float(c)) for c in r])
