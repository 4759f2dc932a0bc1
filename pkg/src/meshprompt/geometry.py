"""Camera models, rotation math, mesh loading, and perspective projection.

Conventions, fixed across the whole pipeline:

- World frame is right-handed with +y up. Objects are centered at the
  origin (meshes are normalized on load).
- Camera frame follows the computer-vision convention: +x right, +y down,
  +z forward, so points in front of the camera have camera-space z > 0.
  World-to-camera: ``x_cam = R @ x_world + t``.
- Image origin is the top-left corner; pixel (row i, column j) covers the
  unit square with center (j + 0.5, i + 0.5).
- A viewpoint places the camera on a sphere around the origin: azimuth 0,
  elevation 0 puts the camera on the +z world axis; azimuth rotates toward
  +x, elevation lifts toward +y. The camera looks at the origin and is then
  rolled by theta about its optical axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BehindCameraError,
    EmptyMeshError,
    InvalidIntrinsicsError,
    InvalidRotationError,
    InvalidViewpointError,
    MeshFormatError,
)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Viewpoint:
    """Spherical camera placement: azimuth/elevation/roll plus distance.

    Azimuth is normalized into [0, 2*pi); elevation is clamped to
    [-pi/2, pi/2]; theta (in-plane roll) is wrapped into (-pi, pi].
    Distance is in scene units (bounding-box diagonals for normalized
    meshes) and must be strictly positive.
    """

    azimuth: float
    elevation: float
    theta: float
    distance: float

    def __post_init__(self):
        if not (self.distance > 0.0) or not math.isfinite(self.distance):
            raise InvalidViewpointError(f"distance must be > 0, got {self.distance}")
        az = self.azimuth % TWO_PI
        if az >= TWO_PI:  # float wrap of tiny negatives
            az = 0.0
        el = min(max(self.elevation, -math.pi / 2.0), math.pi / 2.0)
        th = math.remainder(self.theta, TWO_PI)
        if th <= -math.pi:
            th += TWO_PI
        object.__setattr__(self, "azimuth", az)
        object.__setattr__(self, "elevation", el)
        object.__setattr__(self, "theta", th)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in physical units plus the image raster size.

    ``f_px`` is derived as focal_length / sensor_width * image_width.
    """

    focal_length: float = 35.0  # millimeters
    sensor_width: float = 32.0  # millimeters
    image_width: int = 512
    image_height: int = 512
    principal_point: tuple[float, float] | None = None

    def __post_init__(self):
        if self.focal_length <= 0 or self.sensor_width <= 0:
            raise InvalidIntrinsicsError("focal length and sensor width must be > 0")
        if self.image_width <= 0 or self.image_height <= 0:
            raise InvalidIntrinsicsError(
                f"image dimensions must be positive, got {self.image_width}x{self.image_height}"
            )
        if self.principal_point is None:
            object.__setattr__(
                self, "principal_point", (self.image_width / 2.0, self.image_height / 2.0)
            )
        cx, cy = self.principal_point
        if not (0.0 <= cx <= self.image_width and 0.0 <= cy <= self.image_height):
            raise InvalidIntrinsicsError(f"principal point {self.principal_point} outside image bounds")

    @property
    def f_px(self) -> float:
        return self.focal_length / self.sensor_width * self.image_width


def require_rotation(R: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Validate that R is a proper rotation: R^T R = I and det R = 1 within tol."""
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3):
        raise InvalidRotationError(f"expected 3x3 matrix, got shape {R.shape}")
    err = np.max(np.abs(R.T @ R - np.eye(3)))
    if err > tol:
        raise InvalidRotationError(f"R^T R deviates from identity by {err:.3e} (tol {tol:.0e})")
    det = float(np.linalg.det(R))
    if abs(det - 1.0) > tol:
        raise InvalidRotationError(f"det(R) = {det!r}, not 1 within {tol:.0e}")
    return R


@dataclass(frozen=True, eq=False)
class CameraExtrinsics:
    """World-to-camera transform: x_cam = rotation @ x_world + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", require_rotation(self.rotation))
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "translation", t)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangle mesh with the metadata the prompt pipeline needs.

    ``class_name`` is the one-word object class used in text prompts;
    ``keywords`` are the tags attached to the source CAD model;
    ``source_id`` identifies the CAD file within its repository.
    ``normalization`` records the recentering/rescaling applied on load.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    normals: np.ndarray | None = None
    class_name: str = ""
    keywords: tuple[str, ...] = ()
    source_id: str = ""
    normalization: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "keywords", tuple(self.keywords))
        if len(t) > 0:
            if len(v) < 3:
                raise EmptyMeshError(f"mesh has faces but only {len(v)} vertices")
            if t.min() < 0 or t.max() >= len(v):
                raise MeshFormatError(
                    f"triangle index out of range [0, {len(v)}): "
                    f"min {t.min()}, max {t.max()}"
                )
            degenerate = (t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])
            if degenerate.any():
                raise MeshFormatError(
                    f"{int(degenerate.sum())} triangle(s) reference fewer than 3 distinct vertices"
                )


def rotation_about_z(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def viewpoint_to_extrinsics(vp: Viewpoint) -> CameraExtrinsics:
    """Build world-to-camera extrinsics for a spherical viewpoint.

    The camera sits at distance ``vp.distance`` from the origin in the
    direction (azimuth, elevation), looks at the origin with world +y as
    the up reference, and is rolled by ``vp.theta`` about the optical axis.
    At elevation +-pi/2 the up reference degenerates; the right vector is
    continued continuously as (cos az, 0, -sin az).
    """
    ca, sa = math.cos(vp.azimuth), math.sin(vp.azimuth)
    ce, se = math.cos(vp.elevation), math.sin(vp.elevation)
    eye = vp.distance * np.array([ce * sa, se, ce * ca])

    fwd = -eye / np.linalg.norm(eye)  # camera +z, toward the origin
    # right = normalize(fwd x world_up) for world_up = +y, written out.
    right = np.array([-fwd[2], 0.0, fwd[0]])
    n = np.linalg.norm(right)
    if n < 1e-12:  # looking straight up/down
        right = np.array([ca, 0.0, -sa])
    else:
        right = right / n
    down = np.cross(fwd, right)  # camera +y

    look = np.stack([right, down, fwd])
    R = rotation_about_z(vp.theta) @ look
    t = -R @ eye
    return CameraExtrinsics(rotation=R, translation=t)


def project(
    p, K: CameraIntrinsics, xi: CameraExtrinsics
) -> tuple[float, float, float]:
    """Pinhole-project a world point; returns (u, v, depth) in pixels/scene units.

    Raises BehindCameraError when the point's camera-space z is <= 0.
    """
    p = np.asarray(p, dtype=np.float64).reshape(3)
    x, y, z = xi.rotation @ p + xi.translation
    if z <= 0.0:
        raise BehindCameraError(f"camera-space z = {z!r}")
    cx, cy = K.principal_point
    f = K.f_px
    return (cx + f * (x / z), cy + f * (y / z), z)


def _parse_obj(path: Path):
    vertices: list[list[float]] = []
    faces: list[list[int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            tag = fields[0]
            if tag == "v":
                if len(fields) < 4:
                    raise MeshFormatError("vertex needs 3 coordinates", line=lineno)
                try:
                    vertices.append([float(c) for c in fields[1:4]])
                except ValueError:
                    raise MeshFormatError(f"bad vertex coordinate in {line!r}", line=lineno)
            elif tag == "f":
                if len(fields) < 4:
                    raise MeshFormatError("face needs at least 3 vertices", line=lineno)
                idx = []
                for part in fields[1:]:
                    head = part.split("/")[0]
                    try:
                        i = int(head)
                    except ValueError:
                        raise MeshFormatError(f"bad face index {part!r}", line=lineno)
                    if i == 0:
                        raise MeshFormatError("OBJ indices are 1-based, got 0", line=lineno)
                    idx.append(i - 1 if i > 0 else len(vertices) + i)
                faces.append(idx)
            # other record types (vn, vt, o, g, s, usemtl, mtllib, ...) are ignored
    return vertices, faces


def load_mesh(path) -> Mesh:
    """Load a Wavefront OBJ (v/f subset), fan-triangulate, and normalize.

    The returned mesh is recentered so its bounding-box center is at the
    origin and uniformly scaled so the bounding-box diagonal is 1; the
    applied center and scale are recorded in ``Mesh.normalization``.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such mesh file: {path}")
    vertices, faces = _parse_obj(path)
    triangles = [[f[0], f[i], f[i + 1]] for f in faces for i in range(1, len(f) - 1)]
    if not triangles:
        raise EmptyMeshError(f"{path} contains no faces")

    v = np.asarray(vertices, dtype=np.float64)
    lo, hi = v.min(axis=0), v.max(axis=0)
    center = (lo + hi) / 2.0
    diagonal = float(np.linalg.norm(hi - lo))
    if diagonal <= 0.0:
        raise MeshFormatError("mesh bounding box is degenerate (all vertices coincide)")
    scale = 1.0 / diagonal
    v = (v - center) * scale

    return Mesh(
        vertices=v,
        triangles=np.asarray(triangles, dtype=np.int64),
        class_name=path.stem,
        source_id=path.stem,
        normalization={"center": [float(c) for c in center], "scale": scale},
    )
