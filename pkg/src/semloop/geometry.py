"""Rigid and similarity transforms, closed-form alignment, pinhole projection.

Conventions: rotations are 3x3 orthonormal matrices with det +1, poses are
world-from-camera, cameras follow the usual pinhole layout (+z forward,
+x right, +y down in the camera frame).
"""

from dataclasses import dataclass, field

import numpy as np

from ._backend import horn_alignment
from .errors import BehindCamera, DegenerateConfiguration

_MIN_DEPTH = 1e-6
_ROT_TOL = 1e-9
_EYE3 = np.eye(3)


def _as_vec3(p):
    v = np.asarray(p, dtype=np.float64).reshape(3)
    return v


def _det3(m):
    return (
        m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
        - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
        + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0])
    )


def check_rotation(rot, tol=_ROT_TOL):
    """Raise ValueError unless ``rot`` is orthonormal with det +1."""
    rot = np.asarray(rot, dtype=np.float64)
    if rot.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got {rot.shape}")
    err = np.abs(rot.T @ rot - _EYE3).max()
    if err > tol:
        raise ValueError(f"rotation is not orthonormal (|R'R - I| = {err:.3g})")
    if _det3(rot) < 0:
        raise ValueError("rotation has negative determinant")
    return rot


@dataclass(frozen=True)
class Sim3Transform:
    """7-DoF similarity transform: p -> scale * rotation @ p + translation."""

    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.scale) or self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        object.__setattr__(self, "rotation", check_rotation(self.rotation))
        object.__setattr__(self, "translation", _as_vec3(self.translation))

    @classmethod
    def identity(cls):
        return cls(1.0, np.eye(3), np.zeros(3))

    def apply(self, p):
        """Transform a 3-vector or an (N, 3) array of points."""
        p = np.asarray(p, dtype=np.float64)
        if p.ndim == 1:
            return self.scale * (self.rotation @ p) + self.translation
        return self.scale * (p @ self.rotation.T) + self.translation

    def compose(self, other):
        """Transform applying ``other`` first, then ``self``."""
        return Sim3Transform(
            self.scale * other.scale,
            self.rotation @ other.rotation,
            self.scale * (self.rotation @ other.translation) + self.translation,
        )

    def inverse(self):
        rot_inv = self.rotation.T
        return Sim3Transform(
            1.0 / self.scale, rot_inv, -(rot_inv @ self.translation) / self.scale
        )

    def matrix(self):
        m = np.eye(4)
        m[:3, :3] = self.scale * self.rotation
        m[:3, 3] = self.translation
        return m

    def component_distance(self, other):
        """Max componentwise deviation over (scale, rotation, translation)."""
        return max(
            abs(self.scale - other.scale),
            float(np.abs(self.rotation - other.rotation).max()),
            float(np.abs(self.translation - other.translation).max()),
        )


def sim3_apply(transform, p):
    return transform.apply(p)


def sim3_compose(a, b):
    """Composition applying ``b`` first, then ``a``."""
    return a.compose(b)


def sim3_inverse(transform):
    return transform.inverse()


def horn_sim3(src, dst):
    """Closed-form SIM(3) minimizing ``sum ||dst_i - S(src_i)||^2``.

    Quaternion eigenvalue formulation with the symmetric scale estimate;
    exact on noise-free correspondences.  Raises DegenerateConfiguration
    for fewer than 3 points or a (near-)collinear source set, detected via
    the singular values of the centered source matrix.
    """
    src = np.asarray(src, dtype=np.float64).reshape(-1, 3)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 3)
    if src.shape != dst.shape:
        raise ValueError(f"point sets differ in shape: {src.shape} vs {dst.shape}")
    n = src.shape[0]
    if n < 3:
        raise DegenerateConfiguration(f"need at least 3 correspondences, got {n}")
    sv = np.linalg.svd(src - src.mean(axis=0), compute_uv=False)
    # Three centered points always span at most a plane, so rank 2 is fine;
    # rank < 2 (collinear/coincident) leaves the rotation unobservable.
    if sv[0] <= 0.0 or sv[1] < 1e-9 * sv[0]:
        raise DegenerateConfiguration("source points are collinear")
    scale, rot, t = horn_alignment(src, dst)
    return Sim3Transform(scale, rot, t)


@dataclass(frozen=True)
class Pose:
    """World-from-camera rigid transform."""

    rotation: np.ndarray
    translation: np.ndarray
    quat_cache: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "rotation", check_rotation(self.rotation))
        object.__setattr__(self, "translation", _as_vec3(self.translation))

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    def apply(self, p_cam):
        """Camera-frame point(s) to world frame."""
        p = np.asarray(p_cam, dtype=np.float64)
        if p.ndim == 1:
            return self.rotation @ p + self.translation
        return p @ self.rotation.T + self.translation

    def inverse_apply(self, p_world):
        """World point(s) to camera frame."""
        p = np.asarray(p_world, dtype=np.float64)
        if p.ndim == 1:
            return self.rotation.T @ (p - self.translation)
        return (p - self.translation) @ self.rotation

    def optical_axis(self):
        return self.rotation[:, 2].copy()


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics plus image size, all in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")


def project(camera, pose, p_world):
    """Pinhole projection of a world point; raises BehindCamera at depth <= 1e-6."""
    pc = pose.inverse_apply(_as_vec3(p_world))
    if pc[2] <= _MIN_DEPTH:
        raise BehindCamera(f"depth {pc[2]:.3g}")
    return np.array(
        [camera.fx * pc[0] / pc[2] + camera.cx, camera.fy * pc[1] / pc[2] + camera.cy]
    )


def project_points(camera, pose, pts_world):
    """Vectorized projection.  Returns (pixels (N,2), valid (N,)) where
    invalid rows (depth <= 1e-6) hold garbage pixels."""
    pc = pose.inverse_apply(np.asarray(pts_world, dtype=np.float64).reshape(-1, 3))
    z = pc[:, 2]
    valid = z > _MIN_DEPTH
    z_safe = np.where(valid, z, 1.0)
    uv = np.stack(
        [
            camera.fx * pc[:, 0] / z_safe + camera.cx,
            camera.fy * pc[:, 1] / z_safe + camera.cy,
        ],
        axis=1,
    )
    return uv, valid


def in_image(camera, uv):
    """Boolean mask of pixels inside [0, w) x [0, h)."""
    uv = np.asarray(uv, dtype=np.float64).reshape(-1, 2)
    return (
        (uv[:, 0] >= 0.0)
        & (uv[:, 0] < camera.width)
        & (uv[:, 1] >= 0.0)
        & (uv[:, 1] < camera.height)
    )


def unproject(camera, pose, pixel, depth):
    """Back-project a pixel at the given camera-frame depth to a world point."""
    u, v = float(pixel[0]), float(pixel[1])
    pc = np.array(
        [(u - camera.cx) / camera.fx * depth, (v - camera.cy) / camera.fy * depth, depth]
    )
    return pose.apply(pc)


# ---------------------------------------------------------------------------
# rotation helpers

def rot_x(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=np.float64)


def rot_y(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]], dtype=np.float64)


def rot_z(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=np.float64)


def random_rotation(rng):
    """Uniform random rotation from a random unit quaternion."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    return rotation_from_quat(q)


def rotation_from_quat(q):
    w, x, y, z = np.asarray(q, dtype=np.float64) / np.linalg.norm(q)
    return np.array(
        [
            [w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (y * x + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x)],
            [2 * (z * x - w * y), 2 * (z * y + w * x), w * w - x * x - y * y + z * z],
        ]
    )


def quat_from_rotation(rot):
    """Unit quaternion (w, x, y, z) with a deterministic sign convention."""
    m = np.asarray(rot, dtype=np.float64)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        r = np.sqrt(1.0 + tr)
        s = 0.5 / r
        q = np.array(
            [0.5 * r, (m[2, 1] - m[1, 2]) * s, (m[0, 2] - m[2, 0]) * s, (m[1, 0] - m[0, 1]) * s]
        )
    else:
        k = int(np.argmax(np.diag(m)))
        i, j, l = k, (k + 1) % 3, (k + 2) % 3
        r = np.sqrt(1.0 + m[i, i] - m[j, j] - m[l, l])
        s = 0.5 / r
        q = np.zeros(4)
        q[0] = (m[l, j] - m[j, l]) * s
        q[1 + i] = 0.5 * r
        q[1 + j] = (m[j, i] + m[i, j]) * s
        q[1 + l] = (m[l, i] + m[i, l]) * s
    q /= np.linalg.norm(q)
    for c in q:
        if c < 0:
            return -q
        if c > 0:
            break
    return q


def rotation_log(rot):
    """Axis-angle vector of a rotation matrix."""
    cos_t = np.clip((np.trace(rot) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(cos_t)
    skew = np.array([rot[2, 1] - rot[1, 2], rot[0, 2] - rot[2, 0], rot[1, 0] - rot[0, 1]])
    if theta < 1e-10:
        return 0.5 * skew
    if theta > np.pi - 1e-6:
        # near pi the skew part vanishes; recover the axis from R + I
        a = (rot + np.eye(3)) / 2.0
        axis = np.sqrt(np.maximum(np.diag(a), 0.0))
        k = int(np.argmax(axis))
        if k == 0:
            axis[1] = a[0, 1] / axis[0]
            axis[2] = a[0, 2] / axis[0]
        elif k == 1:
            axis[0] = a[0, 1] / axis[1]
            axis[2] = a[1, 2] / axis[1]
        else:
            axis[0] = a[0, 2] / axis[2]
            axis[1] = a[1, 2] / axis[2]
        axis /= np.linalg.norm(axis)
        if np.dot(axis, skew) < 0:
            axis = -axis
        return axis * theta
    return skew / (2.0 * np.sin(theta)) * theta


def rotation_exp(w):
    """Rotation matrix from an axis-angle vector (Rodrigues)."""
    w = _as_vec3(w)
    theta = np.linalg.norm(w)
    k = np.array([[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]])
    if theta < 1e-12:
        return np.eye(3) + k
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / (theta * theta)
    return np.eye(3) + a * k + b * (k @ k)


def rotation_slerp(rot, alpha):
    """Geodesic interpolation from identity towards ``rot``."""
    return rotation_exp(alpha * rotation_log(rot))


def rotation_angle_deg(rot_a, rot_b):
    """Geodesic angle between two rotations, degrees."""
    cos_t = np.clip((np.trace(rot_a.T @ rot_b) - 1.0) / 2.0, -1.0, 1.0)
    return float(np.degrees(np.arccos(cos_t)))


def sim3_interp(transform, alpha):
    """Geodesic scale/rotation and linear translation interpolation from
    identity (alpha 0) to ``transform`` (alpha 1)."""
    return Sim3Transform(
        transform.scale**alpha,
        rotation_slerp(transform.rotation, alpha),
        alpha * transform.translation,
    )
