"""Image-based visual servoing on the 12 labeled corners.

The feature vector s stacks the normalized image coordinates of the
corners label by label, giving 24 values. The controlled degrees of
freedom are camera-frame linear velocity and yaw rate, (vx, vy, vz, wz),
so each point contributes two interaction rows restricted to those four
columns. The command is the regularized least-squares pull of the
feature error toward the reference, with separate caps on linear speed
and yaw rate.
"""

from __future__ import annotations

import math

import numpy as np

from .corners import ROT180_RELABEL
from .errors import ConfigError, DegenerateConfigError, DepthError, InvalidInputError

_COND_LIMIT = 1e12

# 24-vector index permutation matching the 180-degree corner relabel
_RELABEL24 = np.stack([2 * ROT180_RELABEL, 2 * ROT180_RELABEL + 1], axis=1).ravel()


def normalize_points(pts_px, fx: float, fy: float, cx: float, cy: float) -> np.ndarray:
    """Pixel corners to normalized image-plane coordinates."""
    p = np.asarray(pts_px, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != 2:
        raise InvalidInputError("expected an (N, 2) pixel array")
    if fx <= 0 or fy <= 0:
        raise ConfigError(f"focal lengths must be positive, got fx={fx}, fy={fy}")
    out = np.empty_like(p)
    out[:, 0] = (p[:, 0] - cx) / fx
    out[:, 1] = (p[:, 1] - cy) / fy
    return out


def interaction_rows(x: float, y: float, z: float) -> np.ndarray:
    """Two interaction rows of one normalized point at depth z for the
    reduced twist (vx, vy, vz, wz)."""
    if z <= 0:
        raise DepthError(f"point depth must be positive, got {z}")
    return np.array([
        [-1.0 / z, 0.0, x / z, y],
        [0.0, -1.0 / z, y / z, -x],
    ])


def stack_interaction(pts_norm, z) -> np.ndarray:
    """(2N, 4) interaction matrix; z is a scalar depth or one per point."""
    p = np.asarray(pts_norm, dtype=np.float64)
    n = len(p)
    zs = np.broadcast_to(np.asarray(z, dtype=np.float64), (n,))
    rows = [interaction_rows(p[i, 0], p[i, 1], float(zs[i])) for i in range(n)]
    return np.concatenate(rows, axis=0)


def compute_error(s, s_star) -> np.ndarray:
    a = np.asarray(s, dtype=np.float64).ravel()
    b = np.asarray(s_star, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise InvalidInputError(f"feature vectors differ in size: {a.shape} vs {b.shape}")
    return a - b


def align_to_reference(s_live, s_star) -> tuple[np.ndarray, bool]:
    """Resolve the mark's half-turn ambiguity.

    The labeler cannot distinguish the mark from its 180-degree rotation,
    so the live features are compared to the reference both as-is and
    under the relabel permutation; whichever leaves the smaller error
    norm wins. Returns (possibly permuted live features, flipped?)."""
    a = np.asarray(s_live, dtype=np.float64).ravel()
    b = np.asarray(s_star, dtype=np.float64).ravel()
    if a.shape != (24,) or b.shape != (24,):
        raise InvalidInputError("feature vectors must have 24 entries")
    e_id = float(np.linalg.norm(a - b))
    flipped = a[_RELABEL24]
    e_fl = float(np.linalg.norm(flipped - b))
    if e_fl < e_id:
        return flipped, True
    return a, False


def _chol_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    c = np.linalg.cholesky(a)
    n = len(b)
    y = np.zeros(n)
    for i in range(n):
        y[i] = (b[i] - c[i, :i] @ y[:i]) / c[i, i]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        x[i] = (y[i] - c[i + 1:, i] @ x[i + 1:]) / c[i, i]
    return x


def control_law(lmat, err, lam: float, mu: float,
                v_max: float, w_max: float) -> np.ndarray:
    """Damped least-squares IBVS command (vx, vy, vz, wz), camera frame.

    Solves (L^T L + mu I) d = L^T e by Cholesky and returns -lam * d with
    the linear part capped jointly (direction preserved) at v_max and the
    yaw rate clamped at w_max. A normal matrix with condition number
    beyond 1e12 raises DegenerateConfigError rather than emitting an
    unreliable command.
    """
    if lam < 0:
        raise ConfigError(f"gain must be >= 0, got {lam}")
    if mu < 0:
        raise ConfigError(f"damping must be >= 0, got {mu}")
    if v_max <= 0 or w_max <= 0:
        raise ConfigError(f"speed caps must be positive, got {v_max}, {w_max}")
    lmat = np.asarray(lmat, dtype=np.float64)
    err = np.asarray(err, dtype=np.float64).ravel()
    if lmat.ndim != 2 or lmat.shape[1] != 4 or lmat.shape[0] != err.shape[0]:
        raise InvalidInputError(f"interaction matrix {lmat.shape} does not match "
                                f"error vector {err.shape}")
    a = lmat.T @ lmat + mu * np.eye(4)
    if np.linalg.cond(a) > _COND_LIMIT:
        raise DegenerateConfigError("interaction matrix is numerically degenerate")
    v = -lam * _chol_solve(a, lmat.T @ err)
    lin = float(np.linalg.norm(v[:3]))
    if lin > v_max:
        v[:3] *= v_max / lin
    if abs(v[3]) > w_max:
        v[3] = math.copysign(w_max, v[3])
    return v


_AXES = {"x": 0, "y": 1, "z": 2}


def mounting_matrix(spec: str) -> np.ndarray:
    """Camera-to-body rotation from a compact axis spec.

    Three tokens name the body-frame direction of the camera's x, y, and
    z axes, e.g. "y x -z": camera x points along body y, camera y along
    body x, camera z along negative body z. The result must be a proper
    rotation (distinct axes, determinant +1) or ConfigError is raised.
    """
    tokens = spec.split()
    if len(tokens) != 3:
        raise ConfigError(f"mounting needs 3 axis tokens, got {spec!r}")
    m = np.zeros((3, 3))
    used = set()
    for col, tok in enumerate(tokens):
        sign = 1.0
        name = tok
        if name.startswith("-"):
            sign = -1.0
            name = name[1:]
        elif name.startswith("+"):
            name = name[1:]
        if name not in _AXES:
            raise ConfigError(f"bad mounting axis {tok!r} in {spec!r}")
        if name in used:
            raise ConfigError(f"mounting axis {name!r} repeated in {spec!r}")
        used.add(name)
        m[_AXES[name], col] = sign
    if abs(np.linalg.det(m) - 1.0) > 1e-12:
        raise ConfigError(f"mounting {spec!r} is not a proper rotation "
                          "(determinant must be +1)")
    return m


def to_body_frame(v_cam, mounting: str | np.ndarray) -> np.ndarray:
    """Map a camera-frame (vx, vy, vz, wz) command into the body frame."""
    v = np.asarray(v_cam, dtype=np.float64).ravel()
    if v.shape != (4,):
        raise InvalidInputError(f"expected a 4-vector command, got shape {v.shape}")
    m = mounting_matrix(mounting) if isinstance(mounting, str) else np.asarray(mounting)
    out = np.empty(4)
    out[:3] = m @ v[:3]
    out[3] = m[2, 2] * v[3]  # yaw rate rides the camera z axis
    return out


def landing_monitor(err_norms, eps: float, hold: int) -> bool:
    """True when the last `hold` error norms all sit below eps."""
    if hold < 1:
        raise ConfigError(f"hold must be >= 1, got {hold}")
    seq = [float(v) for v in err_norms]
    if len(seq) < hold:
        return False
    return all(v < eps for v in seq[-hold:])


def save_reference(path, s_star: np.ndarray) -> None:
    """Write the reference features, one 'label x y' line per corner."""
    s = np.asarray(s_star, dtype=np.float64).ravel()
    if s.shape != (24,):
        raise InvalidInputError("reference must have 24 values")
    with open(path, "w", encoding="ascii") as fh:
        for k in range(12):
            fh.write(f"{k} {float(s[2 * k])!r} {float(s[2 * k + 1])!r}\n")


def load_reference(path) -> np.ndarray:
    s = np.zeros(24)
    seen = set()
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise InvalidInputError(f"{path}: bad reference line {line!r}")
            try:
                k = int(parts[0])
                x = float(parts[1])
                y = float(parts[2])
            except ValueError as exc:
                raise InvalidInputError(f"{path}: bad reference line {line!r}") from exc
            if not 0 <= k < 12 or k in seen:
                raise InvalidInputError(f"{path}: bad or repeated label {k}")
            seen.add(k)
            s[2 * k] = x
            s[2 * k + 1] = y
    if len(seen) != 12:
        raise InvalidInputError(f"{path}: expected 12 labeled corners, got {len(seen)}")
    return s


def ibvs_step(pts_px, s_star, z: float, cfg, fx: float, fy: float,
              cx: float, cy: float) -> tuple[np.ndarray, float]:
    """One full servo evaluation from labeled pixel corners.

    Normalizes the corners, resolves the half-turn ambiguity against the
    reference, builds the interaction matrix at the current depth, and
    returns (body-frame command, error norm).
    """
    pn = normalize_points(pts_px, fx, fy, cx, cy)
    s_live, _ = align_to_reference(pn.ravel(), s_star)
    err = compute_error(s_live, s_star)
    lmat = stack_interaction(s_live.reshape(12, 2), z)
    v_cam = control_law(lmat, err, float(cfg["servo.lam"]), float(cfg["servo.mu"]),
                        float(cfg["servo.v_max"]), float(cfg["servo.w_max"]))
    v_body = to_body_frame(v_cam, str(cfg["servo.mounting"]))
    return v_body, float(np.linalg.norm(err))
