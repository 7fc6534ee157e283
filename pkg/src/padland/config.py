"""Flat key=value run configuration with typed defaults.

Every tunable knob in the stack lives here so the CLI can expose a
single --config file plus --set overrides. Unknown keys are rejected
to catch typos early.
"""

from __future__ import annotations

from .errors import ConfigError

# key -> (default, help). The default's type also fixes the key's type.
DEFAULTS = {
    # preprocessing / adaptive threshold
    "thresh.block": (35, "adaptive threshold window size in px (odd)"),
    "thresh.c": (6, "adaptive threshold offset added to the local mean"),
    "thresh.polarity": ("bright", "foreground polarity: bright or dark"),
    "thresh.denoise_sigma": (1.0, "Gaussian blur applied before thresholding (0 = off)"),
    # circle candidate search
    "hough.r_min": (16, "smallest circle radius searched, px"),
    "hough.r_max": (170, "largest circle radius searched, px"),
    "hough.r_step": (2, "radius bin spacing, px"),
    "hough.vote_frac": (0.6, "vote threshold as a fraction of the 2*pi*r perimeter"),
    "hough.blur_sigma": (2.0, "mask blur used to estimate edge normals"),
    "hough.max_candidates": (8, "candidates kept after non-maximum suppression"),
    # H extraction at the fixed 228x228 scale
    "extract.approx_eps": (2.0, "contour simplification tolerance, px"),
    "extract.blur_sigma": (1.5, "smoothing blur before the final re-threshold"),
    # elimination checks
    "checks.max_center_ratio": (0.0825, "diagonal/centroid offset limit over radius"),
    "checks.area_min": (0.2, "lower bound of H area over circle area"),
    "checks.area_max": (0.4, "upper bound of H area over circle area"),
    # corner extraction
    "corners.quality": (0.05, "keep responses >= quality * max response"),
    "corners.min_dist": (10.0, "greedy suppression distance between corners, px"),
    # median-flow tracking
    "track.grid": (10, "seed grid is grid x grid points inside the bbox"),
    "track.levels": (3, "pyramid levels for optical flow"),
    "track.win": (15, "optical flow window size, px (odd)"),
    "track.fb_max": (2.0, "tracking fails when the median fwd-bwd error exceeds this"),
    "track.ncc_patch": (7, "patch size for the normalized cross-correlation filter"),
    "track.ncc_min": (0.7, "minimum NCC between matched patches"),
    "track.min_survivors": (10, "tracking fails with fewer filtered points"),
    "track.redetect_every": (0, "force a fresh detection every N frames (0 = never)"),
    # visual-servoing control
    "servo.lam": (1.0, "control gain, 1/s"),
    "servo.mu": (1e-6, "damping added to the normal equations"),
    "servo.v_max": (0.7, "cap on the commanded linear speed, m/s"),
    "servo.w_max": (0.8, "cap on yaw rate, rad/s"),
    "servo.land_eps": (0.0, "absolute landing error-norm threshold (0 = use land_eps_frac)"),
    "servo.land_eps_frac": (0.05, "landing threshold as a fraction of the initial error norm"),
    "servo.land_hold": (15, "consecutive frames below threshold before landing"),
    "servo.mounting": ("y x -z", "camera axes in body coordinates: images of cam x, y, z"),
    "servo.depth_noise_sigma": (0.0, "Gaussian noise added to the depth measurement, m"),
    # camera
    "cam.width": (640, "image width, px"),
    "cam.height": (368, "image height, px"),
    "cam.fx": (400.0, "focal length x, px"),
    "cam.fy": (400.0, "focal length y, px"),
    "cam.cx": (-1.0, "principal point x, px (-1 = image center)"),
    "cam.cy": (-1.0, "principal point y, px (-1 = image center)"),
    # helipad geometry (meters) and paint levels
    "pad.outer_r": (0.5, "outer radius of the circle ring"),
    "pad.inner_r": (0.36, "inner radius of the circle ring"),
    "pad.bar_width": (0.0792, "width of each vertical H bar"),
    "pad.bar_height": (0.396, "height of the H"),
    "pad.h_width": (0.342, "total width of the H"),
    "pad.crossbar": (0.144, "crossbar thickness"),
    "pad.bg": (90, "ground intensity"),
    "pad.face": (40, "pad face intensity inside the ring"),
    "pad.ink": (230, "ring and H intensity"),
    "pad.x": (0.0, "pad center x at t=0, m"),
    "pad.y": (0.0, "pad center y at t=0, m"),
    "pad.vx": (0.0, "pad drift velocity x, m/s"),
    "pad.vy": (0.0, "pad drift velocity y, m/s"),
    # scenario initial pose and reference pose
    "init.x": (0.5, "initial position x, m"),
    "init.y": (-0.3, "initial position y, m"),
    "init.z": (3.0, "initial altitude, m"),
    "init.yaw": (0.7, "initial yaw, rad"),
    "ref.z": (1.6, "reference capture altitude, m"),
    "ref.yaw": (0.0, "reference yaw, rad"),
    # simulator
    "sim.dt": (0.0333, "step length, s"),
    "sim.max_steps": (600, "step budget before timeout"),
    "sim.noise_sigma": (0.0, "additive pixel noise level"),
    "sim.seed": (0, "RNG seed for noise"),
    "sim.diverge_frames": (30, "consecutive pad-out-of-frame frames before divergence"),
    "sim.min_alt": (0.12, "altitude floor below which the run aborts as diverged"),
}


class RunConfig:
    """Merged view of defaults, an optional file, and --set overrides."""

    def __init__(self, values: dict | None = None):
        self._values = {k: v for k, (v, _) in DEFAULTS.items()}
        if values:
            for k, v in values.items():
                self.set(k, v)

    def set(self, key: str, value):
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key: {key!r}")
        default = DEFAULTS[key][0]
        try:
            if isinstance(default, bool):
                coerced = _parse_bool(value)
            elif isinstance(default, int):
                coerced = int(value)
            elif isinstance(default, float):
                coerced = float(value)
            else:
                coerced = str(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc
        self._values[key] = coerced

    def get(self, key: str):
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key: {key!r}")
        return self._values[key]

    def __getitem__(self, key: str):
        return self.get(key)

    def as_dict(self) -> dict:
        return dict(self._values)


def _parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


def parse_config_text(text: str) -> dict:
    """Parse `key = value` lines; '#' starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config(path: str | None = None, overrides: list[str] | None = None) -> RunConfig:
    """Build a RunConfig from an optional file plus `key=value` override strings."""
    cfg = RunConfig()
    if path is not None:
        with open(path, "r", encoding="ascii") as fh:
            for key, value in parse_config_text(fh.read()).items():
                cfg.set(key, value)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        cfg.set(key.strip(), value.strip())
    return cfg


def config_help_text() -> str:
    lines = ["config keys (key = default): "]
    for key, (default, help_) in DEFAULTS.items():
        lines.append(f"  {key} = {default}  ({help_})")
    return "\n".join(lines)
