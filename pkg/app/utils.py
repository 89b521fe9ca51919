import json
import logging
import math
from dataclasses import asdict, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import pandas as pd

from app.kleinian.sphere import ComponentChart

logger = logging.getLogger(__name__)

PALETTE = np.array(
    [
        (31, 119, 180),
        (255, 127, 14),
        (44, 160, 44),
        (214, 39, 40),
        (148, 103, 189),
        (140, 86, 75),
        (227, 119, 194),
        (188, 189, 34),
        (23, 190, 207),
    ],
    dtype=np.uint8,
)
MARKED = (0, 0, 0)

SLICE_COLORS = {
    "V": (40, 90, 220),
    "C_only": (60, 170, 80),
    "outside": (255, 255, 255),
    "uncertain": (150, 150, 150),
}


def convert_numpy(obj):
    """Convert numpy scalars/arrays, enums and dataclasses to JSON serializable values"""
    if hasattr(obj, "to_dict"):
        return convert_numpy(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): convert_numpy(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [convert_numpy(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return convert_numpy(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, Path):
        return str(obj)
    if is_dataclass(obj):
        return convert_numpy(asdict(obj))
    return obj


def write_json_report(path: Path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(convert_numpy(payload), sort_keys=True, indent=2) + "\n")
    logger.info(f"Wrote {path}")
    return path


def write_points_csv(path: Path, points: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(np.asarray(points, dtype=float).reshape(-1, 3), columns=["x", "y", "z"])
    df.to_csv(path, index=False, float_format="%.9g")
    logger.info(f"Wrote {len(df)} points to {path}")
    return path


def write_table_csv(path: Path, rows: Iterable[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(list(rows)).to_csv(path, index=False, float_format="%.9g")
    logger.info(f"Wrote {path}")
    return path


def write_ppm(path: Path, image: np.ndarray) -> Path:
    """Binary P6 image from an (h, w, 3) uint8 array."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    image = np.ascontiguousarray(image, dtype=np.uint8)
    h, w, _ = image.shape
    path.write_bytes(f"P6\n{w} {h}\n255\n".encode("ascii") + image.tobytes())
    logger.info(f"Wrote {w}x{h} image to {path}")
    return path


def view_rotation(elevation: float, azimuth: float) -> np.ndarray:
    """Rotation taking the viewing direction (given in degrees) to +z."""
    el, az = math.radians(elevation), math.radians(azimuth)
    rz = np.array([[math.cos(az), math.sin(az), 0.0], [-math.sin(az), math.cos(az), 0.0], [0.0, 0.0, 1.0]])
    tilt = math.pi / 2 - el
    ry = np.array([[math.cos(tilt), 0.0, -math.sin(tilt)], [0.0, 1.0, 0.0], [math.sin(tilt), 0.0, math.cos(tilt)]])
    return ry @ rz


def render_points(points: np.ndarray, size: int = 512, elevation: float = 90.0, azimuth: float = 0.0) -> np.ndarray:
    """Orthographic view of sphere points; the far hemisphere is drawn lighter."""
    image = np.full((size, size, 3), 255, dtype=np.uint8)
    yy, xx = np.mgrid[0:size, 0:size]
    disk = (2 * (xx + 0.5) / size - 1) ** 2 + (2 * (yy + 0.5) / size - 1) ** 2 <= 1.0
    image[disk] = (235, 235, 245)
    if len(points) == 0:
        return image

    p = np.asarray(points, dtype=float) @ view_rotation(elevation, azimuth).T
    cols = np.clip(((p[:, 0] + 1) / 2 * size).astype(int), 0, size - 1)
    rows = np.clip(((1 - p[:, 1]) / 2 * size).astype(int), 0, size - 1)
    back = p[:, 2] < 0
    image[rows[back], cols[back]] = (170, 170, 200)
    image[rows[~back], cols[~back]] = (20, 20, 60)
    return image


def render_chart(chart: ComponentChart, width: int = 512) -> np.ndarray:
    """Equirectangular image of a chart: marked cells black, components by palette."""
    height = width // 2
    lon = -math.pi + (np.arange(width) + 0.5) * (2 * math.pi / width)
    lat = math.pi / 2 - (np.arange(height) + 0.5) * (math.pi / height)
    lo, la = np.meshgrid(lon, lat)
    vecs = np.stack([np.cos(la) * np.cos(lo), np.cos(la) * np.sin(lo), np.sin(la)], axis=-1).reshape(-1, 3)
    labels = chart.label_of(vecs)

    image = np.empty((len(labels), 3), dtype=np.uint8)
    image[:] = MARKED
    free = labels >= 0
    image[free] = PALETTE[labels[free] % len(PALETTE)]
    return image.reshape(height, width, 3)


def render_slice(states: np.ndarray) -> np.ndarray:
    image = np.empty(states.shape + (3,), dtype=np.uint8)
    for state, color in SLICE_COLORS.items():
        image[states == state] = color
    return image


def write_points_html(path: Path, points: np.ndarray, title: Optional[str] = None) -> Path:
    """Interactive 3D scatter of sphere points."""
    import plotly.graph_objects as go

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    fig = go.Figure(
        data=[go.Scatter3d(x=p[:, 0], y=p[:, 1], z=p[:, 2], mode="markers", marker=dict(size=1.5, color="#14143c"))]
    )
    fig.update_layout(title=title, scene=dict(aspectmode="data"), margin=dict(l=0, r=0, t=40, b=0))
    fig.write_html(str(path), include_plotlyjs="cdn")
    logger.info(f"Wrote {path}")
    return path
