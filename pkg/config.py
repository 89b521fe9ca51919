# config/settings.py
import os
from dotenv import load_dotenv

load_dotenv()


def _float(name: str, default: float) -> float:
    return float(os.getenv(name, default))


def _int(name: str, default: int) -> int:
    return int(os.getenv(name, default))


class Settings:
    LOG_LEVEL = os.getenv("KLEINVIS_LOG_LEVEL", "INFO")

    # sphere raster
    RESOLUTION = _int("KLEINVIS_RESOLUTION", 32)
    MIN_RESOLUTION = 2
    DILATION_CELLS = _float("KLEINVIS_DILATION_CELLS", 1.5)  # in cell diagonals

    # word enumeration
    DEPTH = _int("KLEINVIS_DEPTH", 3)
    LIMIT_DEPTH = _int("KLEINVIS_LIMIT_DEPTH", 6)
    ENUMERATION_CAP = _int("KLEINVIS_ENUMERATION_CAP", 250_000)
    LIMIT_POINT_CAP = _int("KLEINVIS_LIMIT_POINT_CAP", 200_000)
    MATRIX_DEDUP_TOL = _float("KLEINVIS_MATRIX_DEDUP_TOL", 1e-8)
    ANGULAR_DEDUP_TOL = _float("KLEINVIS_ANGULAR_DEDUP_TOL", 1e-6)

    # hull predicates
    TAU = _float("KLEINVIS_TAU", 0.02)
    EMPTY_TOLERANCE = _float("KLEINVIS_EMPTY_TOLERANCE", 0.1)
    PROBE_RADIUS = _float("KLEINVIS_PROBE_RADIUS", 0.5)
    SAMPLE_RADIUS = _float("KLEINVIS_SAMPLE_RADIUS", 0.6)
    MAX_ATTEMPTS_FACTOR = _int("KLEINVIS_MAX_ATTEMPTS_FACTOR", 60)
    HALF_LEVEL_TOL = _float("KLEINVIS_HALF_LEVEL_TOL", 1e-3)
    CONTAINMENT_SLACK = _int("KLEINVIS_CONTAINMENT_SLACK", 2)
    IMAGE_WINNER_FRACTION = 0.95
    IMAGE_STRAY_FRACTION = _float("KLEINVIS_IMAGE_STRAY_FRACTION", 0.05)

    # harmonic measure
    QUADRATURE_CUTOFF = 1e-6
    RAY_SAMPLES = _int("KLEINVIS_RAY_SAMPLES", 100_000)
    RAY_CHUNK = _int("KLEINVIS_RAY_CHUNK", 8192)  # even, so chunks align with generator blocks

    # ping-pong certificates
    CERTIFICATE_DEPTH = _int("KLEINVIS_CERTIFICATE_DEPTH", 2)
    CERTIFICATE_BOUNDARY_SAMPLES = _int("KLEINVIS_CERTIFICATE_BOUNDARY_SAMPLES", 64)

    # stochastic commands refuse to run without a seed unless one is configured here
    SEED = int(os.environ["KLEINVIS_SEED"]) if os.getenv("KLEINVIS_SEED") else None

    # embedding checks map a thinned limit sample
    EMBEDDING_IMAGE_SAMPLES = _int("KLEINVIS_EMBEDDING_IMAGE_SAMPLES", 4096)


settings = Settings()
