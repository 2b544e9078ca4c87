import numpy as np
import pytest

from copa import EmbeddingSet, Rng, SynthSpec, generate_synthetic


def gaussian_matrix(rng: Rng, rows: int, cols: int) -> np.ndarray:
    return np.array(rng.normals(rows * cols), dtype=np.float64).reshape(rows, cols)


def random_labels(rng: Rng, n_classes: int, max_per_class: int = 5) -> np.ndarray:
    counts = [rng.randrange(1, max_per_class) for _ in range(n_classes)]
    return np.repeat(np.arange(n_classes), counts)


def central_difference(f, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central finite-difference gradient of scalar f at x, elementwise."""
    grad = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + h
        f_plus = f(x)
        x[idx] = orig - h
        f_minus = f(x)
        x[idx] = orig
        grad[idx] = (f_plus - f_minus) / (2.0 * h)
        it.iternext()
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    diff = np.linalg.norm(analytic - numeric)
    return diff / max(np.linalg.norm(numeric), 1e-12)


@pytest.fixture(scope="session")
def small_set() -> EmbeddingSet:
    """16-dim 5-class synthetic set used across test modules."""
    return generate_synthetic(
        SynthSpec(dim=16, n_classes=5, samples_per_class=50,
                  cluster_spread=0.3, cone_offset=0.5, seed=7)
    )


@pytest.fixture(scope="session")
def reference_set() -> EmbeddingSet:
    """The reference benchmark set: 64-dim, 20 classes, 60 per class."""
    return generate_synthetic(
        SynthSpec(dim=64, n_classes=20, samples_per_class=60,
                  cluster_spread=0.3, cone_offset=0.5, seed=42)
    )
