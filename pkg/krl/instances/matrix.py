import numpy as np

from ..cones import ConeSpec, DEFAULT_TOLERANCE
from ..errors import ConfigError, NegativeEntry
from ..operators import MonotoneOperator


def build_matrix_operator(A, tolerance: float = DEFAULT_TOLERANCE, label: str = "matrix") -> MonotoneOperator:
    """The linear instance x -> A x on the nonnegative orthant."""
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise ConfigError(f"matrix must be square and nonempty, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ConfigError("matrix has non-finite entries")
    if np.any(A < 0):
        i, j = np.argwhere(A < 0)[0]
        raise NegativeEntry(f"matrix entry ({i}, {j}) = {A[i, j]} is negative", row=int(i), col=int(j))
    A.setflags(write=False)
    n = A.shape[0]
    return MonotoneOperator(lambda x: A @ x, n, ConeSpec.orthant(n, tolerance), label,
                            eigenvalue_power=1.0, default_u=np.ones(n), spec=A)


def load_matrix(path: str) -> np.ndarray:
    """Whitespace/comma separated rows."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read().replace(",", " ")
        rows = [line.split() for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
        return np.array([[float(v) for v in row] for row in rows])
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read matrix file {path}: {e}")
