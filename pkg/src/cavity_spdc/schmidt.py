"""Schmidt decomposition of a sampled JSA and the purity / g2 bridge."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DomainError, NumericalFailure
from .spectral import JSAGrid

#: singular weights below this fraction of the largest are dropped
TRUNCATION_THRESHOLD = 1e-12
#: dropped weight must stay below this fraction of the total
MAX_TRUNCATION_RESIDUAL = 1e-9


@dataclass(frozen=True)
class SchmidtResult:
    lambdas: np.ndarray  # descending, sums to 1
    rank: int
    residual: float
    signal_modes: np.ndarray | None = None  # shape (n_signal, m), unit norm on the grid
    idler_modes: np.ndarray | None = None  # shape (n_idler, m)

    @property
    def K(self) -> float:
        return schmidt_number(self)

    @property
    def P(self) -> float:
        return purity(self)


def schmidt_number(result: SchmidtResult) -> float:
    return 1.0 / purity(result)


def purity(result: SchmidtResult) -> float:
    return float(np.sum(result.lambdas**2))


def _singular_values(matrix: np.ndarray, with_vectors: bool):
    last = None
    for driver in ("gesdd", "gesvd"):
        try:
            return scipy.linalg.svd(
                matrix,
                full_matrices=False,
                compute_uv=with_vectors,
                lapack_driver=driver,
                check_finite=False,
            )
        except (np.linalg.LinAlgError, ValueError) as exc:
            last = exc
    raise NumericalFailure(f"SVD did not converge: {last}")


def schmidt_decompose(jsa: JSAGrid, n_modes: int = 0) -> SchmidtResult:
    """Singular-value decomposition of the JSA weighted by the grid cell.

    With ``n_modes > 0`` the leading Schmidt mode functions are returned,
    normalised so that sum |u|^2 * d_omega = 1 on each axis.
    """
    if not jsa.normalized:
        raise ValueError("schmidt_decompose expects a normalised JSA")
    amp = jsa.amplitude
    if not np.all(np.isfinite(amp)):
        raise NumericalFailure("JSA contains non-finite entries")
    matrix = amp * np.sqrt(jsa.grid.cell)
    if n_modes > 0:
        u, s, vh = _singular_values(matrix, True)
    else:
        s = _singular_values(matrix, False)
    weights = s.astype(float) ** 2
    total = float(np.sum(weights))
    if not total > 0:
        raise NumericalFailure("JSA has zero norm")
    order = np.argsort(-weights, kind="stable")
    weights = weights[order]
    keep = weights > TRUNCATION_THRESHOLD * weights[0]
    kept = weights[keep]
    residual = 1.0 - float(np.sum(kept)) / total
    residual = max(residual, 0.0)
    if residual >= MAX_TRUNCATION_RESIDUAL:
        raise NumericalFailure(f"truncation discards {residual:.3e} of the weight")
    lambdas = kept / np.sum(kept)
    signal_modes = idler_modes = None
    if n_modes > 0:
        m = min(n_modes, lambdas.size)
        idx = order[:m]
        signal_modes = u[:, idx] / np.sqrt(jsa.grid.signal_step)
        idler_modes = vh[idx, :].T / np.sqrt(jsa.grid.idler_step)
    return SchmidtResult(lambdas, int(lambdas.size), residual, signal_modes, idler_modes)


def g2_unheralded_from_K(K: float) -> float:
    if not K >= 1.0:
        raise DomainError(f"Schmidt number must be >= 1, got {K}")
    return 1.0 + 1.0 / K


def K_from_g2(g2: float) -> float:
    if not 1.0 < g2 <= 2.0:
        raise DomainError(f"unheralded g2 must lie in (1, 2], got {g2}")
    return 1.0 / (g2 - 1.0)


def purity_from_g2(g2: float) -> float:
    return 1.0 / K_from_g2(g2)
