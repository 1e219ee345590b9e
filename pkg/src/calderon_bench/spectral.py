"""Spectral condition numbers of preconditioned systems.

For SPD G and A the product GA is similar to the symmetric matrix L^T G L
with A = L L^T, so kappa_S(GA) = rho(GA) rho((GA)^{-1}) equals the extreme
eigenvalue ratio of that symmetric pencil; no nonsymmetric eigensolver is
needed.  The dense symmetric eigensolver and the SPD factorization are
delegated to LAPACK via numpy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NotSPDError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class Spectrum:
    values: np.ndarray  # ascending
    pencil: str = ""


def spd_factor(S: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L L^T = S; raises NotSPDError otherwise."""
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise NotSPDError("matrix is not symmetric positive definite") from None


def sym_eig(S: np.ndarray, with_vectors: bool = False, pencil: str = ""):
    """Eigenvalues (ascending) of a dense symmetric matrix."""
    if with_vectors:
        w, V = np.linalg.eigh(S)
        return Spectrum(w, pencil), V
    return Spectrum(np.linalg.eigvalsh(S), pencil)


def kappa(G, A: np.ndarray) -> float:
    """Spectral condition number kappa_S(G A) for SPD G and A.

    ``G`` may be a dense matrix or any object with a ``matrix`` attribute
    (a preconditioner).
    """
    Gm = getattr(G, "matrix", G)
    L = spd_factor(A)
    C = L.T @ Gm @ L
    spec = sym_eig(0.5 * (C + C.T), pencil="L^T G L")
    lo, hi = spec.values[0], spec.values[-1]
    if lo <= 0:
        raise NotSPDError("preconditioned pencil is not positive definite")
    return hi / lo
