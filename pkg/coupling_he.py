#!/usr/bin/env python3
"""
Hierarchical-expectation couplings between feedback systems
A coupling (W, W') with W = E[W' | W] is stored as the conditional
probability matrix beta[j][k] = P(W' = z'_k | W = z_j) plus the marginal of W.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from core_types import (
    BarycenterViolation,
    BiasedMeasure,
    DimensionMismatch,
    DiscreteMeasure,
    MarginalMismatch,
    OrdinalScale,
    RngSeed,
    RowNotStochastic,
    make_rng,
    scale_preset,
    validate_scale,
)

logger = logging.getLogger(__name__)

ROW_TOLERANCE = 1e-12
BARYCENTER_TOLERANCE = 1e-9
MARGINAL_TOLERANCE = 1e-9
# linprog solutions are only feasible to solver precision
LP_TOLERANCE = 1e-6


@dataclass(frozen=True)
class CouplingSpec:
    fine_scale: OrdinalScale
    coarse_scale: OrdinalScale
    beta: Tuple[Tuple[float, ...], ...]
    fine_marginal: DiscreteMeasure

    def beta_array(self) -> np.ndarray:
        return np.asarray(self.beta, dtype=np.float64)

    def coarse_mass(self) -> np.ndarray:
        return self.fine_marginal.as_array() @ self.beta_array()

    @property
    def coarse_marginal(self) -> DiscreteMeasure:
        mass = np.clip(self.coarse_mass(), 0.0, None)
        return DiscreteMeasure(self.coarse_scale, tuple(float(p) for p in mass / mass.sum()))

    def conditional_means(self) -> np.ndarray:
        """E[W' | W = z_j] for every fine level j."""
        return self.beta_array() @ self.coarse_scale.as_array()


def check_conditions(beta: np.ndarray,
                     fine_points: np.ndarray,
                     coarse_points: np.ndarray,
                     fine_mass: Optional[np.ndarray] = None,
                     coarse_mass: Optional[np.ndarray] = None,
                     row_tolerance: float = ROW_TOLERANCE,
                     barycenter_tolerance: float = BARYCENTER_TOLERANCE,
                     marginal_tolerance: float = MARGINAL_TOLERANCE) -> None:
    """
    Raise the first violated hierarchical-expectation condition

    Levels may be scalars (shape (m,)) or vectors (shape (m, k)), so the
    same checker validates soft-label couplings onto simplex vertices.

    Args:
        beta: conditional probabilities, shape (m, m')
        fine_points: levels of W
        coarse_points: levels of W'
        fine_mass: marginal of W, needed for the marginal check
        coarse_mass: declared marginal of W'; skipped when None
    """
    beta = np.asarray(beta, dtype=np.float64)
    fine_points = np.asarray(fine_points, dtype=np.float64)
    coarse_points = np.asarray(coarse_points, dtype=np.float64)

    if beta.ndim != 2 or beta.shape != (fine_points.shape[0], coarse_points.shape[0]):
        raise DimensionMismatch(
            f"beta shape {beta.shape} does not match "
            f"{fine_points.shape[0]} fine and {coarse_points.shape[0]} coarse levels")

    if np.any(beta < -row_tolerance) or np.any(beta > 1.0 + row_tolerance):
        raise RowNotStochastic("beta entries must lie in [0, 1]")
    row_sums = beta.sum(axis=1)
    bad_rows = np.flatnonzero(np.abs(row_sums - 1.0) > row_tolerance)
    if bad_rows.size:
        j = int(bad_rows[0])
        raise RowNotStochastic(f"row {j} sums to {row_sums[j]!r}")

    means = beta @ coarse_points
    gaps = np.abs(means - fine_points)
    if gaps.ndim > 1:
        gaps = gaps.max(axis=1)
    bad_levels = np.flatnonzero(gaps > barycenter_tolerance)
    if bad_levels.size:
        j = int(bad_levels[0])
        raise BarycenterViolation(
            f"row {j}: conditional mean {means[j]!r} != fine level {fine_points[j]!r}")

    if fine_mass is not None and coarse_mass is not None:
        implied = np.asarray(fine_mass, dtype=np.float64) @ beta
        gap = np.abs(implied - np.asarray(coarse_mass, dtype=np.float64))
        if np.any(gap > marginal_tolerance):
            k = int(np.argmax(gap))
            raise MarginalMismatch(
                f"coarse level {k}: implied mass {implied[k]!r} != declared {coarse_mass[k]!r}")


def build_coupling(fine_marginal: DiscreteMeasure,
                   coarse_scale: OrdinalScale,
                   beta: Sequence[Sequence[float]],
                   coarse_marginal: Optional[DiscreteMeasure] = None) -> CouplingSpec:
    """
    Validate beta as a hierarchical-expectation coupling

    Args:
        fine_marginal: distribution of the finer variable W
        coarse_scale: levels of W'
        beta: conditional probability rows, |fine| x |coarse|
        coarse_marginal: declared distribution of W'; when given, it must
            equal fine_marginal @ beta

    Returns:
        CouplingSpec
    """
    beta_array = np.asarray(beta, dtype=np.float64)
    coarse_mass = None
    if coarse_marginal is not None:
        if coarse_marginal.scale.levels != coarse_scale.levels:
            raise DimensionMismatch("coarse marginal is on a different scale")
        coarse_mass = coarse_marginal.as_array()

    check_conditions(
        beta_array,
        fine_marginal.scale.as_array(),
        coarse_scale.as_array(),
        fine_mass=fine_marginal.as_array(),
        coarse_mass=coarse_mass,
    )
    return CouplingSpec(
        fine_scale=fine_marginal.scale,
        coarse_scale=coarse_scale,
        beta=tuple(tuple(float(b) for b in row) for row in beta_array),
        fine_marginal=fine_marginal,
    )


def to_binary_coupling(fine: DiscreteMeasure) -> CouplingSpec:
    """Couple any measure with binary feedback: beta[j] = (1 - z_j, z_j)."""
    binary = scale_preset("binary")
    beta = [(1.0 - z, z) for z in fine.scale.levels]
    return build_coupling(fine, binary, beta)


def oracle_coupling(oracle: float, coarse: DiscreteMeasure) -> CouplingSpec:
    """Couple the deterministic oracle label with an unbiased measure."""
    mean = coarse.mean()
    if abs(mean - oracle) > BARYCENTER_TOLERANCE:
        raise BiasedMeasure(f"coarse mean {mean!r} differs from oracle {oracle!r}")
    singleton = validate_scale([oracle], name="oracle", allow_singleton=True)
    fine = DiscreteMeasure(singleton, (1.0,))
    return build_coupling(fine, coarse.scale, [coarse.mass], coarse_marginal=coarse)


def sample_joint(coupling: CouplingSpec, n: int, seed: RngSeed) -> List[Tuple[float, float]]:
    """Draw (w, w') pairs: W from the fine marginal, then W' | W from beta."""
    if n <= 0:
        return []
    rng = make_rng(seed)
    fine_cdf = np.cumsum(coupling.fine_marginal.as_array())
    row_cdf = np.cumsum(coupling.beta_array(), axis=1)

    u = rng.random(n)
    v = rng.random(n)
    fine_idx = np.minimum(np.searchsorted(fine_cdf, u, side="right"), fine_cdf.size - 1)
    coarse_idx = (v[:, None] >= row_cdf[fine_idx]).sum(axis=1)
    coarse_idx = np.minimum(coarse_idx, row_cdf.shape[1] - 1)

    fine_levels = coupling.fine_scale.as_array()
    coarse_levels = coupling.coarse_scale.as_array()
    return list(zip(fine_levels[fine_idx].tolist(), coarse_levels[coarse_idx].tolist()))


def find_coupling(fine_marginal: DiscreteMeasure,
                  coarse_marginal: DiscreteMeasure) -> Optional[CouplingSpec]:
    """
    Search for a hierarchical-expectation coupling as a linear program.

    Returns None when the program is infeasible. Solutions are feasible to
    LP_TOLERANCE, so the returned coupling is approximate.
    """
    fine_levels = fine_marginal.scale.as_array()
    coarse_levels = coarse_marginal.scale.as_array()
    mu = fine_marginal.as_array()
    nu = coarse_marginal.as_array()
    m, mc = fine_levels.size, coarse_levels.size

    rows = []
    rhs = []
    for j in range(m):
        stochastic = np.zeros((m, mc))
        stochastic[j, :] = 1.0
        rows.append(stochastic.ravel())
        rhs.append(1.0)

        barycenter = np.zeros((m, mc))
        barycenter[j, :] = coarse_levels
        rows.append(barycenter.ravel())
        rhs.append(fine_levels[j])
    for k in range(mc):
        marginal = np.zeros((m, mc))
        marginal[:, k] = mu
        rows.append(marginal.ravel())
        rhs.append(nu[k])

    result = optimize.linprog(
        c=np.zeros(m * mc),
        A_eq=np.vstack(rows),
        b_eq=np.asarray(rhs),
        bounds=[(0.0, 1.0)] * (m * mc),
        method="highs",
    )
    if not result.success:
        logger.info("No hierarchical-expectation coupling: %s", result.message)
        return None

    beta = np.clip(result.x.reshape(m, mc), 0.0, 1.0)
    beta = beta / beta.sum(axis=1, keepdims=True)
    check_conditions(beta, fine_levels, coarse_levels, mu, nu,
                     row_tolerance=ROW_TOLERANCE,
                     barycenter_tolerance=LP_TOLERANCE,
                     marginal_tolerance=LP_TOLERANCE)
    return CouplingSpec(
        fine_scale=fine_marginal.scale,
        coarse_scale=coarse_marginal.scale,
        beta=tuple(tuple(float(b) for b in row) for row in beta),
        fine_marginal=fine_marginal,
    )
