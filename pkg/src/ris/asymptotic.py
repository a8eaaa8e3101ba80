"""Peripheral spectra, limit projections, and asymptotic states.

"Unique asymptotic state" is operationalized as: eigenvalue 1 of the
reduced map is simple and no other eigenvalue is peripheral within
tolerance; the corresponding eigenprojection then has range C*I and
encodes the state through the trace pairing.  Non-normal eigenprojections
are built from right/left eigenvector pairs; the conditioning of the
pairing is reported.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    NoAsymptoticStateError,
    RISModel,
    interaction_dynamics,
    reduced_map_T,
    restrict_to_system,
)
from .linops import Superoperator, matrix_exp, superop_norm
from .vanhove import (
    EffectiveGenerator,
    effective_generator_fast_repetition,
    effective_generator_weak_coupling,
    second_order_term,
    system_free_evolution,
)


class JordanDefectError(ValueError):
    """The relevant eigenvalue is not semisimple within tolerance."""


def peripheral_spectrum(t_map: Superoperator, tol: float = 1e-9) -> list[complex]:
    """Eigenvalues of modulus >= 1 - tol, sorted by decreasing modulus."""
    eigs = np.linalg.eigvals(t_map.matrix)
    periph = [complex(e) for e in eigs if abs(e) >= 1.0 - tol]
    periph.sort(key=lambda e: (-abs(e), np.angle(e)))
    return periph


def _eigenprojection_near(m: np.ndarray, point: complex, radius: float):
    """Spectral projection of the eigenvalue cluster within ``radius`` of ``point``.

    Right/left eigenvector pairing (non-normal mode); raises
    JordanDefectError when the cluster eigenvalue is not semisimple: the
    projection fails idempotency, or the restriction of m to the range of
    the projection carries a nilpotent part.  Returns (projection,
    pairing condition number).
    """
    eigs, vr = np.linalg.eig(m)
    idx = np.nonzero(np.abs(eigs - point) <= radius)[0]
    if idx.size == 0:
        raise ValueError(f"no eigenvalue within {radius:.1e} of {point}")
    vl = np.linalg.inv(vr)
    p = vr[:, idx] @ vl[idx, :]
    scale = max(1.0, float(np.linalg.norm(m, 2)))
    idem = float(np.linalg.norm(p @ p - p, 2))
    nilpotent = float(np.linalg.norm((m - point * np.eye(m.shape[0])) @ p, 2))
    if idem > 1e-8 or nilpotent > max(1e-8, 100.0 * radius) * scale:
        raise JordanDefectError(
            f"eigenvalue cluster at {point} is defective within {radius:.1e} "
            f"(idempotency defect {idem:.3e}, nilpotent part {nilpotent:.3e})")
    return p, float(np.linalg.cond(vr))


@dataclass(frozen=True)
class LimitProjection:
    projection: Superoperator
    converged: bool
    subdominant_modulus: float
    pairing_condition: float
    power_errors: tuple


def limit_projection(t_map: Superoperator, tol: float = 1e-7,
                     max_power: int = 2 ** 30,
                     cluster_radius: float = 1e-9) -> LimitProjection:
    """Eigenprojection of eigenvalue 1, with a power-convergence flag.

    The flag is true iff every other eigenvalue has modulus < 1 - tol and
    ||T^(2^j) - P|| decreases monotonically (once below one) up to
    j = log2(max_power).  On failure the projection is still returned
    with the flag false.
    """
    m = t_map.matrix
    p, cond = _eigenprojection_near(m, 1.0 + 0.0j, cluster_radius)
    eigs = np.linalg.eigvals(m)
    others = eigs[np.abs(eigs - 1.0) > cluster_radius]
    sub = float(np.abs(others).max()) if others.size else 0.0
    spectral_ok = sub < 1.0 - tol

    errors = []
    power = m.copy()
    j_max = max(1, int(math.log2(max_power)))
    for _ in range(j_max):
        errors.append(float(np.linalg.norm(power - p, 2)))
        # below ~1e-10 repeated squaring only accumulates roundoff
        if errors[-1] < 1e-10:
            break
        power = power @ power
    started = False
    monotone = True
    for prev, cur in zip(errors, errors[1:]):
        if not started and prev < 1.0:
            started = True
        if started and cur > prev + 1e-12 and cur > 1e-10:
            monotone = False
    return LimitProjection(Superoperator(p), spectral_ok and monotone,
                           sub, cond, tuple(errors))


@dataclass(frozen=True)
class AsymptoticReport:
    peripheral_eigenvalues: tuple
    limit_projection: Superoperator
    is_rank_one: bool
    asymptotic_density: np.ndarray
    period_samples: tuple


def _density_from_dual_fixed_point(t_map: Superoperator) -> np.ndarray:
    """Trace-one PSD fixed point of the Schroedinger-picture dual of t_map."""
    dual = t_map.trace_dual().matrix
    eigs, vecs = np.linalg.eig(dual)
    i = int(np.argmin(np.abs(eigs - 1.0)))
    rho = vecs[:, i].reshape(t_map.dim, t_map.dim)
    rho = rho / np.trace(rho)
    rho = 0.5 * (rho + rho.conj().T)
    low = float(np.linalg.eigvalsh(rho).min())
    if low < -1e-10:
        raise NoAsymptoticStateError(f"dual fixed point is not PSD (min eigenvalue {low:.3e})")
    return rho


def _apply_dual(map_on_system: Superoperator, rho: np.ndarray) -> np.ndarray:
    out = map_on_system.trace_dual().apply(rho)
    return 0.5 * (out + out.conj().T)


def asymptotic_periodic_state(model: RISModel, lam: float, tau: float,
                              t_samples=()) -> AsymptoticReport:
    """The periodic family of states the repeated interactions relax to.

    The density at the period start is the unique trace-one PSD fixed
    point of the dual of T(lambda, tau); the sample at t in [0, tau) is
    it propagated through the partial-interval map.  Raises
    NoAsymptoticStateError when eigenvalue 1 is not simple-and-dominant.
    """
    t_map = reduced_map_T(model, lam, tau)
    periph = peripheral_spectrum(t_map, tol=1e-9)
    lp = limit_projection(t_map)
    if len(periph) != 1 or not lp.converged:
        raise NoAsymptoticStateError(
            f"no unique asymptotic state: peripheral spectrum {periph}, "
            f"power convergence {lp.converged}")
    rho0 = _density_from_dual_fixed_point(t_map)
    trace_of_p = float(np.trace(lp.projection.matrix).real)
    is_rank_one = abs(trace_of_p - 1.0) < 1e-8

    samples = []
    for t in t_samples:
        if not 0 <= t < tau:
            raise ValueError(f"sample time {t} outside [0, tau)")
        partial = restrict_to_system(model, interaction_dynamics(model, lam, t))
        rho_t = _apply_dual(partial, rho0)
        # one extra full period must reproduce the same sample
        rho_t_shifted = _apply_dual(partial, _apply_dual(t_map, rho0))
        drift = float(np.abs(rho_t - rho_t_shifted).max())
        if drift > 1e-9:
            raise NoAsymptoticStateError(f"period drift {drift:.3e} at t={t}")
        samples.append((float(t), rho_t))
    return AsymptoticReport(tuple(periph), lp.projection, is_rank_one, rho0, tuple(samples))


@dataclass(frozen=True)
class EffectiveStateResult:
    density: np.ndarray | None
    rank_one: bool
    spectral_gap: float
    horizon_defect: float | None = None


def effective_asymptotic_state(gen: EffectiveGenerator | Superoperator,
                               tol: float = 1e-9,
                               horizon: float | None = None) -> EffectiveStateResult:
    """Limit of exp(s*gen) as s -> infinity, via eigenanalysis.

    Rank-one flag: 0 is a simple eigenvalue and every other eigenvalue
    has real part < -tol.  When true, the density is the normalized fixed
    functional; ``horizon`` optionally reports ||exp(horizon*gen) - P||.
    """
    g = gen.generator if isinstance(gen, EffectiveGenerator) else gen
    eigs = np.linalg.eigvals(g.matrix)
    near_zero = np.abs(eigs) <= tol
    n_zero = int(near_zero.sum())
    others = eigs[~near_zero]
    gap = float(-others.real.max()) if others.size else 0.0
    rank_one = n_zero == 1 and (others.size == 0 or others.real.max() < -tol)
    if not rank_one:
        if n_zero > 1:
            # distinguish a semisimple multiple zero from a defective one
            try:
                _eigenprojection_near(g.matrix, 0.0 + 0.0j, tol)
            except JordanDefectError:
                raise
        return EffectiveStateResult(None, False, gap)
    rho = _density_from_dual_fixed_point(Superoperator(g.matrix + np.eye(g.matrix.shape[0])))
    defect = None
    if horizon is not None:
        n = g.dim
        p_inf = np.outer(np.eye(n, dtype=complex).reshape(-1), rho.T.reshape(-1))
        defect = superop_norm(matrix_exp(horizon * g.matrix) - p_inf)
    return EffectiveStateResult(rho, True, gap, defect)


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """(1/2) * trace norm of the difference of two Hermitian matrices."""
    return 0.5 * float(np.abs(np.linalg.eigvalsh(rho - sigma)).sum())


@dataclass(frozen=True)
class OrderComparison:
    rows: tuple            # (lambda, trace_distance)
    ratios: tuple          # distance(lambda_i) / distance(lambda_{i+1})
    effective_density: np.ndarray


def compare_orders(model: RISModel, tau: float, lambdas,
                   branch_cut_angle: float | None = None) -> OrderComparison:
    """Trace distance between exact periodic states and the effective one.

    The exact state at the period start is compared, for each lambda,
    with the asymptotic state of the weak-coupling effective dynamics;
    ratios across consecutive lambdas are reported (quadratic order means
    a ratio near 4 when lambda halves).
    """
    eff = effective_asymptotic_state(effective_generator_weak_coupling(
        model, tau, branch_cut_angle))
    if not eff.rank_one:
        raise NoAsymptoticStateError("effective dynamics has no rank-one limit")
    rows = []
    for lam in lambdas:
        report = asymptotic_periodic_state(model, lam, tau)
        rows.append((float(lam), trace_distance(report.asymptotic_density, eff.density)))
    ratios = tuple(d1 / d2 if d2 > 0 else math.inf
                   for (_, d1), (_, d2) in zip(rows, rows[1:]))
    return OrderComparison(tuple(rows), ratios, eff.density)


@dataclass(frozen=True)
class KatoReport:
    """Perturbation structure of T(eps) = alpha_S^tau + eps*T'(0) + O(eps^2) at eps=0+.

    Checks, with P(0) the eigenprojection of 1 of alpha_S^tau, Q the
    eigenprojection of 0 of P(0) T'(0) P(0), and P(0+) the Richardson
    extrapolation of the eigenprojections P(eps) of 1 of T(eps):
    [Q, P(0)] = 0, P(0)Q idempotent, P(0+) a sub-projection of P(0)Q,
    and ||P(eps) - P(0+)|| = O(eps).
    """
    p0: Superoperator
    t_prime: Superoperator
    q: Superoperator
    p0q: Superoperator
    p_plus: Superoperator
    commutator_norm: float
    idempotency_defect: float
    subprojection_defect: float
    trace_p_plus: float
    distance_rows: tuple          # (eps, ||P(eps) - P(0+)||)
    distance_ratios: tuple
    extrapolation_stable: bool
    raw_differences: tuple


def kato_structure_check(model: RISModel, tau: float, eps_list) -> KatoReport:
    """Verify the analytic-perturbation structure of the reduced map at small coupling."""
    eps_list = sorted(float(e) for e in eps_list)
    if not eps_list or eps_list[0] <= 0:
        raise ValueError("eps_list must be positive")
    eps_desc = eps_list[::-1]

    alpha = system_free_evolution(model, tau)
    p0, _ = _eigenprojection_near(alpha.matrix, 1.0 + 0.0j, 1e-8)
    t_prime = -(second_order_term(model, tau) @ alpha).matrix
    g = p0 @ t_prime @ p0
    scale = max(float(np.abs(np.linalg.eigvals(g)).max()), 1e-30)
    q, _ = _eigenprojection_near(g, 0.0 + 0.0j, 1e-9 * scale)

    p_eps = {}
    for eps in eps_desc:
        t_map = reduced_map_T(model, math.sqrt(eps), tau)
        p_eps[eps], _ = _eigenprojection_near(t_map.matrix, 1.0 + 0.0j, 1e-9)

    # two-point Richardson on the two smallest eps
    e1, e2 = eps_list[1], eps_list[0]
    p_plus = p_eps[e2] + (p_eps[e2] - p_eps[e1]) * (e2 / (e1 - e2))

    p0q = p0 @ q
    comm = superop_norm(p0 @ q - q @ p0)
    idem = superop_norm(p0q @ p0q - p0q)
    sub = max(superop_norm(p0q @ p_plus - p_plus), superop_norm(p_plus @ p0q - p_plus))

    rows = tuple((eps, superop_norm(p_eps[eps] - p_plus)) for eps in eps_desc)
    ratios = tuple(d1 / d2 if d2 > 0 else math.inf
                   for (_, d1), (_, d2) in zip(rows, rows[1:]))
    diffs = tuple(superop_norm(p_eps[a] - p_eps[b]) for a, b in zip(eps_desc, eps_desc[1:]))
    stable = all(a >= b - 1e-12 for a, b in zip(diffs, diffs[1:]))

    return KatoReport(
        p0=Superoperator(p0), t_prime=Superoperator(t_prime), q=Superoperator(q),
        p0q=Superoperator(p0q), p_plus=Superoperator(p_plus),
        commutator_norm=comm, idempotency_defect=idem, subprojection_defect=sub,
        trace_p_plus=float(np.trace(p_plus).real),
        distance_rows=rows, distance_ratios=ratios,
        extrapolation_stable=stable, raw_differences=diffs)


@dataclass(frozen=True)
class ParametrizedRow:
    eps: float
    lam: float
    tau: float
    trace_distance: float


def parametrized_tau_experiment(model: RISModel, n_odd: int, eps_list) -> tuple:
    """Fast-repetition regime along lambda = eps^((1-n)/2), tau = eps^n.

    For each eps, the asymptotic state of T(lambda(eps), tau(eps)) is
    compared (trace distance) to the asymptotic state of the
    fast-repetition effective dynamics.  The result is a tuple of rows;
    the distances are expected to decay quadratically in eps.
    """
    if n_odd < 1 or n_odd % 2 == 0:
        raise ValueError("n_odd must be an odd integer >= 1")
    eff = effective_asymptotic_state(effective_generator_fast_repetition(model))
    if not eff.rank_one:
        raise NoAsymptoticStateError("fast-repetition dynamics has no rank-one limit")
    rows = []
    for eps in eps_list:
        eps = float(eps)
        if eps <= 0:
            raise ValueError("eps must be positive")
        lam = eps ** ((1 - n_odd) / 2.0)
        tau = eps ** n_odd
        if lam > 1e3:
            raise ValueError(f"lambda(eps) = {lam:.3e} exceeds the cost guard")
        report = asymptotic_periodic_state(model, lam, tau)
        rows.append(ParametrizedRow(eps, lam, tau,
                                    trace_distance(report.asymptotic_density, eff.density)))
    return tuple(rows)
