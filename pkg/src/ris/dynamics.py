"""Repeated-interaction model and its exact dynamics.

The model is the tuple (h_S, h_E, v, beta): a small system, one chain
element, a Hermitian interaction on the tensor product, and the inverse
temperature of the chain.  The full interacting evolution is computed by
exact matrix exponential of the generator i[h_S + h_E + lambda*v, .];
Dyson terms exist only to verify the perturbation series and its error
bound, never to compute the dynamics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .linops import (
    Superoperator,
    commutator_superop,
    derivation_superop,
    kron,
    matrix_exp,
    require_hermitian,
    vec,
)


class NoAsymptoticStateError(ValueError):
    """The dynamics at hand has no unique asymptotic state."""


@dataclass(frozen=True)
class ChainState:
    """Density matrix of one chain element (PSD, trace one)."""
    rho: np.ndarray

    def __post_init__(self):
        rho = require_hermitian(self.rho, name="rho")
        if np.linalg.eigvalsh(rho).min() < -1e-12:
            raise ValueError("chain state is not positive semidefinite")
        if abs(np.trace(rho).real - 1.0) > 1e-12:
            raise ValueError(f"chain state has trace {np.trace(rho)!r}, expected 1")
        object.__setattr__(self, "rho", rho)


def gibbs_state(h: np.ndarray, beta: float) -> ChainState:
    """Thermal state e^{-beta h} / Tr e^{-beta h}.

    The ground energy is subtracted before exponentiating, so large
    beta*||h|| never overflows.
    """
    h = require_hermitian(h, name="h")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    w, u = np.linalg.eigh(h)
    weights = np.exp(-beta * (w - w.min()))
    rho = (u * (weights / weights.sum())) @ u.conj().T
    return ChainState(0.5 * (rho + rho.conj().T))


@dataclass(frozen=True)
class RISModel:
    """A repeated-interaction model: system, chain element, coupling, temperature.

    ``p0``, when present, is a projection in the chain-element algebra
    commuting with h_E; it feeds the first-order-suppression check
    (:func:`check_H1`).  Instances are immutable and safe to share across
    threads.
    """
    h_s: np.ndarray
    h_e: np.ndarray
    v: np.ndarray
    beta: float
    p0: np.ndarray | None = None

    def __post_init__(self):
        h_s = require_hermitian(self.h_s, name="h_s")
        h_e = require_hermitian(self.h_e, name="h_e")
        v = require_hermitian(self.v, name="v")
        if v.shape[0] != h_s.shape[0] * h_e.shape[0]:
            raise ValueError(f"v has dimension {v.shape[0]}, expected "
                             f"{h_s.shape[0]}*{h_e.shape[0]}")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        object.__setattr__(self, "h_s", h_s)
        object.__setattr__(self, "h_e", h_e)
        object.__setattr__(self, "v", v)
        if self.p0 is not None:
            p0 = require_hermitian(self.p0, name="p0")
            if np.abs(p0 @ p0 - p0).max() > 1e-12:
                raise ValueError("p0 is not a projection")
            if np.abs(h_e @ p0 - p0 @ h_e).max() > 1e-12:
                raise ValueError("p0 does not commute with h_e (not invariant "
                                 "under the free chain evolution)")
            object.__setattr__(self, "p0", p0)

    @property
    def n_s(self) -> int:
        return self.h_s.shape[0]

    @property
    def n_e(self) -> int:
        return self.h_e.shape[0]

    @property
    def dim(self) -> int:
        return self.n_s * self.n_e

    @cached_property
    def free_hamiltonian(self) -> np.ndarray:
        return kron(self.h_s, np.eye(self.n_e)) + kron(np.eye(self.n_s), self.h_e)

    @cached_property
    def chain_state(self) -> ChainState:
        return gibbs_state(self.h_e, self.beta)

    @cached_property
    def _embed(self) -> np.ndarray:
        """Matrix of x_S -> x_S (x) I_E on vectorized matrices."""
        ns, ne, n = self.n_s, self.n_e, self.dim
        e = np.zeros((n * n, ns * ns), dtype=complex)
        eye = np.eye(ne)
        for k in range(ns):
            for l in range(ns):
                x = np.zeros((ns, ns), dtype=complex)
                x[k, l] = 1.0
                e[:, k * ns + l] = vec(kron(x, eye))
        return e

    @cached_property
    def _restrict(self) -> np.ndarray:
        """Matrix of x -> Tr_E[(I (x) rho_E) x] on vectorized matrices."""
        ns, ne, n = self.n_s, self.n_e, self.dim
        rho = self.chain_state.rho
        r = np.zeros((ns * ns, n * n), dtype=complex)
        for k in range(n):
            for l in range(n):
                x = np.zeros((n, n), dtype=complex)
                x[k, l] = 1.0
                red = np.einsum("ac,icja->ij", rho, x.reshape(ns, ne, ns, ne))
                r[:, k * n + l] = vec(red)
        return r


def system_free_evolution(model: RISModel, t: float) -> Superoperator:
    """alpha_S^t on the small system, as a superoperator."""
    return matrix_exp(t * derivation_superop(model.h_s))


def conditional_expectation(model: RISModel, state: ChainState | None = None) -> Superoperator:
    """E_S on the full algebra: x -> Tr_E[(I (x) rho_E) x] (x) I_E.

    Sends x_S (x) x_E to Tr(rho_E x_E) * x_S (x) I_E; idempotent, unital,
    completely positive.  Defaults to the model's Gibbs chain state.
    """
    if state is None:
        return Superoperator(model._embed @ model._restrict)
    if state.rho.shape[0] != model.n_e:
        raise ValueError(f"chain state has dimension {state.rho.shape[0]}, "
                         f"expected {model.n_e}")
    restrict = _restrict_matrix(model, state.rho)
    return Superoperator(model._embed @ restrict)


def _restrict_matrix(model: RISModel, rho: np.ndarray) -> np.ndarray:
    ns, n = model.n_s, model.dim
    r = np.zeros((ns * ns, n * n), dtype=complex)
    ne = model.n_e
    for k in range(n):
        for l in range(n):
            x = np.zeros((n, n), dtype=complex)
            x[k, l] = 1.0
            red = np.einsum("ac,icja->ij", rho, x.reshape(ns, ne, ns, ne))
            r[:, k * n + l] = vec(red)
    return r


def restrict_to_system(model: RISModel, s: Superoperator) -> Superoperator:
    """Compress a full-space map to M_S: E_S ∘ s ∘ (embed)."""
    if s.dim != model.dim:
        raise ValueError(f"map acts on dimension {s.dim}, model has {model.dim}")
    return Superoperator(model._restrict @ s.matrix @ model._embed)


def full_generator(model: RISModel, lam: float) -> Superoperator:
    """Generator of the interacting evolution: i[h_S + h_E, .] + i*lambda*[v, .]."""
    free = derivation_superop(model.free_hamiltonian)
    return free + (1j * lam) * commutator_superop(model.v)


def interaction_dynamics(model: RISModel, lam: float, t: float) -> Superoperator:
    """The *-automorphism exp(t * full_generator) of the full matrix algebra."""
    return matrix_exp(t * full_generator(model, lam))


def reduced_map_T(model: RISModel, lam: float, tau: float) -> Superoperator:
    """One interaction period seen by the small system: E_S ∘ phi_SE^tau on M_S.

    Unital and completely positive; even in lambda when the model passes
    :func:`check_H1`.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    return restrict_to_system(model, interaction_dynamics(model, lam, tau))


def restricted_dynamics(model: RISModel, lam: float, tau: float, t: float) -> Superoperator:
    """Repeated-interaction evolution on M_S at time t = n*tau + t1.

    Returns T(lam,tau)^n composed with the partial-interval map
    E_S ∘ phi_SE^{t1}; exactly T^n when t is a multiple of tau.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    if t < 0:
        raise ValueError("t must be nonnegative")
    n = int(math.floor(t / tau))
    t1 = t - n * tau
    # snap floating-point boundaries so t = n*tau lands on an exact power
    if abs(t1 - tau) <= 1e-12 * max(1.0, tau):
        n, t1 = n + 1, 0.0
    elif abs(t1) <= 1e-12 * max(1.0, tau):
        t1 = 0.0
    t_map = reduced_map_T(model, lam, tau).power(n)
    if t1 > 0.0:
        t_map = t_map @ restrict_to_system(model, interaction_dynamics(model, lam, t1))
    return t_map


def dyson_term(model: RISModel, k: int, t: float) -> Superoperator:
    """k-th time-ordered term of the perturbation series around the free flow.

    Equals the iterated integral over 0 <= t_1 <= ... <= t_k <= t of
    alpha^{t_1}[v,.]alpha^{-t_1} ... alpha^{t_k}[v,.]alpha^{-t_k}, computed
    exactly as the top-right block of the exponential of the (k+1)-block
    upper-bidiagonal matrix with the free generator on the diagonal and
    [v,.] on the superdiagonal, post-multiplied by alpha^{-t}.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > 8:
        raise ValueError("k > 8 refused (cost guard)")
    n2 = model.dim ** 2
    l0 = full_generator(model, 0.0).matrix
    cv = commutator_superop(model.v).matrix
    block = np.zeros(((k + 1) * n2, (k + 1) * n2), dtype=complex)
    for j in range(k + 1):
        block[j * n2:(j + 1) * n2, j * n2:(j + 1) * n2] = l0
        if j < k:
            block[j * n2:(j + 1) * n2, (j + 1) * n2:(j + 2) * n2] = cv
    top_right = matrix_exp(t * block)[:n2, k * n2:]
    return Superoperator(top_right @ matrix_exp(-t * l0))


def dyson_term_quadrature(model: RISModel, k: int, t: float, nodes: int = 32) -> Superoperator:
    """Independent evaluation of :func:`dyson_term` by nested Gauss-Legendre.

    Cost grows like nodes**k; intended as a cross-check for small k.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if nodes ** k > 2_000_000:
        raise ValueError(f"nested quadrature with {nodes}^{k} evaluations refused (cost guard)")
    n2 = model.dim ** 2
    l0 = full_generator(model, 0.0).matrix
    cv = commutator_superop(model.v).matrix
    # free generator is anti-Hermitian: unitary diagonalization for fast exp
    w, z = np.linalg.eigh(l0 / 1j)
    zh = z.conj().T

    def interaction_picture(u):
        phases = np.exp(1j * u * w)
        e = (z * phases) @ zh
        einv = (z * phases.conj()) @ zh
        return e @ cv @ einv

    x, wq = np.polynomial.legendre.leggauss(nodes)

    def nested(j, upper):
        if j == 0:
            return np.eye(n2, dtype=complex)
        acc = np.zeros((n2, n2), dtype=complex)
        for xi, wi in zip(x, wq):
            u = 0.5 * upper * (xi + 1.0)
            acc += (0.5 * upper * wi) * (nested(j - 1, u) @ interaction_picture(u))
        return acc

    return Superoperator(nested(k, t))


def dyson_truncation_bound(n: int, eps: float, t: float, a1_norm: float,
                           m: float = 1.0, growth: float = 0.0) -> float:
    """Error bound for the perturbation series truncated before order n.

    e^{growth*t} * sum_{k>=n} (eps*t)^k * m^(k+1) * a1_norm^k / k!,
    summed until terms fall below 1e-18 relative.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if min(eps, t, a1_norm, m) < 0 or growth < 0:
        raise ValueError("eps, t, a1_norm, m, growth must be nonnegative")
    x = eps * t * a1_norm * m
    if x == 0.0:
        return 0.0
    term = m * x ** n / math.factorial(n)
    total = term
    j = n
    while term > 1e-18 * total:
        j += 1
        term *= x / j
        total += term
    return math.exp(growth * t) * total


@dataclass(frozen=True)
class H1Report:
    """Outcome of the first-order-suppression check.

    ``offdiagonal_defect`` is the norm of the part of v NOT of the form
    P0 v (1-P0) + (1-P0) v P0 with P0 = I_S (x) p0 — the violating term.
    """
    applicable: bool
    passed: bool
    projection_defect: float = 0.0
    commutation_defect: float = 0.0
    offdiagonal_defect: float = 0.0

    def __bool__(self):
        return self.applicable and self.passed


def check_H1(model: RISModel) -> H1Report:
    """Check that v couples only across p0: v = P0 v (1-P0) + (1-P0) v P0."""
    if model.p0 is None:
        return H1Report(applicable=False, passed=False)
    p0 = model.p0
    proj_defect = float(np.abs(p0 @ p0 - p0).max())
    comm_defect = float(np.abs(model.h_e @ p0 - p0 @ model.h_e).max())
    big_p0 = kron(np.eye(model.n_s), p0)
    big_q0 = np.eye(model.dim) - big_p0
    off = big_p0 @ model.v @ big_q0 + big_q0 @ model.v @ big_p0
    offdiag_defect = float(np.linalg.norm(model.v - off, 2))
    passed = proj_defect <= 1e-12 and comm_defect <= 1e-12 and offdiag_defect <= 1e-12
    return H1Report(True, passed, proj_defect, comm_defect, offdiag_defect)
