"""Two-level system coupled to a chain of two-level elements: closed forms.

The model: h_S = diag(0, S), h_E = diag(0, E), interaction

    v = sigma_plus (x) B + sigma_minus (x) B†,   B = [[a, b], [c, d]],

with sigma_plus = |1><0|, so that b couples the exchange transition
|1,0> <-> |0,1> (Bohr frequency E - S) and c the two-excitation
transition |1,1> <-> |0,0> (frequency E + S).  The chain is thermal at
inverse temperature beta.  The diagonal entries of the weak-coupling
effective generator then have the closed forms

    delta_0 = -2/(1+w) * { w |b|^2 K(E-S) + |c|^2 K(E+S) },
    delta_1 = -2/(1+w) * { |b|^2 K(E-S) + w |c|^2 K(E+S) },

with w = e^{-beta E} and K(x) = (1 - cos(tau x))/x^2, extended by its
limit tau^2/2 at the resonance x = 0.  Both are <= 0; when S != 0 and
|b|^2 + |c|^2 != 0 the effective dynamics relaxes to the state
diag(delta_1, delta_0)/(delta_0 + delta_1).

These formulas are evaluated directly, independently of the simulation
pipeline, and serve as its oracle.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import NoAsymptoticStateError, RISModel


@dataclass(frozen=True)
class SpinParams:
    S: float
    E: float
    beta: float
    b: complex
    c: complex
    tau: float
    a: complex = 0.0
    d: complex = 0.0

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")

    @property
    def coupling_strength(self) -> float:
        """|b|^2 + |c|^2, the quantity controlling relaxation."""
        return abs(self.b) ** 2 + abs(self.c) ** 2


def _u(k: int, l: int) -> np.ndarray:
    m = np.zeros((2, 2), dtype=complex)
    m[k, l] = 1.0
    return m


def build_spin_model(p: SpinParams) -> RISModel:
    """Assemble the spin-spin model; p0 = |0><0| is attached when a = d = 0."""
    h_s = np.diag([0.0, p.S]).astype(complex)
    h_e = np.diag([0.0, p.E]).astype(complex)
    bmat = np.array([[p.a, p.b], [p.c, p.d]], dtype=complex)
    v = np.kron(_u(1, 0), bmat) + np.kron(_u(0, 1), bmat.conj().T)
    p0 = _u(0, 0) if p.a == 0 and p.d == 0 else None
    return RISModel(h_s=h_s, h_e=h_e, v=v, beta=p.beta, p0=p0)


def _kernel(x: float, tau: float) -> float:
    # (1 - cos(tau x)) / x^2, stably via 2 sin^2; removable singularity at 0
    if x == 0.0:
        return tau * tau / 2.0
    return 2.0 * np.sin(tau * x / 2.0) ** 2 / (x * x)


def closed_form_deltas(p: SpinParams) -> tuple[float, float]:
    """(delta_0, delta_1): diagonal entries of the weak-coupling generator."""
    w = np.exp(-p.beta * p.E)
    k_minus = _kernel(p.E - p.S, p.tau)
    k_plus = _kernel(p.E + p.S, p.tau)
    pref = -2.0 / (1.0 + w)
    delta0 = pref * (w * abs(p.b) ** 2 * k_minus + abs(p.c) ** 2 * k_plus)
    delta1 = pref * (abs(p.b) ** 2 * k_minus + w * abs(p.c) ** 2 * k_plus)
    return float(delta0), float(delta1)


def fast_repetition_deltas(p: SpinParams) -> tuple[float, float]:
    """Small-tau limits delta_i(tau)/tau^2, the fast-repetition generator diagonals."""
    w = np.exp(-p.beta * p.E)
    pref = -1.0 / (1.0 + w)
    return (float(pref * (w * abs(p.b) ** 2 + abs(p.c) ** 2)),
            float(pref * (abs(p.b) ** 2 + w * abs(p.c) ** 2)))


def spin_asymptotic_state(p: SpinParams) -> np.ndarray:
    """Asymptotic density matrix diag(delta_1, delta_0)/(delta_0 + delta_1)."""
    if p.S == 0:
        raise NoAsymptoticStateError("S = 0: free system dynamics never mixes "
                                     "the populations")
    if p.coupling_strength == 0:
        raise NoAsymptoticStateError("|b|^2 + |c|^2 = 0: both relaxation rates vanish")
    d0, d1 = closed_form_deltas(p)
    if d0 + d1 == 0:
        raise NoAsymptoticStateError("delta_0 + delta_1 = 0 (resonant tau kills "
                                     "both kernels)")
    return np.diag([d1, d0]).astype(complex) / (d0 + d1)


@dataclass(frozen=True)
class SpinGeneratorReport:
    """Pipeline generator vs closed forms, in the basis {u00, u11, u01, u10}.

    ``block_offdiagonal_defect``: norm of the coupling between the
    population sector {u00, u11} and the coherence sector {u01, u10}
    (zero in exact arithmetic).  ``diag_deviation``: max deviation of the
    population block from [[d0, -d0], [-d1, d1]] (a = d = 0 only).
    ``offdiagonal_bounds``: rows (tau, re01, re10, bound, slack, ok)
    checking Re<u01|gen|u01> <= -(tau^2/2)(|b|^2+|c|^2) up to the stated
    cubic slack, and likewise for u10.
    """
    unitality_defect: float
    block_offdiagonal_defect: float
    diag_deviation: float | None
    delta0_closed: float
    delta1_closed: float
    delta0_pipeline: float
    delta1_pipeline: float
    offdiagonal_bounds: tuple


# reorder vec indices (u00,u01,u10,u11) -> (u00,u11,u01,u10)
_SECTOR_ORDER = (0, 3, 1, 2)


def closed_form_generator_checks(p: SpinParams, bound_taus=(0.1, 0.05)) -> SpinGeneratorReport:
    """Compare the numerically built weak-coupling generator with the closed forms."""
    from .vanhove import effective_generator_weak_coupling

    model = build_spin_model(p)
    gen = effective_generator_weak_coupling(model, p.tau).generator.matrix
    g = gen[np.ix_(_SECTOR_ORDER, _SECTOR_ORDER)]
    d0, d1 = closed_form_deltas(p)

    unitality = float(np.abs(gen @ np.eye(2).reshape(-1)).max())
    off_block = float(np.linalg.norm(g[:2, 2:], 2) + np.linalg.norm(g[2:, :2], 2))
    if p.a == 0 and p.d == 0:
        expected = np.array([[d0, -d0], [-d1, d1]])
        diag_dev = float(np.abs(g[:2, :2] - expected).max())
    else:
        diag_dev = None

    bounds = []
    for tau in bound_taus:
        pt = SpinParams(S=p.S, E=p.E, beta=p.beta, b=p.b, c=p.c, tau=tau, a=p.a, d=p.d)
        gt = effective_generator_weak_coupling(build_spin_model(pt), tau).generator.matrix
        re01 = float(gt[1, 1].real)
        re10 = float(gt[2, 2].real)
        bnorm = np.linalg.norm(np.array([[pt.a, pt.b], [pt.c, pt.d]], dtype=complex), 2)
        bound = -(tau ** 2 / 2.0) * pt.coupling_strength
        slack = 10.0 * tau ** 3 * bnorm ** 2
        ok = re01 <= bound + slack and re10 <= bound + slack
        bounds.append((tau, re01, re10, bound, slack, ok))

    return SpinGeneratorReport(
        unitality_defect=unitality,
        block_offdiagonal_defect=off_block,
        diag_deviation=diag_dev,
        delta0_closed=d0,
        delta1_closed=d1,
        delta0_pipeline=float(gen[0, 0].real),
        delta1_pipeline=float(gen[3, 3].real),
        offdiagonal_bounds=tuple(bounds),
    )
