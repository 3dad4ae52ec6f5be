"""Game functionals and discrimination quantities.

The binary guessing game: with probability ``lam`` the probe state passes
unchanged, with probability ``mu = 1 - lam`` it picks up relative phases from
the diagonal unitary ``phase_channel(phi)``.  All quantities here are built
from the hypothesis-difference map ``lam * id - mu * phase_channel(phi)``.
"""

from dataclasses import dataclass

import numpy as np

from . import channels as ch
from . import linalg as la
from .errors import DimensionMismatch, ValidationError


@dataclass(frozen=True)
class GameConfig:
    """Game parameters: prior ``lam`` (and ``mu = 1 - lam``) plus the phase vector."""

    lam: float
    phi: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValidationError(f"lam must lie in [0,1], got {self.lam}")
        phi = np.atleast_1d(np.asarray(self.phi, dtype=float))
        if phi.ndim != 1 or phi.size < 1:
            raise ValidationError("phi must be a nonempty 1-d real vector")
        object.__setattr__(self, "phi", phi)
        self.phi.flags.writeable = False

    @property
    def mu(self):
        return 1.0 - self.lam

    @property
    def dim(self):
        return self.phi.size

    @property
    def prior_gap(self):
        """|lam - mu|, the best bias obtainable from the prior alone (x2)."""
        return abs(self.lam - self.mu)

    def has_nontrivial_phases(self, atol=1e-12):
        """True if at least two phase components differ."""
        return bool(np.ptp(self.phi) > atol)


@dataclass(frozen=True)
class IncoherentPovm:
    """Two-or-more outcome POVM whose elements are diagonal."""

    elements: tuple

    def __post_init__(self):
        elems = tuple(np.asarray(e, dtype=complex) for e in self.elements)
        if not elems:
            raise ValidationError("POVM needs at least one element")
        dim = elems[0].shape[0]
        total = np.zeros((dim, dim), dtype=complex)
        for e in elems:
            if e.shape != (dim, dim):
                raise DimensionMismatch("POVM elements must share one shape")
            off = e - np.diag(np.diagonal(e))
            if la.max_abs(off) > 1e-9:
                raise ValidationError("POVM element is not diagonal in the incoherent basis")
            if np.min(np.diagonal(e).real) < -1e-9:
                raise ValidationError("POVM element is not positive semidefinite")
            total = total + e
        if la.max_abs(total - np.eye(dim)) > 1e-9:
            raise ValidationError("POVM elements do not sum to the identity")
        object.__setattr__(self, "elements", elems)

    @property
    def dim(self):
        return self.elements[0].shape[0]


def signal_map(cfg):
    """Hypothesis-difference map ``lam * id - mu * phase_channel(phi)``.

    Hermiticity-preserving; completely positive or trace preserving only in
    the degenerate endpoints (flags are computed from the Choi matrix).
    """
    ident = ch.identity_channel(cfg.dim)
    phase = ch.phase_channel(cfg.phi)
    choi = cfg.lam * ident.choi - cfg.mu * phase.choi
    return ch.linear_map_from_choi(choi, cfg.dim, cfg.dim)


def game_value(theta, pre, rho, cfg):
    """Trace norm of the dephased pipeline output for fixed inputs.

    Computes ``|| dephasing o theta o pre o (lam - mu * Lambda_phi) (rho) ||_1``,
    twice the bias Bob achieves with the optimal incoherent readout when he
    prepares ``rho`` and pre-processes with ``pre`` before the fixed channel
    ``theta``.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (cfg.dim, cfg.dim):
        raise DimensionMismatch(f"rho shape {rho.shape}, game expects dim {cfg.dim}")
    if pre.dim_in != cfg.dim:
        raise DimensionMismatch("pre-processing input must match the phase system")
    if pre.dim_out != theta.dim_in:
        raise DimensionMismatch("pre-processing output must match the channel input")
    x = ch.apply(signal_map(cfg), rho)
    x = ch.apply(pre, x)
    x = ch.apply(theta, x)
    dephased = np.diag(np.diagonal(x))
    return la.trace_norm_hermitian(dephased, atol=1e-8)


def helstrom_norm(cfg, sigma0, sigma1):
    """``|| lam * sigma0 - mu * sigma1 ||_1``: twice the optimal unrestricted bias."""
    sigma0 = np.asarray(sigma0, dtype=complex)
    sigma1 = np.asarray(sigma1, dtype=complex)
    if sigma0.shape != sigma1.shape:
        raise DimensionMismatch("states must share dimensions")
    return la.trace_norm_hermitian(cfg.lam * sigma0 - cfg.mu * sigma1, atol=1e-8)


def trivial_bias(cfg):
    """Guessing advantage from the prior alone."""
    return 0.5 * cfg.prior_gap


def measurement_bias(cfg, sigma0, sigma1):
    """Best advantage achievable with incoherent measurements."""
    sigma0 = np.asarray(sigma0, dtype=complex)
    sigma1 = np.asarray(sigma1, dtype=complex)
    if sigma0.shape != sigma1.shape:
        raise DimensionMismatch("states must share dimensions")
    d = np.diagonal(cfg.lam * sigma0 - cfg.mu * sigma1).real
    return 0.5 * float(np.sum(np.abs(d)))


def optimal_incoherent_povm(cfg, sigma0, sigma1):
    """Two-outcome diagonal POVM achieving the measurement bias.

    Outcome 0 collects the nonnegative part of the dephased difference
    (ties at zero go to outcome 0, i.e. the guess "not applied"), outcome 1
    the rest.  Labels: outcome 0 -> guess "not applied", 1 -> "applied".
    """
    sigma0 = np.asarray(sigma0, dtype=complex)
    sigma1 = np.asarray(sigma1, dtype=complex)
    if sigma0.shape != sigma1.shape:
        raise DimensionMismatch("states must share dimensions")
    d = np.diagonal(cfg.lam * sigma0 - cfg.mu * sigma1).real
    p0 = np.diag((d >= 0.0).astype(complex))
    p1 = np.eye(len(d), dtype=complex) - p0
    return IncoherentPovm((p0, p1))


def success_probability(measure_value, cfg):
    """Optimal guessing probability from a measure value.

    ``p = 1/2 + (measure_value + |lam - mu|) / 2``; values above 1 signal an
    invalid measure value and raise.
    """
    if measure_value < -1e-9:
        raise ValidationError(f"measure value must be nonnegative, got {measure_value}")
    p = 0.5 + 0.5 * (measure_value + cfg.prior_gap)
    if p > 1.0 + 1e-9:
        raise ValidationError(f"success probability {p} exceeds 1: invalid measure value")
    return min(p, 1.0)
