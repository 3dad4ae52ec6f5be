"""Sampling oracles, alternating lower bounds, and game simulation.

Everything here is independent of the sign-program reduction: values are
computed by direct pipeline arithmetic over sampled or locally refined
inputs, which is what makes them usable as oracles against the exact SDP
path (lower bounds can never exceed it).
"""

from dataclasses import dataclass

import numpy as np

from . import channels as ch
from . import kernels
from . import linalg as la
from . import measures as ms
from . import sdp as sdpmod
from .errors import DimensionMismatch, ValidationError


@dataclass(frozen=True)
class SearchBudget:
    """Sampling effort knobs; all counts must be >= 1."""

    random_samples: int = 2000
    grid_resolution: int = 12
    refinement_iterations: int = 60
    rng_seed: int = 7

    def __post_init__(self):
        if min(self.random_samples, self.grid_resolution, self.refinement_iterations) < 1:
            raise ValidationError("budget counts must be >= 1")


@dataclass
class GameTranscript:
    trials: int
    successes: int
    empirical_rate: float
    predicted_rate: float
    z_score: float


# ---------------------------------------------------------------------------
# Pipeline response tensors
# ---------------------------------------------------------------------------

def _response_stack(theta, pre, cfg):
    """Stack R with f_n(rho) = v^dag R_n v for pure rho = |v><v|.

    f_n is the n-th output population of theta o pre o (lam - mu Lambda_phi);
    the game value for the input is sum_n |f_n|.
    """
    total = ch.compose(theta, ch.compose(pre, ms.signal_map(cfg)))
    coeffs = ch.index_coeffs(total)
    nout = theta.dim_out
    idx = np.arange(nout)
    k = coeffs[:, :, idx, idx]  # k[i, j, n]
    return np.ascontiguousarray(np.transpose(k, (2, 1, 0)))  # R_n = K_n^T


def _batch_values(r_stack, vectors):
    """Game values for a batch of unit state vectors."""
    f = np.einsum("ki,nij,kj->kn", vectors.conj(), r_stack, vectors).real
    return np.abs(f).sum(axis=1)


def _pair_superposition_vectors(dim, resolution):
    """Basis kets plus two-index superpositions over a relative-phase grid."""
    vecs = [la.basis_ket(dim, i) for i in range(dim)]
    phases = np.linspace(0.0, 2.0 * np.pi, resolution, endpoint=False)
    for i in range(dim):
        for j in range(i + 1, dim):
            for xi in phases:
                v = la.basis_ket(dim, i) + np.exp(1j * xi) * la.basis_ket(dim, j)
                vecs.append(v / np.sqrt(2.0))
    return np.array(vecs)


def _bloch_grid_vectors(resolution):
    polar = np.linspace(0.0, np.pi, resolution)
    azimuth = np.linspace(0.0, 2.0 * np.pi, 2 * resolution, endpoint=False)
    vecs = []
    for t in polar:
        for p in azimuth:
            vecs.append([np.cos(t / 2.0), np.exp(1j * p) * np.sin(t / 2.0)])
    return np.array(vecs, dtype=complex)


def _refine(r_stack, vector, sweeps):
    x0 = np.concatenate([vector.real, vector.imag])
    x, value = kernels.pure_state_ascent(r_stack, x0, max_sweeps=sweeps)
    d = vector.size
    v = x[:d] + 1j * x[d:]
    return v / np.linalg.norm(v), value


# ---------------------------------------------------------------------------
# Pre-processing candidates
# ---------------------------------------------------------------------------

def _classical_embed(dim_in, dim_out):
    """Deterministic classical relabeling; free in both classes."""
    kraus = {}
    for i in range(dim_in):
        tgt = min(i, dim_out - 1)
        kraus.setdefault((tgt, i), np.zeros((dim_out, dim_in), dtype=complex))
        kraus[(tgt, i)][tgt, i] = 1.0
    return ch.from_kraus(list(kraus.values()))


def _isometric_embed(dim_in, dim_out):
    v = np.eye(dim_out, dim_in, dtype=complex)
    return ch.from_kraus([v])


def _permutation_channels(dim, rng, max_count=8):
    from itertools import permutations

    perms = list(permutations(range(dim)))
    if len(perms) > max_count:
        chosen = [perms[0]] + [perms[i] for i in rng.choice(len(perms) - 1, max_count - 1,
                                                            replace=False) + 1]
    else:
        chosen = perms
    out = []
    for perm in chosen:
        u = np.zeros((dim, dim), dtype=complex)
        for col, row in enumerate(perm):
            u[row, col] = 1.0
        out.append(ch.unitary_channel(u))
    return out


def _pre_candidates(dim_a, dim_b, rng, n_random):
    """Detection-incoherent pre-processings to sample over."""
    cands = []
    if dim_a == dim_b:
        cands.append(ch.identity_channel(dim_a))
        cands.extend(_permutation_channels(dim_a, rng))
        cands.append(ch.permutation_phase_channel(dim_a, rng))
    elif dim_a < dim_b:
        cands.append(_isometric_embed(dim_a, dim_b))
        cands.append(_classical_embed(dim_a, dim_b))
    else:
        cands.append(_classical_embed(dim_a, dim_b))
    for _ in range(n_random):
        cands.append(ch.random_di(dim_a, dim_b, rng))
    return cands


def brute_force_game_value(theta, cfg, budget=SearchBudget()):
    """Sampled lower bound on the optimized game trace norm.

    Pre-processings come from the free generator families (identity,
    permutation and permutation-phase unitaries including pair swaps, random
    dephasing-composed channels); input states from structured grids and Haar
    draws, with the best candidates polished by coordinate ascent.  The
    result never exceeds the exact optimum.
    """
    if not (theta.completely_positive and theta.trace_preserving):
        raise ValidationError("brute force requires a CPTP channel")
    rng = np.random.default_rng(budget.rng_seed)
    da, db = cfg.dim, theta.dim_in

    n_random_pre = max(2, budget.random_samples // 400)
    pres = _pre_candidates(da, db, rng, n_random_pre)

    structured = _pair_superposition_vectors(da, budget.grid_resolution)
    if da == 2:
        structured = np.vstack([structured, _bloch_grid_vectors(budget.grid_resolution)])
    n_haar = max(8, budget.random_samples // max(1, len(pres)))

    best = []  # (value, stack index, vector)
    stacks = []
    for pre in pres:
        r_stack = _response_stack(theta, pre, cfg)
        stacks.append(r_stack)
        haar = np.array([la.random_state_vector(da, rng) for _ in range(n_haar)])
        vectors = np.vstack([structured, haar])
        values = _batch_values(r_stack, vectors)
        top = np.argsort(values)[-3:]
        for t in top:
            best.append((values[t], len(stacks) - 1, vectors[t]))

    best.sort(key=lambda item: item[0], reverse=True)
    overall = best[0][0] if best else 0.0
    for value, si, vec in best[:10]:
        _, refined = _refine(stacks[si], vec, budget.refinement_iterations)
        overall = max(overall, refined)
    return float(overall)


def no_preprocessing_improvement(theta, cfg, budget=SearchBudget()):
    """Improvement without the optimal pre-processing (identity in its place).

    Maximizes over pure input states only (grid plus Haar draws plus
    coordinate ascent; pure states suffice by convexity of the trace norm).
    Unlike the pre-processed improvement this is not monotone under free
    superchannels, see `swap_monotonicity_counterexample`.
    """
    if theta.dim_in != cfg.dim:
        raise DimensionMismatch("without pre-processing the phases act on the channel input")
    rng = np.random.default_rng(budget.rng_seed)
    da = cfg.dim
    r_stack = _response_stack(theta, ch.identity_channel(da), cfg)
    vectors = _pair_superposition_vectors(da, budget.grid_resolution)
    if da == 2:
        vectors = np.vstack([vectors, _bloch_grid_vectors(budget.grid_resolution)])
    haar = np.array([la.random_state_vector(da, rng) for _ in range(budget.random_samples)])
    vectors = np.vstack([vectors, haar])
    values = _batch_values(r_stack, vectors)
    best = float(values.max())
    for t in np.argsort(values)[-8:]:
        _, refined = _refine(r_stack, vectors[t], budget.refinement_iterations)
        best = max(best, refined)
    return best - cfg.prior_gap


def swap_monotonicity_counterexample(budget=SearchBudget()):
    """Free relabeling can create value when no pre-processing is allowed.

    A qubit detector tensored with an idle qubit scores zero when the phases
    are encoded on the idle side, yet composing with the (free) SWAP that
    exchanges the sides unlocks the full value.  Returns (before, after);
    raises if the expected gap is not reproduced.
    """
    detector = ch.tensor(ch.hadamard(), ch.identity_channel(2))
    phi = np.array([np.pi, 0.0, np.pi, 0.0])  # phases live on the second qubit
    cfg = ms.GameConfig(0.5, phi)
    l_before = no_preprocessing_improvement(detector, cfg, budget)
    swapped = ch.compose(detector, ch.swap_channel(2, 2))
    l_after = no_preprocessing_improvement(swapped, cfg, budget)
    if not (l_before <= 1e-6 < l_after):
        raise RuntimeError(
            f"counterexample regression: before={l_before:.3e}, after={l_after:.3e}"
        )
    return l_before, l_after


# ---------------------------------------------------------------------------
# Post-processed improvement (creation side): alternating lower bound
# ---------------------------------------------------------------------------

def _sign_observable(m):
    """Observable +1 on the nonnegative eigenspace of m, -1 on the rest."""
    w, v = la.eig_hermitian(m, atol=1e-8)
    signs = np.where(w >= 0.0, 1.0, -1.0)
    return (v * signs) @ la.dagger(v)


def _mio_step_problem(dim_b, dim_c, q, sigma):
    """Maximize tr(Q Psi(sigma)) over Choi matrices of MIO channels."""
    n = dim_c * dim_b
    constraints = []
    for i in range(dim_b):
        for j in range(i, dim_b):
            f = np.zeros((n, n), dtype=complex)
            for c in range(dim_c):
                f[c * dim_b + i, c * dim_b + j] = 1.0
            constraints.append((f, 1.0 + 0.0j if i == j else 0.0 + 0.0j))
    for j in range(dim_b):
        for k in range(dim_c):
            for l in range(k + 1, dim_c):
                f = np.zeros((n, n), dtype=complex)
                f[k * dim_b + j, l * dim_b + j] = 1.0
                constraints.append((f, 0.0 + 0.0j))
    objective = la.hermitian_part(np.kron(q, np.conj(sigma)))
    return sdpmod.SdpProblem(
        psd_variables=(("J_PSI", n),),
        equality_constraints=tuple(constraints),
        objective=objective,
    )


def postprocessed_improvement_lower(theta, cfg, budget=SearchBudget(), restarts=8,
                                    gap_tol=sdpmod.DEFAULT_GAP_TOL, convergence_tol=1e-9):
    """Certified lower bound on the post-processed improvement.

    For every incoherent basis input, alternates between the optimal sign
    observable for the current output pair (Helstrom step) and an SDP over
    the Choi matrix of the free post-processing with the observable fixed.
    Every iterate is a feasible strategy, so the reported value is a true
    lower bound; each step is a restricted maximization, so the iteration is
    monotone nondecreasing.  Exact evaluation is out of scope.
    """
    if not (theta.completely_positive and theta.trace_preserving):
        raise ValidationError("post-processed improvement requires a CPTP channel")
    rng = np.random.default_rng(budget.rng_seed)
    dim_b = theta.dim_out
    dim_c = cfg.dim
    phase = ch.phase_channel(cfg.phi)
    phase_adj = ch.phase_channel(-cfg.phi)
    max_rounds = max(10, budget.refinement_iterations)

    def _alternate(sigma, post0):
        post = post0
        value = -np.inf
        for _ in range(max_rounds):
            tau = ch.apply(post, sigma)
            new_value = ms.helstrom_norm(cfg, tau, ch.apply(phase, tau))
            if new_value <= value + convergence_tol:
                value = max(value, new_value)
                break
            value = new_value
            diff = cfg.lam * tau - cfg.mu * ch.apply(phase, tau)
            p_obs = _sign_observable(diff)
            q = cfg.lam * p_obs - cfg.mu * ch.apply(phase_adj, p_obs)
            problem = _mio_step_problem(dim_b, dim_c, q, sigma)
            sol = sdpmod.solve_sdp(problem, gap_tol=gap_tol)
            choi = sol.variable_values["J_PSI"]
            post = ch.channel_from_choi(choi, dim_b, dim_c, atol=1e-6)
        return value

    inits = []
    if dim_b == dim_c:
        inits.append(ch.identity_channel(dim_b))
    else:
        inits.append(_classical_embed(dim_b, dim_c))
    inits.extend(ch.random_mio(dim_b, dim_c, rng) for _ in range(restarts))

    best = -np.inf
    for i in range(theta.dim_in):
        sigma = ch.apply(theta, la.basis_proj(theta.dim_in, i))
        for post0 in inits:
            best = max(best, _alternate(sigma, post0))
    return float(best - cfg.prior_gap)


# ---------------------------------------------------------------------------
# Monte-Carlo game simulation
# ---------------------------------------------------------------------------

def monte_carlo_game(theta, phi_pre, rho, povm, cfg, trials, rng_seed):
    """Simulate the guessing game and compare with the predicted rate.

    Per trial the phases are applied with probability mu, the probe runs
    through pre-processing and channel, the POVM outcome is sampled from the
    Born probabilities, and outcome 0 is announced as "not applied".  The
    predicted rate is computed exactly for the supplied POVM; for the optimal
    incoherent POVM it equals 1/2 plus the measurement bias.
    """
    if trials < 1:
        raise ValidationError("need at least one trial")
    if len(povm.elements) != 2:
        raise ValidationError("the game uses a two-outcome POVM")
    if povm.dim != theta.dim_out:
        raise DimensionMismatch("POVM dimension must match the channel output")
    omega0 = ch.apply(theta, ch.apply(phi_pre, rho))
    omega1 = ch.apply(theta, ch.apply(phi_pre, ch.apply(ch.phase_channel(cfg.phi), rho)))

    def _outcome_prob(state):
        p0 = float(np.real(np.trace(povm.elements[0] @ state)))
        return min(max(p0, 0.0), 1.0)

    p0_given = (_outcome_prob(omega0), _outcome_prob(omega1))
    predicted = cfg.lam * p0_given[0] + cfg.mu * (1.0 - p0_given[1])

    rng = np.random.default_rng(rng_seed)
    applied = rng.random(trials) < cfg.mu
    outcome_draws = rng.random(trials)
    p0_per_trial = np.where(applied, p0_given[1], p0_given[0])
    outcome_is_0 = outcome_draws < p0_per_trial
    success = np.where(applied, ~outcome_is_0, outcome_is_0)
    successes = int(np.count_nonzero(success))
    empirical = successes / trials

    var = predicted * (1.0 - predicted) / trials
    if var > 0.0:
        z = (empirical - predicted) / np.sqrt(var)
    else:
        z = 0.0 if empirical == predicted else np.inf
    return GameTranscript(trials, successes, empirical, predicted, float(z))


def mixture_sweep(lambdas, p1_values, phi, threads=1, **solver_kwargs):
    """Pre-processed improvement of Hadamard mixtures over a parameter grid.

    Returns rows (lam, p1, improvement), CSV-ready.
    """
    rows = []
    for lam in lambdas:
        for p1 in p1_values:
            if not 0.0 <= p1 <= 1.0:
                raise ValidationError("mixture weights must lie in [0, 1]")
            theta = ch.hadamard_mixture(float(p1))
            cfg = ms.GameConfig(float(lam), np.asarray(phi, dtype=float))
            rep = sdpmod.preprocessed_improvement(
                theta, cfg, extract=False, threads=threads, **solver_kwargs
            )
            rows.append((float(lam), float(p1), rep.value))
    return rows
