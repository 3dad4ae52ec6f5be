"""Exact evaluation of the pre-processed improvement via semidefinite programs.

The maximization over detection-incoherent pre-processings and input states
reduces to a family of linear-objective SDPs over one PSD matrix ``X`` on the
joint system A (x) B (A carries the phases, B is the channel input):

    maximize   sum_n s_n <n| theta(Z) |n>,
               Z = sum_{ij} (lam - mu e^{i(phi_i - phi_j)}) <i|_A X |j>_A
    subject to X PSD, tr X = 1,
               off-diagonals of tr_B X vanish,
               diag(<i|_A X |j>_A) = 0 for all i != j,

one program per sign vector ``s`` over the channel's output dimension.  The
winning ``X`` yields an optimal input state and pre-processing by a direct
constructive recipe (`extract_optimal`).

Complex Hermitian PSD variables are realized through the real symmetric
embedding ``[[Re, -Im], [Im, Re]]``, so the backend (`ipm`) only ever sees
real SDPs.
"""

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import channels as ch
from . import linalg as la
from . import measures as ms
from .errors import DimensionMismatch, SolverFailure, ValidationError
from .ipm import solve_real_sdp
from .kernels import SparseConstraints

DEFAULT_GAP_TOL = 1e-8
DEFAULT_FEAS_TOL = 1e-9
SUPPORT_THRESHOLD = 1e-9
MAX_SIGN_DIMENSION = 20


@dataclass(frozen=True)
class SdpProblem:
    """One linear-objective SDP over named complex PSD blocks.

    ``equality_constraints`` holds pairs ``(F, t)`` encoding
    ``sum_pq conj(F[p,q]) X[p,q] = t``; the objective matrix is Hermitian so
    the objective ``tr(objective @ X)`` is real on Hermitian feasible points.
    """

    psd_variables: tuple
    equality_constraints: tuple
    objective: np.ndarray

    def __post_init__(self):
        if len(self.psd_variables) != 1:
            raise ValidationError("exactly one PSD block is supported")
        _, n = self.psd_variables[0]
        if self.objective.shape != (n, n):
            raise DimensionMismatch("objective shape does not match the PSD block")
        if not la.is_hermitian(self.objective, 1e-9):
            raise ValidationError("objective must be Hermitian (real-valued objective)")
        for f, _ in self.equality_constraints:
            if f.shape != (n, n):
                raise DimensionMismatch("constraint functional shape mismatch")

    @property
    def block_dim(self):
        return self.psd_variables[0][1]


@dataclass
class SdpSolution:
    variable_values: dict
    objective_value: float
    duality_gap: float
    status: str  # "optimal" | "infeasible" | "numerical_failure"
    iterations: int = 0
    primal_residual: float = 0.0
    dual_residual: float = 0.0


@dataclass(frozen=True)
class ExtractionResult:
    """Optimal input state and pre-processing recovered from a winning X."""

    sigma_diag: np.ndarray
    rho_opt: np.ndarray
    phi_opt: ch.Channel


@dataclass
class MeasureReport:
    """Result of evaluating the pre-processed improvement.

    ``value`` is the improvement over prior-only betting; ``trace_norm`` the
    underlying optimized trace norm (``value + |lam - mu|``).
    """

    value: float
    trace_norm: float
    per_sign_values: list
    sign_vectors: list
    x_opt: np.ndarray
    rho_opt: np.ndarray
    phi_opt: ch.Channel
    verification_residual: float
    config: ms.GameConfig
    sigma_diag: np.ndarray = field(default=None, repr=False)


# ---------------------------------------------------------------------------
# Real embedding and presolve
# ---------------------------------------------------------------------------

def _embed(h):
    """Complex Hermitian -> real symmetric [[Re, -Im], [Im, Re]]."""
    return np.block([[h.real, -h.imag], [h.imag, h.real]])


def _deembed(y, n):
    """Real symmetric 2n x 2n -> complex Hermitian n x n (J-symmetrized)."""
    re = 0.5 * (y[:n, :n] + y[n:, n:])
    im = 0.5 * (y[n:, :n] - y[:n, n:])
    return la.hermitian_part(re + 1j * im)


def _split_constraints(problem):
    """Complex functionals -> independent real symmetric constraints.

    Each ``(F, t)`` splits into Hermitian parts with real targets; linearly
    dependent rows are removed after a consistency check, raising
    ``SolverFailure("infeasible")`` on contradictory targets.
    """
    n = problem.block_dim
    raw = []
    for f, t in problem.equality_constraints:
        t = complex(t)
        h = 0.5 * (f + la.dagger(f))
        k = (f - la.dagger(f)) / 2j
        if la.max_abs(h) > 1e-14:
            raw.append((_embed(h) * 0.5, t.real))
        elif abs(t.real) > 1e-12:
            raise SolverFailure("infeasible", "constraint with zero functional, nonzero target")
        if la.max_abs(k) > 1e-14:
            raw.append((_embed(k) * 0.5, -t.imag))
        elif abs(t.imag) > 1e-12:
            raise SolverFailure("infeasible", "constraint with zero functional, nonzero target")
    if not raw:
        raise ValidationError("problem has no effective constraints")

    kept_mats, kept_targets = [], []
    basis = []  # orthonormal vectorizations of kept rows
    kept_vecs = []
    for mat, target in raw:
        v = mat.reshape(-1)
        r = v.copy()
        for q in basis:
            r = r - (q @ r) * q
        # second pass for numerical orthogonality
        for q in basis:
            r = r - (q @ r) * q
        nrm = np.linalg.norm(r)
        if nrm > 1e-10 * max(1.0, np.linalg.norm(v)):
            kept_mats.append(mat)
            kept_targets.append(target)
            basis.append(r / nrm)
            kept_vecs.append(v)
        else:
            # Dependent row: target must agree with the implied combination.
            coeff, *_ = np.linalg.lstsq(np.array(kept_vecs).T, v, rcond=None)
            implied = float(np.array(kept_targets) @ coeff)
            if abs(implied - target) > 1e-9 * max(1.0, abs(target)):
                raise SolverFailure(
                    "infeasible",
                    f"inconsistent dependent constraint: target {target}, implied {implied}",
                )
    return kept_mats, np.asarray(kept_targets), n


def solve_sdp(problem, gap_tol=DEFAULT_GAP_TOL, feas_tol=DEFAULT_FEAS_TOL,
              max_iter=200, raise_on_failure=True):
    """Solve one SdpProblem (maximization) through the real-embedded backend.

    Returns an `SdpSolution`; unless ``raise_on_failure`` is disabled, any
    status other than ``optimal`` raises `SolverFailure` with diagnostics.
    """
    mats, targets, n = _split_constraints(problem)
    c_real = _embed(problem.objective) * 0.5
    constraints = SparseConstraints(mats)
    # backend minimizes; negate for maximization
    x, _, _, info = solve_real_sdp(
        constraints, targets, -c_real,
        gap_tol=gap_tol, feas_tol=feas_tol, max_iter=max_iter,
    )
    name = problem.psd_variables[0][0]
    value = _deembed(x, n)
    sol = SdpSolution(
        variable_values={name: value},
        objective_value=-info.primal_objective,
        duality_gap=info.gap,
        status=info.status,
        iterations=info.iterations,
        primal_residual=info.primal_residual,
        dual_residual=info.dual_residual,
    )
    if sol.status != "optimal" and raise_on_failure:
        raise SolverFailure(sol.status, f"SDP did not reach optimality: {info}")
    return sol


# ---------------------------------------------------------------------------
# Sign-vector programs
# ---------------------------------------------------------------------------

def enumerate_sign_vectors(n, full=False):
    """Sign patterns over the channel output dimension.

    By default returns the 2^(n-1) representatives with first entry +1; with
    ``full=True`` all 2^n patterns.  Guarded against combinatorial blowup.
    """
    if n < 1:
        raise ValidationError("need at least one output dimension")
    if n > MAX_SIGN_DIMENSION:
        raise ValidationError(f"output dimension {n} exceeds the enumeration guard")
    if full:
        return [tuple(s) for s in itertools.product((1, -1), repeat=n)]
    return [(1,) + tuple(s) for s in itertools.product((1, -1), repeat=n - 1)]


def build_sign_program(theta, cfg, signs):
    """The SDP whose optimum is the best signed sum of output populations.

    ``signs`` is a +-1 vector of length ``theta.dim_out``.
    """
    da, db = cfg.dim, theta.dim_in
    nout = theta.dim_out
    if len(signs) != nout:
        raise DimensionMismatch("sign vector length must equal the output dimension")
    n = da * db

    constraints = [(np.eye(n, dtype=complex), 1.0 + 0.0j)]
    # off-diagonals of tr_B X vanish (sums of the entrywise family below;
    # the presolve drops the redundancy)
    for i in range(da):
        for j in range(i + 1, da):
            f = np.zeros((n, n), dtype=complex)
            for b in range(db):
                f[i * db + b, j * db + b] = 1.0
            constraints.append((f, 0.0 + 0.0j))
    # diag(<i| X |j>) = 0 for i != j
    for i in range(da):
        for j in range(i + 1, da):
            for b in range(db):
                f = np.zeros((n, n), dtype=complex)
                f[i * db + b, j * db + b] = 1.0
                constraints.append((f, 0.0 + 0.0j))

    coeffs = ch.index_coeffs(theta)
    idx = np.arange(nout)
    t_mat = coeffs[:, :, idx, idx] @ np.asarray(signs, dtype=float)
    w_mat = cfg.lam * np.ones((da, da)) - cfg.mu * np.exp(
        1j * (cfg.phi[:, None] - cfg.phi[None, :])
    )
    objective = np.conj(np.kron(w_mat, t_mat))

    return SdpProblem(
        psd_variables=(("X_AB", n),),
        equality_constraints=tuple(constraints),
        objective=la.hermitian_part(objective),
    )


# ---------------------------------------------------------------------------
# Extraction of the optimal pair
# ---------------------------------------------------------------------------

def extract_optimal(x_opt, dims, support_threshold=SUPPORT_THRESHOLD, check_atol=1e-6):
    """Recover (sigma, rho_opt, phi_opt) from a feasible winning X.

    The input-state populations sigma come from the diagonal of tr_B X, the
    optimal input is the maximally coherent purification of sigma, and the
    pre-processing acts on the support of sigma via the rescaled blocks of X,
    preceded by a projector-transfer map that handles rank deficiency.
    """
    da, db = dims
    n = da * db
    x = la.hermitian_part(np.asarray(x_opt, dtype=complex))
    if x.shape != (n, n):
        raise DimensionMismatch(f"X shape {x.shape} does not match dims {dims}")

    # feasibility within tolerance
    if abs(np.trace(x).real - 1.0) > check_atol:
        raise ValidationError("X is not unit trace within tolerance")
    if np.linalg.eigvalsh(x).min() < -check_atol:
        raise ValidationError("X is not PSD within tolerance")
    for i in range(da):
        for j in range(da):
            if i != j:
                diag = np.diagonal(x[i * db:(i + 1) * db, j * db:(j + 1) * db])
                if la.max_abs(diag) > check_atol:
                    raise ValidationError("X violates the free-pre-processing constraints")

    red = la.partial_trace(x, (da, db), keep=0)
    sigma = np.diagonal(red).real.copy()
    amp = np.sqrt(np.clip(sigma, 0.0, None))
    rho_opt = np.outer(amp, amp).astype(complex)

    support = [i for i in range(da) if sigma[i] > support_threshold]
    ds = len(support)

    # channel on the support: blocks of X rescaled by the populations
    j_tilde = np.zeros((db * ds, db * ds), dtype=complex)
    for a, ia in enumerate(support):
        for c, ic in enumerate(support):
            block = x[ia * db:(ia + 1) * db, ic * db:(ic + 1) * db]
            scale = 1.0 / np.sqrt(sigma[ia] * sigma[ic])
            for k in range(db):
                for l in range(db):
                    j_tilde[k * ds + a, l * ds + c] = block[k, l] * scale
    try:
        phi_tilde = ch.channel_from_choi(j_tilde, ds, db, atol=check_atol)
    except ValidationError as exc:
        raise ValidationError(f"rescaled X does not define a channel: {exc}") from exc

    # projector transfer onto the support, unsupported indices to a fixed state
    kraus = []
    k0 = np.zeros((ds, da), dtype=complex)
    for a, ia in enumerate(support):
        k0[a, ia] = 1.0
    kraus.append(k0)
    for j in range(da):
        if j not in support:
            lj = np.zeros((ds, da), dtype=complex)
            lj[0, j] = 1.0
            kraus.append(lj)
    projector_transfer = ch.from_kraus(kraus)

    phi_opt = ch.compose(phi_tilde, projector_transfer)
    if not ch.is_detection_incoherent(phi_opt, atol=check_atol):
        raise ValidationError("extracted pre-processing fails the membership test")
    return ExtractionResult(sigma_diag=sigma, rho_opt=rho_opt, phi_opt=phi_opt)


def verify_extraction(theta, cfg, result, reported_value):
    """|direct game value of the extracted pair - reported optimum|."""
    achieved = ms.game_value(theta, result.phi_opt, result.rho_opt, cfg)
    return abs(achieved - reported_value)


# ---------------------------------------------------------------------------
# Full evaluation
# ---------------------------------------------------------------------------

def _reflected(cfg):
    """Equivalent game with the prior above 1/2 and negated phases.

    Substituting rho -> phase_channel(-phi)(rho) inside the trace norm shows
    the optimized value is invariant under (lam, phi) -> (1 - lam, -phi); the
    optimal input transforms by the same phase conjugation.
    """
    return ms.GameConfig(1.0 - cfg.lam, -cfg.phi)


def _feasible_mixed_point(da, db):
    """The maximally mixed X: strictly feasible for every sign program."""
    n = da * db
    return np.eye(n, dtype=complex) / n


def preprocessed_improvement(theta, cfg, sign_enumeration="auto", gap_tol=DEFAULT_GAP_TOL,
                             feas_tol=DEFAULT_FEAS_TOL, threads=1, extract=True):
    """Evaluate the pre-processed improvement of ``theta`` for a game ``cfg``.

    Solves one SDP per sign vector and reports the maximum, the winning X,
    and (when ``extract``) the optimal input state and pre-processing with a
    round-trip verification residual.

    ``sign_enumeration``:

    * ``"auto"`` (default): all 2^N patterns, with the two constant patterns
      evaluated analytically (their objective is pinned to +-(lam - mu) by
      trace preservation), so 2^N - 2 programs are actually solved.
    * ``"full"``: every pattern solved, no analytic shortcut.
    * ``"halved"``: the 2^(N-1) representatives with first entry +1, after
      reflecting the prior above 1/2.  This is a lower bound only: sign
      patterns starting with -1 can win strictly for asymmetric channels, so
      the result may undershoot.  Kept for comparison studies.
    """
    if not (theta.completely_positive and theta.trace_preserving):
        raise ValidationError("pre-processed improvement requires a CPTP channel")
    if theta.dim_out > MAX_SIGN_DIMENSION:
        raise ValidationError("output dimension exceeds the sign enumeration guard")
    if sign_enumeration not in ("auto", "full", "halved"):
        raise ValidationError(f"unknown sign_enumeration {sign_enumeration!r}")

    solve_cfg = cfg
    reflected = False
    if sign_enumeration == "halved" and cfg.lam < 0.5:
        solve_cfg = _reflected(cfg)
        reflected = True

    nout = theta.dim_out
    signs = enumerate_sign_vectors(nout, full=(sign_enumeration != "halved"))
    prior_signed = solve_cfg.lam - solve_cfg.mu

    def _is_constant(s):
        return all(e == 1 for e in s) or all(e == -1 for e in s)

    def _constant_value(s):
        return prior_signed if s[0] == 1 else -prior_signed

    skip_constant = sign_enumeration == "auto"
    to_solve = [
        (k, s) for k, s in enumerate(signs) if not (skip_constant and _is_constant(s))
    ]
    problems = {k: build_sign_program(theta, solve_cfg, s) for k, s in to_solve}

    def _solve(p):
        return solve_sdp(p, gap_tol=gap_tol, feas_tol=feas_tol)

    if threads > 1 and len(problems) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            solved = dict(zip(problems, pool.map(_solve, problems.values())))
    else:
        solved = {k: _solve(p) for k, p in problems.items()}

    per_sign = [
        solved[k].objective_value if k in solved else _constant_value(s)
        for k, s in enumerate(signs)
    ]
    winner = int(np.argmax(per_sign))
    trace_norm = per_sign[winner]
    improvement = trace_norm - cfg.prior_gap
    if winner in solved:
        x_opt = solved[winner].variable_values["X_AB"]
    else:
        x_opt = _feasible_mixed_point(solve_cfg.dim, theta.dim_in)

    if improvement < -1e-7:
        raise SolverFailure(
            "numerical_failure",
            f"non-negativity violated: improvement {improvement:.3e}",
        )

    rho_opt = None
    phi_opt = None
    sigma = None
    residual = float("nan")
    if extract:
        dims = (solve_cfg.dim, theta.dim_in)
        try:
            res = extract_optimal(x_opt, dims)
        except ValidationError:
            # solver noise: re-solve the winner at a tighter gap, then retry
            prob = problems.get(winner) or build_sign_program(
                theta, solve_cfg, signs[winner]
            )
            tight = solve_sdp(prob, gap_tol=gap_tol * 1e-2,
                              feas_tol=feas_tol, max_iter=300)
            x_opt = tight.variable_values["X_AB"]
            try:
                res = extract_optimal(x_opt, dims)
            except ValidationError:
                res = extract_optimal(x_opt, dims, support_threshold=1e-7)
        rho_opt = res.rho_opt
        if reflected:
            rho_opt = ch.apply(ch.phase_channel(-cfg.phi), rho_opt)
        phi_opt = res.phi_opt
        sigma = res.sigma_diag
        residual = verify_extraction(
            theta, cfg, ExtractionResult(sigma, rho_opt, phi_opt), trace_norm
        )
        if residual > 1e-6:
            raise SolverFailure(
                "numerical_failure",
                f"extraction round-trip residual {residual:.3e} exceeds 1e-6",
            )

    return MeasureReport(
        value=improvement,
        trace_norm=trace_norm,
        per_sign_values=per_sign,
        sign_vectors=signs,
        x_opt=x_opt,
        rho_opt=rho_opt,
        phi_opt=phi_opt,
        verification_residual=residual,
        config=cfg,
        sigma_diag=sigma,
    )
