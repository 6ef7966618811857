"""Deterministic evolution, stationary analysis and Laplace-domain kernels.

The stacked generator G drives ``d|rho)/dt = G |rho)``.  Time evolution is
either the exact exponential (eigenpropagation with an expm fallback) or an
adaptive embedded Runge-Kutta.  Stationary structure comes from the spectral
projector onto the zero eigenvalue of G; the Laplace-domain objects are the
channel-summed, weight-embedded resolvent ``R(u) = (1| (u - G)^{-1} |P)`` and
the memory kernel ``L(u)`` solving ``R(u) L(u) = (1| (u-G)^{-1} M |P)`` where
``M`` is the generator minus its channel-independent Hamiltonian part.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.linalg

from .linalg import hamiltonian_superop
from .model import LindbladRateModel, StackedGenerator, StackedState, assemble_generator, initial_stacked_state

__all__ = [
    "EvolutionResult",
    "StationaryProjector",
    "HomogeneityReport",
    "KernelSample",
    "SolverError",
    "DefectiveSpectrumError",
    "SingularSolveError",
    "evolve",
    "system_state",
    "stationary_projector",
    "homogeneity_check",
    "reduced_resolvent",
    "memory_kernel_at",
    "stationary_state",
]


class SolverError(RuntimeError):
    """Time integration failed (step-size underflow or tolerance failure)."""


class DefectiveSpectrumError(RuntimeError):
    """The zero eigenvalue carries a Jordan block; no stationary projector exists."""


class SingularSolveError(RuntimeError):
    """A Laplace-domain linear solve was singular or inconsistent."""


@dataclass
class EvolutionResult:
    """Time-gridded stacked solution with per-point diagnostics."""

    times: np.ndarray  # (T,)
    stacked: np.ndarray  # (T, K, d, d)
    system: np.ndarray  # (T, d, d)
    trace_residual: np.ndarray  # (T,)  |total trace - 1|
    hermiticity_residual: np.ndarray  # (T,)  of rho_S
    min_eigenvalue: np.ndarray  # (T,)  of rho_S

    @property
    def num_channels(self) -> int:
        return self.stacked.shape[1]

    @property
    def dim(self) -> int:
        return self.stacked.shape[2]

    def channel_traces(self) -> np.ndarray:
        """Real traces of the auxiliary matrices, shape (T, K)."""
        return np.einsum("tkii->tk", self.stacked).real


@dataclass
class StationaryProjector:
    """Spectral projector onto the zero eigenvalue of the stacked generator."""

    projector: np.ndarray  # (K d^2, K d^2)
    reduced_map: np.ndarray  # (d^2, d^2): rho_0 -> stationary rho_S
    zero_dimension: int
    num_channels: int
    dim: int


@dataclass
class HomogeneityReport:
    holds: bool
    coherence_residual_norm: float
    sector_norms: dict[str, float]
    largest_entries: list[tuple[int, int, complex]]
    reduced_map: np.ndarray


@dataclass
class KernelSample:
    u: complex
    kernel: np.ndarray  # (d^2, d^2)
    shifted: bool
    condition: float
    rank: int
    residual: float


def _as_generator(model_or_generator) -> StackedGenerator:
    if isinstance(model_or_generator, StackedGenerator):
        return model_or_generator
    return assemble_generator(model_or_generator)


def _grid_array(grid) -> np.ndarray:
    t = np.asarray(grid, dtype=float)
    if t.ndim != 1 or t.shape[0] < 1:
        raise ValueError("grid must be a 1-d array of times")
    if t[0] != 0.0:
        raise ValueError("grid must start at t = 0")
    if t.shape[0] > 1 and np.any(np.diff(t) <= 0):
        raise ValueError("grid must be strictly increasing")
    return t


def _propagate_exact(gen: np.ndarray, y0: np.ndarray, times: np.ndarray) -> np.ndarray:
    """States at all grid times via eigenpropagation, expm stepping as fallback."""
    scale = max(1.0, np.linalg.norm(gen))
    vals, vecs = np.linalg.eig(gen)
    use_eig = False
    try:
        inv = np.linalg.inv(vecs)
        if np.linalg.norm((vecs * vals) @ inv - gen) <= 1e-11 * scale:
            use_eig = True
    except np.linalg.LinAlgError:
        pass
    if use_eig:
        z0 = inv @ y0
        return (np.exp(np.multiply.outer(times, vals)) * z0) @ vecs.T
    out = np.empty((times.shape[0], y0.shape[0]), dtype=complex)
    y = y0.astype(complex)
    prev = 0.0
    for i, t in enumerate(times):
        if t != prev:
            y = scipy.linalg.expm((t - prev) * gen) @ y
            prev = t
        out[i] = y
    return out


def _propagate_rk(gen: np.ndarray, y0: np.ndarray, times: np.ndarray, rtol: float, atol: float) -> np.ndarray:
    """Adaptive DOP853 on the real embedding of the complex linear system."""
    n = y0.shape[0]
    big = np.block([[gen.real, -gen.imag], [gen.imag, gen.real]])
    z0 = np.concatenate([y0.real, y0.imag])
    sol = scipy.integrate.solve_ivp(
        lambda _t, z: big @ z,
        (times[0], times[-1]),
        z0,
        method="DOP853",
        t_eval=times,
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise SolverError(f"adaptive integration failed: {sol.message}")
    return sol.y[:n].T + 1j * sol.y[n:].T


def evolve(
    model: LindbladRateModel,
    rho0: np.ndarray,
    grid,
    method: str = "exact",
    rtol: float = 1e-9,
    atol: float = 1e-12,
    psd_tol: float = 1e-8,
) -> EvolutionResult:
    """Evolve the stacked state over a time grid starting at 0.

    ``method`` is ``"exact"`` (matrix exponential path) or ``"rk"``
    (adaptive embedded Runge-Kutta at relative tolerance ``rtol``).
    """
    times = _grid_array(grid)
    gen = assemble_generator(model)
    y0 = initial_stacked_state(model, rho0, psd_tol).to_vector()
    if method == "exact":
        ys = _propagate_exact(gen.matrix, y0, times)
    elif method == "rk":
        ys = _propagate_rk(gen.matrix, y0, times, rtol, atol)
    else:
        raise ValueError(f"unknown method {method!r}")
    return _package_result(times, ys, gen.num_channels, gen.dim)


def _package_result(times: np.ndarray, ys: np.ndarray, k: int, d: int) -> EvolutionResult:
    t_count = times.shape[0]
    stacked = np.empty((t_count, k, d, d), dtype=complex)
    for i in range(t_count):
        stacked[i] = StackedState.from_vector(ys[i], k, d).matrices
    system = stacked.sum(axis=1)
    trace_res = np.abs(np.einsum("tii->t", system) - 1.0)
    herm_res = np.array([np.linalg.norm(s - s.conj().T) for s in system])
    min_eig = np.array([np.linalg.eigvalsh(0.5 * (s + s.conj().T))[0] for s in system])
    return EvolutionResult(times, stacked, system, trace_res, herm_res, min_eig)


def system_state(result: EvolutionResult, t: float) -> np.ndarray:
    """The physical state ``sum_R rho_R(t)`` at an exact grid time."""
    hits = np.nonzero(np.isclose(result.times, t, rtol=1e-12, atol=1e-12))[0]
    if hits.size == 0:
        raise ValueError(f"t = {t} is not on the evolution grid")
    return result.system[hits[0]]


def _embed_columns(weights: np.ndarray, dim: int) -> np.ndarray:
    """Matrix of the weighted embedding ``vec(rho) -> (P_R vec(rho))_R``."""
    return np.kron(weights.reshape(-1, 1), np.eye(dim * dim))


def _sum_channels(stacked_cols: np.ndarray, k: int, n: int) -> np.ndarray:
    return stacked_cols.reshape(k, n, -1).sum(axis=0)


def stationary_projector(model_or_generator, zero_tol: float = 1e-9) -> StationaryProjector:
    """Spectral projector onto the zero eigenvalue of the stacked generator.

    Uses a sorted complex Schur form; the zero cluster collects eigenvalues
    with ``|lambda| < zero_tol * max(1, |G|)``.  A non-vanishing restriction
    of G to that cluster means a defective (Jordan) zero sector, which is
    refused rather than approximated.
    """
    gen = _as_generator(model_or_generator)
    g = gen.matrix
    n_total = g.shape[0]
    scale = max(1.0, float(np.linalg.norm(g, 2)))
    thr = zero_tol * scale
    tmat, q, sdim = scipy.linalg.schur(g, output="complex", sort=lambda lam: abs(lam) < thr)
    n = gen.dim * gen.dim
    if sdim == 0:
        proj = np.zeros((n_total, n_total), dtype=complex)
    else:
        t11 = tmat[:sdim, :sdim]
        if np.linalg.norm(t11) > thr * max(1, sdim):
            raise DefectiveSpectrumError(
                f"zero eigenvalue cluster (dimension {sdim}) is defective: "
                f"restriction norm {np.linalg.norm(t11):.3e}"
            )
        if sdim == n_total:
            proj = np.eye(n_total, dtype=complex)
        else:
            t12 = tmat[:sdim, sdim:]
            t22 = tmat[sdim:, sdim:]
            coupling = scipy.linalg.solve_sylvester(t11, -t22, t12)
            block = np.zeros((n_total, n_total), dtype=complex)
            block[:sdim, :sdim] = np.eye(sdim)
            block[:sdim, sdim:] = coupling
            proj = q @ block @ q.conj().T
        if np.linalg.norm(proj @ proj - proj) > 1e-8 * max(1.0, np.linalg.norm(proj)):
            raise DefectiveSpectrumError("projector is not idempotent within tolerance")
        if np.linalg.norm(g @ proj) > 1e-8 * scale:
            raise DefectiveSpectrumError("projector does not annihilate the generator")
    reduced = _sum_channels(proj @ _embed_columns(gen.weights, gen.dim), gen.num_channels, n)
    return StationaryProjector(proj, reduced, sdim, gen.num_channels, gen.dim)


def _sector_indices(dim: int):
    pop = [i + dim * i for i in range(dim)]
    coh = [i for i in range(dim * dim) if i not in pop]
    return pop, coh


def homogeneity_check(model_or_generator, tol: float = 1e-9) -> HomogeneityReport:
    """Test whether the reduced stationary map vanishes.

    The convolution form of the reduced dynamics is valid without an
    initial-state term exactly when this map is zero.  Models that conserve
    some observable (e.g. dephasing populations) always fail globally, so
    the report also resolves the population/coherence sectors.
    """
    proj = stationary_projector(model_or_generator)
    mat = proj.reduced_map
    pop, coh = _sector_indices(proj.dim)
    sectors = {
        "population<-population": float(np.linalg.norm(mat[np.ix_(pop, pop)])),
        "population<-coherence": float(np.linalg.norm(mat[np.ix_(pop, coh)])),
        "coherence<-population": float(np.linalg.norm(mat[np.ix_(coh, pop)])),
        "coherence<-coherence": float(np.linalg.norm(mat[np.ix_(coh, coh)])),
    }
    flat = np.abs(mat).ravel()
    order = np.argsort(flat)[::-1][:4]
    largest = [(int(i // mat.shape[1]), int(i % mat.shape[1]), complex(mat.flat[i])) for i in order]
    coh_norm = float(np.linalg.norm(mat[coh, :]))
    holds = float(np.abs(mat).max()) <= tol
    return HomogeneityReport(holds, coh_norm, sectors, largest, mat)


def reduced_resolvent(model_or_generator, u: complex) -> np.ndarray:
    """The ``d**2 x d**2`` map ``(1| (u - G)^{-1} |P)``."""
    gen = _as_generator(model_or_generator)
    n = gen.dim * gen.dim
    lhs = u * np.eye(gen.matrix.shape[0]) - gen.matrix
    try:
        lu = scipy.linalg.lu_factor(lhs)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise SingularSolveError(f"resolvent solve singular at u = {u}") from exc
    cols = scipy.linalg.lu_solve(lu, _embed_columns(gen.weights, gen.dim))
    if not np.all(np.isfinite(cols)):
        raise SingularSolveError(f"resolvent solve singular at u = {u}")
    return _sum_channels(cols, gen.num_channels, n)


def _memory_split(model: LindbladRateModel, gen: StackedGenerator) -> np.ndarray:
    """The non-Hamiltonian stacked part M = G - blockdiag(-i[H_S, .])."""
    lh = hamiltonian_superop(model.system_hamiltonian)
    k = gen.num_channels
    return gen.matrix - np.kron(np.eye(k), lh)


def memory_kernel_at(
    model: LindbladRateModel,
    u: complex,
    homogeneity_tol: float = 1e-9,
    residual_tol: float = 1e-8,
) -> KernelSample:
    """Sample the Laplace-domain memory kernel at one point.

    Solves ``R(u) L(u) = (1| (u-G)^{-1} M |P)`` as a linear system
    (never by inverting the reduced propagator; conditioning is reported).
    When the reduced stationary map is nonzero the defining relation is
    first shifted by its ``u -> 0`` singular part and the sample is flagged
    ``shifted``.  The shifted system is rank deficient along the stationary
    directions; that gauge freedom is resolved by picking, among its exact
    solutions, the one closest to satisfying the unshifted relation (so a
    Markovian model still yields its bare dissipative generator).
    """
    gen = _as_generator(model)
    n = gen.dim * gen.dim
    mhat = _memory_split(model, gen)
    lhs_full = u * np.eye(gen.matrix.shape[0]) - gen.matrix
    try:
        lu = scipy.linalg.lu_factor(lhs_full)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise SingularSolveError(f"resolvent solve singular at u = {u}") from exc
    embed = _embed_columns(gen.weights, gen.dim)
    resolvent = _sum_channels(scipy.linalg.lu_solve(lu, embed), gen.num_channels, n)
    rhs_plain = _sum_channels(scipy.linalg.lu_solve(lu, mhat @ embed), gen.num_channels, n)
    if not (np.all(np.isfinite(resolvent)) and np.all(np.isfinite(rhs_plain))):
        raise SingularSolveError(f"resolvent solve singular at u = {u}")

    proj = stationary_projector(gen)
    shifted = float(np.abs(proj.reduced_map).max()) > homogeneity_tol
    lhs, rhs = resolvent, rhs_plain
    if shifted:
        lhs = resolvent - proj.reduced_map / u
        rhs = rhs_plain - _sum_channels(proj.projector @ (mhat @ embed), gen.num_channels, n) / u

    left, sv, right_h = np.linalg.svd(lhs)
    # Structural zeros of the shifted system carry LU/Schur cancellation noise
    # well above machine epsilon; directions cut here are re-pinned by the
    # unshifted relation below, so the generous threshold is the safe side.
    rank_tol = 1e-11 * (sv[0] if sv.size else 0.0)
    rank = int(np.sum(sv > rank_tol))
    if rank == 0:
        raise SingularSolveError(f"reduced propagator vanishes at u = {u}")
    kernel = right_h[:rank].conj().T @ ((left[:, :rank].conj().T @ rhs) / sv[:rank, None])
    residual = float(np.linalg.norm(lhs @ kernel - rhs))
    if residual > residual_tol * max(1.0, np.linalg.norm(rhs)):
        raise SingularSolveError(
            f"reduced propagator is singular at u = {u} (inconsistent system, residual {residual:.3e})"
        )
    if rank < n:
        null = right_h[rank:].conj().T  # (n, n - rank): exact-solution gauge directions
        correction = np.linalg.lstsq(resolvent @ null, rhs_plain - resolvent @ kernel, rcond=None)[0]
        kernel = kernel + null @ correction
    condition = float(sv[0] / sv[rank - 1])
    return KernelSample(u, kernel, shifted, condition, rank, residual)


def stationary_state(
    model_or_generator,
    rho0: np.ndarray,
    cross_check: bool = True,
    cross_tol: float = 1e-6,
) -> np.ndarray:
    """Stationary physical state reached from ``rho0``.

    Computed spectrally from the stationary projector; by construction it
    may depend on the initial state.  A long-time integration at
    ``t = 20 / |Re lambda_2|`` (slowest decaying nonzero mode) cross-checks
    the spectral result.
    """
    gen = _as_generator(model_or_generator)
    proj = stationary_projector(gen)
    rho0 = np.asarray(rho0, dtype=complex)
    vec0 = rho0.reshape(-1, order="F")
    stat = (proj.reduced_map @ vec0).reshape(gen.dim, gen.dim, order="F")
    if cross_check:
        scale = max(1.0, float(np.linalg.norm(gen.matrix, 2)))
        vals = np.linalg.eigvals(gen.matrix)
        nonzero = vals[np.abs(vals) >= 1e-9 * scale]
        if nonzero.size:
            slowest = float(np.max(nonzero.real))
            if slowest > -1e-12 * scale:
                raise SolverError("non-decaying modes present; no stationary limit")
            t_relax = 20.0 / abs(slowest)
            y0 = np.concatenate([p * vec0 for p in gen.weights])
            y_end = _propagate_exact(gen.matrix, y0, np.array([0.0, t_relax]))[-1]
            rho_end = _sum_channels(y_end.reshape(-1, 1), gen.num_channels, gen.dim**2).reshape(
                gen.dim, gen.dim, order="F"
            )
            if np.abs(rho_end - stat).max() > cross_tol:
                raise SolverError(
                    f"spectral stationary state disagrees with long-time integration "
                    f"by {np.abs(rho_end - stat).max():.3e}"
                )
    return stat
