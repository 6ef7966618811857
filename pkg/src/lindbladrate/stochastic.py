"""Monte Carlo unraveling of Walk-class rate models.

A Walk-class model is a set of propagation channels: channel R evolves the
conditional state with a trace-preserving self-generator, hops to channel
R' at rate ``gamma[R', R]``, and every transfer out of R applies the CP
trace-preserving jump map attached to R (the source channel).  Averaging
occupancy-masked conditional states over trajectories reproduces the
auxiliary matrices of the equivalent Lindblad rate model.

Trajectories carry normalized conditional states; the statistical weight is
carried entirely by the random channel occupancy (initial channels are drawn
from the model weights, which realizes the weighted initial condition).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _kernels
from ._rng import CounterStream
from .linalg import hamiltonian_superop, hermiticity_residual, kraus_superop, trace_vector, vectorize
from .model import LindbladRateModel, OperatorBasis, _check_density, dissipator_superop

__all__ = [
    "StochasticModel",
    "TrajectoryState",
    "TrajectoryEvent",
    "EnsembleAccumulator",
    "convert_walk_to_rate_model",
    "init_channel",
    "sample_sojourn",
    "select_next_channel",
    "step_trajectory",
    "run_ensemble",
    "channel_occupation",
]

NEVER_JUMPS = np.inf


@dataclass
class StochasticModel:
    """Walk-class model: self-generators, hop rates, jump maps, weights.

    ``hop_rates[R', R]`` is the rate of transfers R -> R' (diagonal ignored,
    must be zero).  ``dissipator_blocks[R]`` are the self-Lindblad
    coefficients of channel R in ``basis``; the full self-generator is
    exposed by :meth:`self_generator`.
    """

    basis: OperatorBasis
    hamiltonian: np.ndarray  # (d, d), shared by all channels
    dissipator_blocks: np.ndarray  # (K, m, m)
    hop_rates: np.ndarray  # (K, K)
    kraus_maps: list  # per channel: list of (d, d) Kraus operators
    weights: np.ndarray  # (K,)

    def __post_init__(self):
        d, m = self.basis.dim, self.basis.size
        self.hamiltonian = np.asarray(self.hamiltonian, dtype=complex)
        self.dissipator_blocks = np.asarray(self.dissipator_blocks, dtype=complex)
        self.hop_rates = np.asarray(self.hop_rates, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        k = self.weights.shape[0]
        if self.hamiltonian.shape != (d, d) or hermiticity_residual(self.hamiltonian) > 1e-10:
            raise ValueError("hamiltonian must be a Hermitian (d, d) matrix")
        if self.dissipator_blocks.shape != (k, m, m):
            raise ValueError(f"dissipator_blocks must be {(k, m, m)}")
        if self.hop_rates.shape != (k, k) or np.any(self.hop_rates < 0):
            raise ValueError("hop_rates must be a nonnegative (K, K) matrix")
        if np.any(np.diag(self.hop_rates) != 0):
            raise ValueError("hop_rates diagonal must be zero (no self transfers)")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-10:
            raise ValueError("weights must be nonnegative and sum to 1")
        if len(self.kraus_maps) != k:
            raise ValueError("one Kraus set per channel required")
        eye = np.eye(d)
        for r, kraus in enumerate(self.kraus_maps):
            total = sum(np.asarray(op, dtype=complex).conj().T @ np.asarray(op, dtype=complex) for op in kraus)
            if np.linalg.norm(total - eye) > 1e-10:
                raise ValueError(f"jump map of channel {r} is not trace preserving")
        tau = trace_vector(d)
        for r in range(k):
            if np.linalg.norm(tau @ self.self_generator(r)) > 1e-10 * max(1.0, np.linalg.norm(self.self_generator(r))):
                raise ValueError(f"self-generator of channel {r} does not preserve the trace")

    @property
    def num_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.dim

    def self_generator(self, channel: int) -> np.ndarray:
        """Superoperator ``-i[H, .] + F_R[.] - {D_R, .}`` of one channel."""
        return hamiltonian_superop(self.hamiltonian) + dissipator_superop(
            self.basis, self.dissipator_blocks[channel]
        )

    def jump_superoperator(self, channel: int) -> np.ndarray:
        return kraus_superop(self.kraus_maps[channel])

    def escape_rates(self) -> np.ndarray:
        """Total escape rate per channel, ``Gamma_R = sum_{R'} gamma[R', R]``."""
        return self.hop_rates.sum(axis=0)


@dataclass
class TrajectoryState:
    channel: int
    matrix: np.ndarray  # normalized conditional density matrix
    time: float


@dataclass
class TrajectoryEvent:
    kind: str  # "jump" or "horizon"
    time: float
    source: int
    target: int | None


def init_channel(weights, rng: CounterStream) -> int:
    """Draw the starting channel by cumulative inversion of the weights."""
    cum = np.cumsum(np.asarray(weights, dtype=float))
    cum[-1] = 1.0
    r = rng.uniform()
    for k, bound in enumerate(cum):
        if r <= bound:
            return k
    return cum.shape[0] - 1


def sample_sojourn(channel: int, rates: np.ndarray, rng: CounterStream) -> float:
    """Exponential sojourn time in ``channel``; infinite when it never escapes."""
    gamma = float(np.sum(rates[:, channel]) - rates[channel, channel])
    if gamma <= 0.0:
        return NEVER_JUMPS
    return -np.log(rng.uniform()) / gamma


def select_next_channel(channel: int, rates: np.ndarray, rng: CounterStream) -> int:
    """Destination draw with probabilities ``gamma[R', R] / Gamma_R``; never R itself."""
    k = rates.shape[0]
    gamma = float(np.sum(rates[:, channel]) - rates[channel, channel])
    if gamma <= 0.0:
        raise ValueError(f"channel {channel} has no escape rate")
    u = rng.uniform()
    cum = 0.0
    last = -1
    for dest in range(k):
        if dest == channel:
            continue
        rate = rates[dest, channel]
        if rate <= 0.0:
            continue
        cum += rate / gamma
        last = dest
        if u <= cum:
            return dest
    return last


@dataclass
class _TrajectoryKit:
    """Precomputed propagation data shared by all backends."""

    grid: np.ndarray
    weights_cum: np.ndarray
    eigvals: np.ndarray  # (K, d^2)
    eigvecs: np.ndarray  # (K, d^2, d^2)
    eiginvs: np.ndarray
    jump_ops: np.ndarray  # (K, d^2, d^2)
    trans_cum: np.ndarray  # (K_source, K_dest) cumulative transfer probabilities
    escape: np.ndarray
    rho0_vec: np.ndarray
    dim: int


def _build_kit(model: StochasticModel, rho0: np.ndarray, grid: np.ndarray) -> _TrajectoryKit:
    k, d = model.num_channels, model.dim
    n = d * d
    eigvals = np.empty((k, n), dtype=complex)
    eigvecs = np.empty((k, n, n), dtype=complex)
    eiginvs = np.empty((k, n, n), dtype=complex)
    jump_ops = np.empty((k, n, n), dtype=complex)
    for r in range(k):
        gen = model.self_generator(r)
        vals, vecs = np.linalg.eig(gen)
        inv = np.linalg.inv(vecs)
        if np.linalg.norm((vecs * vals) @ inv - gen) > 1e-9 * max(1.0, np.linalg.norm(gen)):
            raise ValueError(f"self-generator of channel {r} is not reliably diagonalizable")
        eigvals[r], eigvecs[r], eiginvs[r] = vals, vecs, inv
        jump_ops[r] = model.jump_superoperator(r)
    escape = model.escape_rates()
    trans_cum = np.zeros((k, k))
    for src in range(k):
        if escape[src] <= 0:
            continue
        cum = 0.0
        last = -1
        for dest in range(k):
            if dest != src and model.hop_rates[dest, src] > 0:
                cum += model.hop_rates[dest, src] / escape[src]
                last = dest
            trans_cum[src, dest] = cum
        trans_cum[src, last:] = 1.0
    weights_cum = np.cumsum(model.weights)
    weights_cum[-1] = 1.0
    return _TrajectoryKit(
        grid=np.asarray(grid, dtype=float),
        weights_cum=weights_cum,
        eigvals=eigvals,
        eigvecs=eigvecs,
        eiginvs=eiginvs,
        jump_ops=jump_ops,
        trans_cum=trans_cum,
        escape=np.asarray(escape, dtype=float),
        rho0_vec=vectorize(rho0),
        dim=d,
    )


def step_trajectory(state: TrajectoryState, model: StochasticModel, rng: CounterStream, horizon: float):
    """Advance one trajectory by a single sojourn segment.

    Propagates with the channel self-propagator until the sampled transfer
    or the horizon, whichever comes first.  A transfer applies the source
    channel's jump map, renormalizes the trace and switches channel.
    Returns ``(new_state, events)``.
    """
    if not np.all(np.isfinite(state.matrix)):
        raise FloatingPointError("non-finite trajectory state")
    d = model.dim
    gen = model.self_generator(state.channel)
    dt_jump = sample_sojourn(state.channel, model.hop_rates, rng)
    t_jump = state.time + dt_jump
    if t_jump >= horizon:
        prop = scipy.linalg.expm((horizon - state.time) * gen)
        vec = prop @ vectorize(state.matrix)
        mat = vec.reshape(d, d, order="F")
        event = TrajectoryEvent("horizon", horizon, state.channel, None)
        return TrajectoryState(state.channel, mat, horizon), [event]
    prop = scipy.linalg.expm(dt_jump * gen)
    vec = model.jump_superoperator(state.channel) @ (prop @ vectorize(state.matrix))
    tr = np.trace(vec.reshape(d, d, order="F"))
    if abs(tr - 1.0) > 1e-10:
        raise FloatingPointError(f"trace drift {abs(tr - 1.0):.3e} beyond 1e-10 at jump")
    vec = vec / tr
    target = select_next_channel(state.channel, model.hop_rates, rng)
    event = TrajectoryEvent("jump", t_jump, state.channel, target)
    return TrajectoryState(target, vec.reshape(d, d, order="F"), t_jump), [event]


@dataclass
class EnsembleAccumulator:
    """Running sums (and squares) of occupancy-masked conditional states."""

    grid: np.ndarray
    channel_sums: np.ndarray  # (K, T, d^2) complex
    channel_sq_re: np.ndarray  # (K, T, d^2)
    channel_sq_im: np.ndarray
    count: int
    dim: int

    @property
    def num_channels(self) -> int:
        return self.channel_sums.shape[0]

    def merge(self, other: "EnsembleAccumulator") -> "EnsembleAccumulator":
        if not np.array_equal(self.grid, other.grid):
            raise ValueError("accumulators use different grids")
        return EnsembleAccumulator(
            self.grid,
            self.channel_sums + other.channel_sums,
            self.channel_sq_re + other.channel_sq_re,
            self.channel_sq_im + other.channel_sq_im,
            self.count + other.count,
            self.dim,
        )

    def channel_estimates(self) -> np.ndarray:
        """Estimated auxiliary matrices, shape (K, T, d, d)."""
        k, t = self.channel_sums.shape[0], self.grid.shape[0]
        d = self.dim
        est = self.channel_sums / self.count
        return est.reshape(k, t, d, d).transpose(0, 1, 3, 2)

    def system_estimate(self) -> np.ndarray:
        """Estimated physical state, shape (T, d, d)."""
        return self.channel_estimates().sum(axis=0)

    def system_standard_error(self):
        """Standard errors of the state estimate (real and imaginary parts)."""
        n = self.count
        d, t = self.dim, self.grid.shape[0]
        sums = self.channel_sums.sum(axis=0)
        sq_re = self.channel_sq_re.sum(axis=0)
        sq_im = self.channel_sq_im.sum(axis=0)
        if n < 2:
            zero = np.zeros((t, d, d))
            return zero, zero.copy()
        var_re = np.maximum(sq_re - sums.real**2 / n, 0.0) / (n - 1)
        var_im = np.maximum(sq_im - sums.imag**2 / n, 0.0) / (n - 1)
        se_re = np.sqrt(var_re / n).reshape(t, d, d).transpose(0, 2, 1)
        se_im = np.sqrt(var_im / n).reshape(t, d, d).transpose(0, 2, 1)
        return se_re, se_im

    def channel_occupation(self) -> np.ndarray:
        """Estimated channel occupation probabilities, shape (T, K)."""
        k, t = self.channel_sums.shape[0], self.grid.shape[0]
        d = self.dim
        mats = self.channel_sums.reshape(k, t, d, d).transpose(0, 1, 3, 2)
        return np.einsum("ktii->tk", mats).real / self.count


def run_ensemble(
    model: StochasticModel,
    rho0: np.ndarray,
    grid,
    n: int,
    master_seed: int,
    workers: int = 1,
    backend: str | None = None,
) -> EnsembleAccumulator:
    """Average ``n`` independent trajectories over a time grid.

    Results are a pure function of ``(model, rho0, grid, n, master_seed)``:
    trajectory ``i`` consumes substream ``i`` of the master seed and partial
    sums are merged in fixed block order, so the worker count and backend
    scheduling cannot change the output bits.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    times = np.asarray(grid, dtype=float)
    if times.ndim != 1 or times[0] != 0.0 or (times.shape[0] > 1 and np.any(np.diff(times) <= 0)):
        raise ValueError("grid must be strictly increasing and start at 0")
    rho0 = _check_density(np.asarray(rho0, dtype=complex), model.dim, 1e-8)
    kit = _build_kit(model, rho0, times)
    chosen = _kernels.resolve_backend(backend)
    sums, sq_re, sq_im = _kernels.run_blocks(kit, n, master_seed, chosen, workers)
    return EnsembleAccumulator(times, sums, sq_re, sq_im, n, model.dim)


def channel_occupation(accumulator: EnsembleAccumulator) -> np.ndarray:
    """Per-time channel occupation probabilities (traces of the estimates)."""
    return accumulator.channel_occupation()


def convert_walk_to_rate_model(
    model: StochasticModel,
    basis: OperatorBasis,
    projection_tol: float = 1e-8,
) -> LindbladRateModel:
    """Express a Walk-class model as a Lindblad rate model.

    The feed block of the ordered pair (R <- R') is the source jump map's
    Kraus Gram matrix in ``basis`` scaled by the hop rate; trace
    preservation of the jump maps makes the matching escape term exactly
    ``-gamma[R', R] rho_R``.  Self-dissipators are re-expressed in ``basis``
    by congruence when it differs from the model's own basis.
    """
    k, m = model.num_channels, basis.size
    grams = []
    for r in range(k):
        coeffs = []
        for op in model.kraus_maps[r]:
            c, resid = basis.expand(np.asarray(op, dtype=complex))
            if resid > projection_tol * max(1.0, np.linalg.norm(op)):
                raise ValueError(
                    f"Kraus operator of channel {r} is not expandable in the basis "
                    f"(projection residual {resid:.3e})"
                )
            coeffs.append(c)
        grams.append(sum(np.outer(c, c.conj()) for c in coeffs))

    if basis.same_as(model.basis):
        diag = model.dissipator_blocks.copy()
    else:
        change = np.empty((model.basis.size, m), dtype=complex)
        for alpha in range(model.basis.size):
            c, resid = basis.expand(model.basis.ops[alpha])
            if resid > projection_tol * max(1.0, np.linalg.norm(model.basis.ops[alpha])):
                raise ValueError(f"model basis operator {alpha} is not expandable in the target basis")
            change[alpha] = c
        diag = np.stack([change.T @ model.dissipator_blocks[r] @ change.conj() for r in range(k)])

    blocks = np.zeros((k, k, m, m), dtype=complex)
    for r in range(k):
        blocks[r, r] = diag[r]
        for rp in range(k):
            if rp != r:
                blocks[r, rp] = model.hop_rates[r, rp] * grams[rp]
    hams = np.stack([model.hamiltonian] * k)
    return LindbladRateModel(basis, model.weights.copy(), blocks, hams, model.hamiltonian)
