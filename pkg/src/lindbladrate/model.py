"""Lindblad rate models: validation, generator assembly and builders.

A model couples ``K`` auxiliary matrices.  Channel ``R`` carries an
effective Hamiltonian ``H_R`` and a diagonal rate block ``a_R``; ordered
channel pairs carry off-diagonal blocks ``a[R, R']`` feeding channel ``R``
from channel ``R'``.  All blocks are ``m x m`` in the indices of a shared
operator basis ``{V_alpha}`` and must be Hermitian and PSD for the solution
map to be completely positive.  The stacked generator acts on the
channel-major vector ``(vec rho_0, ..., vec rho_{K-1})``; its block ``(R, R)``
is ``-i[H_R, .] - {D_R, .} + F_R[.] - sum_{R''!=R} {D(R''<-R), .}`` and its
block ``(R, R')`` is the sandwich part ``F(R<-R')[.]``, with

    D = (1/2) sum a[alpha, gamma] V_gamma^dag V_alpha,
    F[.] = sum a[alpha, gamma] V_alpha . V_gamma^dag.

The escape and feed terms of a pair share one coefficient block, which is
what conserves the total trace.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.integrate

from .linalg import (
    anticommutator_superop,
    hamiltonian_superop,
    hermiticity_residual,
    psd_check,
    vectorize,
)

__all__ = [
    "OperatorBasis",
    "RateBlock",
    "LindbladRateModel",
    "StackedGenerator",
    "StackedState",
    "BlockReport",
    "ValidationReport",
    "ModelStructureError",
    "MarkovDecayError",
    "validate_model",
    "assemble_generator",
    "initial_stacked_state",
    "reduce_from_tripartite",
    "build_from_correlations",
    "decompose_random_lindblad",
    "channel_generator",
    "dissipator_superop",
]

GRAM_CONDITION_LIMIT = 1e8


class ModelStructureError(ValueError):
    """Input coefficients do not have the required rate-equation structure."""


class MarkovDecayError(ValueError):
    """Correlation samples have not decayed at the end of the time window."""


@dataclass
class OperatorBasis:
    """Shared system operator basis ``{V_alpha}``.

    The ``m <= d**2`` operators must be linearly independent; this is
    enforced through the condition number of their Hilbert-Schmidt Gram
    matrix at construction time.
    """

    ops: np.ndarray  # (m, d, d)
    gram: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        ops = np.asarray(self.ops, dtype=complex)
        if ops.ndim != 3 or ops.shape[1] != ops.shape[2]:
            raise ValueError(f"basis must be (m, d, d), got {ops.shape}")
        m, d = ops.shape[0], ops.shape[1]
        if m > d * d:
            raise ValueError(f"{m} operators cannot be independent in dimension {d}")
        self.ops = ops
        flat = ops.reshape(m, d * d)
        self.gram = flat.conj() @ flat.T
        cond = np.linalg.cond(self.gram)
        if not np.isfinite(cond) or cond > GRAM_CONDITION_LIMIT:
            raise ValueError(f"basis Gram matrix condition {cond:.3e} exceeds {GRAM_CONDITION_LIMIT:.0e}")

    @property
    def dim(self) -> int:
        return self.ops.shape[1]

    @property
    def size(self) -> int:
        return self.ops.shape[0]

    def expand(self, matrix: np.ndarray):
        """Hilbert-Schmidt projection of ``matrix`` onto the basis.

        Returns ``(coeffs, residual)`` with ``matrix ~ sum_a coeffs[a] V_a``
        and ``residual`` the Frobenius norm of the unrepresented part.
        """
        x = np.asarray(matrix, dtype=complex)
        rhs = self.ops.reshape(self.size, -1).conj() @ x.reshape(-1)
        coeffs = np.linalg.solve(self.gram, rhs)
        recon = np.tensordot(coeffs, self.ops, axes=(0, 0))
        return coeffs, float(np.linalg.norm(recon - x))

    def same_as(self, other: "OperatorBasis") -> bool:
        return self.ops.shape == other.ops.shape and np.array_equal(self.ops, other.ops)


@dataclass
class RateBlock:
    """One coefficient block tagged by its channel or ordered channel pair."""

    tag: tuple[int, int]  # (R, R): diagonal block; (R, R'): feed R <- R'
    matrix: np.ndarray

    @property
    def is_diagonal(self) -> bool:
        return self.tag[0] == self.tag[1]


@dataclass
class LindbladRateModel:
    """Complete specification of a Lindblad rate evolution.

    ``blocks[R, R]`` holds the diagonal block ``a_R`` and ``blocks[R, R']``
    the off-diagonal block feeding ``R`` from ``R'``.  ``system_hamiltonian``
    is the channel-independent part of the Hamiltonians, used only to split
    the generator for memory-kernel extraction; it defaults to zero.
    Models are treated as immutable once validated.
    """

    basis: OperatorBasis
    weights: np.ndarray  # (K,)
    blocks: np.ndarray  # (K, K, m, m)
    hamiltonians: np.ndarray | None = None  # (K, d, d)
    system_hamiltonian: np.ndarray | None = None  # (d, d)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        k = self.weights.shape[0]
        m, d = self.basis.size, self.basis.dim
        self.blocks = np.asarray(self.blocks, dtype=complex)
        if self.blocks.shape != (k, k, m, m):
            raise ValueError(f"blocks must be {(k, k, m, m)}, got {self.blocks.shape}")
        if self.hamiltonians is None:
            self.hamiltonians = np.zeros((k, d, d), dtype=complex)
        else:
            self.hamiltonians = np.asarray(self.hamiltonians, dtype=complex)
            if self.hamiltonians.shape != (k, d, d):
                raise ValueError(f"hamiltonians must be {(k, d, d)}")
        if self.system_hamiltonian is None:
            self.system_hamiltonian = np.zeros((d, d), dtype=complex)
        else:
            self.system_hamiltonian = np.asarray(self.system_hamiltonian, dtype=complex)
            if self.system_hamiltonian.shape != (d, d):
                raise ValueError(f"system_hamiltonian must be {(d, d)}")

    @classmethod
    def from_blocks(
        cls,
        basis: OperatorBasis,
        weights,
        diagonal,
        offdiagonal: dict[tuple[int, int], np.ndarray] | None = None,
        hamiltonians=None,
        system_hamiltonian=None,
    ) -> "LindbladRateModel":
        """Build from per-channel diagonal blocks and a pair-keyed dict."""
        weights = np.asarray(weights, dtype=float)
        k, m = weights.shape[0], basis.size
        blocks = np.zeros((k, k, m, m), dtype=complex)
        diagonal = np.asarray(diagonal, dtype=complex)
        for r in range(k):
            blocks[r, r] = diagonal[r]
        for (r, rp), mat in (offdiagonal or {}).items():
            if r == rp:
                raise ValueError(f"off-diagonal tag ({r}, {rp}) must have distinct channels")
            blocks[r, rp] = np.asarray(mat, dtype=complex)
        return cls(basis, weights, blocks, hamiltonians, system_hamiltonian)

    @property
    def num_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.dim

    def rate_blocks(self) -> list[RateBlock]:
        k = self.num_channels
        return [RateBlock((r, rp), self.blocks[r, rp]) for r in range(k) for rp in range(k)]


@dataclass
class StackedGenerator:
    """Dense generator on the channel-major stacked space (``K d**2``)."""

    matrix: np.ndarray
    num_channels: int
    dim: int
    weights: np.ndarray


@dataclass
class StackedState:
    """Ordered collection of auxiliary matrices; the physical state is their sum."""

    matrices: np.ndarray  # (K, d, d)

    @property
    def num_channels(self) -> int:
        return self.matrices.shape[0]

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]

    @property
    def system(self) -> np.ndarray:
        return self.matrices.sum(axis=0)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([vectorize(m) for m in self.matrices])

    @classmethod
    def from_vector(cls, vec: np.ndarray, num_channels: int, dim: int) -> "StackedState":
        parts = np.asarray(vec, dtype=complex).reshape(num_channels, dim * dim)
        mats = np.stack([parts[r].reshape(dim, dim, order="F") for r in range(num_channels)])
        return cls(mats)


@dataclass
class BlockReport:
    tag: tuple[int, int]
    hermiticity_residual: float
    min_eigenvalue: float
    is_psd: bool


@dataclass
class ValidationReport:
    blocks: list[BlockReport]
    weight_sum: float
    weights_nonnegative: bool
    hamiltonian_residual: float
    passed: bool

    def failures(self) -> list[BlockReport]:
        return [b for b in self.blocks if not b.is_psd]


def validate_model(model: LindbladRateModel, psd_tol: float = 1e-8, herm_tol: float = 1e-10) -> ValidationReport:
    """Check complete positivity requirements block by block.

    Every diagonal and off-diagonal block must be Hermitian and PSD in the
    basis indices, the weights nonnegative and normalized, and the channel
    Hamiltonians Hermitian.  The report carries per-block residuals and
    minimal eigenvalues so failures are attributable.
    """
    reports = []
    all_psd = True
    for blk in model.rate_blocks():
        res = hermiticity_residual(blk.matrix)
        if res > herm_tol:
            sym_min = float(np.linalg.eigvalsh(0.5 * (blk.matrix + blk.matrix.conj().T))[0])
            reports.append(BlockReport(blk.tag, res, sym_min, False))
            all_psd = False
            continue
        ok, min_eig = psd_check(blk.matrix, psd_tol)
        reports.append(BlockReport(blk.tag, res, min_eig, ok))
        all_psd = all_psd and ok
    wsum = float(model.weights.sum())
    wpos = bool(np.all(model.weights >= 0))
    hres = max(
        hermiticity_residual(model.system_hamiltonian),
        max(hermiticity_residual(h) for h in model.hamiltonians),
    )
    passed = all_psd and wpos and abs(wsum - 1.0) <= 1e-10 and hres <= herm_tol
    return ValidationReport(reports, wsum, wpos, hres, passed)


def _dissipation_pieces(basis: OperatorBasis, block: np.ndarray):
    """Return ``(D, F)`` for one coefficient block: the anticommutator
    operator ``D`` and the sandwich superoperator ``F``."""
    m, d = basis.size, basis.dim
    dop = np.zeros((d, d), dtype=complex)
    fop = np.zeros((d * d, d * d), dtype=complex)
    for alpha in range(m):
        va = basis.ops[alpha]
        for gamma in range(m):
            a = block[alpha, gamma]
            if a == 0:
                continue
            vg = basis.ops[gamma]
            dop += 0.5 * a * (vg.conj().T @ va)
            fop += a * np.kron(vg.conj(), va)
    return dop, fop


def dissipator_superop(basis: OperatorBasis, block: np.ndarray) -> np.ndarray:
    """Superoperator ``F[.] - {D, .}`` of one coefficient block."""
    dop, fop = _dissipation_pieces(basis, block)
    return fop - anticommutator_superop(dop)


def channel_generator(model: LindbladRateModel, channel: int) -> np.ndarray:
    """Self-generator of one channel: ``-i[H_R, .] + F_R[.] - {D_R, .}``."""
    return hamiltonian_superop(model.hamiltonians[channel]) + dissipator_superop(
        model.basis, model.blocks[channel, channel]
    )


def assemble_generator(model: LindbladRateModel, validate: bool = True) -> StackedGenerator:
    """Build the dense stacked generator of a model.

    Layout is channel-major: stacked index ``R*d**2 + (i + d*j)``.
    """
    if validate:
        report = validate_model(model)
        if not report.passed:
            bad = ", ".join(str(b.tag) for b in report.failures())
            raise ValueError(f"model failed CP validation (blocks: {bad or 'weights/hamiltonians'})")
    k, d = model.num_channels, model.dim
    n = d * d
    gen = np.zeros((k * n, k * n), dtype=complex)
    for r in range(k):
        diag = hamiltonian_superop(model.hamiltonians[r]) + dissipator_superop(model.basis, model.blocks[r, r])
        for rpp in range(k):
            if rpp == r:
                continue
            d_esc, _ = _dissipation_pieces(model.basis, model.blocks[rpp, r])
            diag -= anticommutator_superop(d_esc)
        gen[r * n : (r + 1) * n, r * n : (r + 1) * n] = diag
        for rp in range(k):
            if rp == r:
                continue
            _, f_feed = _dissipation_pieces(model.basis, model.blocks[r, rp])
            gen[r * n : (r + 1) * n, rp * n : (rp + 1) * n] = f_feed
    return StackedGenerator(gen, k, d, model.weights.copy())


def _check_density(rho: np.ndarray, dim: int, psd_tol: float) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (dim, dim):
        raise ValueError(f"state must be {(dim, dim)}, got {rho.shape}")
    if hermiticity_residual(rho) > 1e-10:
        raise ValueError("initial state is not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1.0) > 1e-10:
        raise ValueError(f"initial state trace {tr} is not 1")
    min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    if min_eig < -psd_tol:
        raise ValueError(f"initial state has negative eigenvalue {min_eig:.3e}")
    return rho


def initial_stacked_state(model: LindbladRateModel, rho0: np.ndarray, psd_tol: float = 1e-8) -> StackedState:
    """Weighted embedding of an initial density matrix, one slot per channel."""
    rho0 = _check_density(rho0, model.dim, psd_tol)
    return StackedState(np.stack([p * rho0 for p in model.weights]))


def reduce_from_tripartite(
    b: np.ndarray,
    num_channels: int,
    basis: OperatorBasis,
    weights=None,
    hamiltonians=None,
    tol: float = 1e-10,
) -> LindbladRateModel:
    """Reduce tripartite dissipation coefficients to a rate model.

    ``b[u, v]`` are ``m x m`` blocks indexed by ordered channel pairs
    ``u = (R, R')`` encoded as ``R*K + R'`` where the pair tags a transfer
    feeding ``R`` from ``R'``.  A rate-equation structure requires every
    pair-off-diagonal block ``b[u, v != u]`` to vanish; when it does, the
    pair-diagonal blocks are copied verbatim into the model.
    """
    k = num_channels
    m = basis.size
    b = np.asarray(b, dtype=complex)
    if b.shape != (k * k, k * k, m, m):
        raise ValueError(f"b must have shape {(k * k, k * k, m, m)}, got {b.shape}")
    big = b.transpose(0, 2, 1, 3).reshape(k * k * m, k * k * m)
    scale = max(1.0, float(np.abs(b).max()))
    if np.linalg.norm(big - big.conj().T) > tol * scale * big.shape[0]:
        raise ModelStructureError("coefficient set is not Hermitian in the joint (pair, basis) index")
    for u in range(k * k):
        for v in range(k * k):
            if u == v:
                continue
            off = float(np.abs(b[u, v]).max())
            if off > tol * scale:
                pair_u, pair_v = divmod(u, k), divmod(v, k)
                raise ModelStructureError(
                    f"pair-off-diagonal coefficients at (u, v) = ({pair_u}, {pair_v}) "
                    f"have magnitude {off:.3e}; not of rate-equation form"
                )
    if weights is None:
        weights = np.full(k, 1.0 / k)
    blocks = np.zeros((k, k, m, m), dtype=complex)
    for r in range(k):
        for rp in range(k):
            u = r * k + rp
            blocks[r, rp] = b[u, u]
    return LindbladRateModel(basis, weights, blocks, hamiltonians)


def build_from_correlations(
    chi: np.ndarray,
    tau: np.ndarray,
    system_hamiltonian: np.ndarray,
    basis: OperatorBasis,
    quadrature: str = "simpson",
    decay_tol: float = 1e-8,
    projection_tol: float = 1e-8,
) -> np.ndarray:
    """Half-line integrals of projected correlations into rate blocks.

    ``chi[R, R', k]`` is the ``m x m`` correlation matrix (indices
    ``alpha, beta``) sampled at ``-tau[k]`` on a uniform grid that must
    reach far enough for the correlations to have decayed.  Heisenberg
    coefficients ``C(-tau)`` come from expanding the evolved basis
    operators back in the basis; each block is assembled as
    ``Z.T + conj(Z)`` with ``Z = integral chi(-tau) C(-tau) dtau``, which
    is Hermitian by construction.  Returns a ``(K, K, m, m)`` block array.
    """
    chi = np.asarray(chi, dtype=complex)
    tau = np.asarray(tau, dtype=float)
    m, d = basis.size, basis.dim
    if (
        chi.ndim != 5
        or chi.shape[0] != chi.shape[1]
        or chi.shape[2] != tau.shape[0]
        or chi.shape[3:] != (m, m)
    ):
        raise ValueError(f"chi must be (K, K, n_tau, m, m) matching tau, got {chi.shape}")
    k = chi.shape[0]
    if tau.shape[0] < 3 or tau[0] != 0.0:
        raise ValueError("tau grid must start at 0 with at least 3 points")
    steps = np.diff(tau)
    if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * steps[0]:
        raise ValueError("tau grid must be uniform and strictly increasing")
    if quadrature not in ("simpson", "trapezoid"):
        raise ValueError(f"unknown quadrature {quadrature!r}")

    for r in range(k):
        for rp in range(k):
            peak = float(np.abs(chi[r, rp]).max())
            if peak == 0.0:
                continue
            tail = float(np.abs(chi[r, rp, -1]).max())
            if tail > decay_tol * peak:
                raise MarkovDecayError(
                    f"correlations of pair ({r}, {rp}) retain {tail / peak:.3e} of their "
                    f"peak at the end of the window; the local-in-time reduction is invalid"
                )

    hs = np.asarray(system_hamiltonian, dtype=complex)
    if hermiticity_residual(hs) > 1e-10:
        raise ValueError("system Hamiltonian must be Hermitian")
    w, u = np.linalg.eigh(0.5 * (hs + hs.conj().T))

    coeffs = np.empty((tau.shape[0], m, m), dtype=complex)  # C[k][beta, gamma]
    for idx, t in enumerate(tau):
        phase = np.exp(-1j * t * w)
        left = (u * phase) @ u.conj().T  # exp(-i tau H)
        right = (u * phase.conj()) @ u.conj().T
        for beta in range(m):
            evolved = left @ basis.ops[beta] @ right
            c, resid = basis.expand(evolved)
            if resid > projection_tol * max(1.0, np.linalg.norm(basis.ops[beta])):
                raise ValueError(
                    f"evolved basis operator {beta} leaves the basis span at tau={t} "
                    f"(projection residual {resid:.3e})"
                )
            coeffs[idx, beta] = c

    blocks = np.zeros((k, k, m, m), dtype=complex)
    for r in range(k):
        for rp in range(k):
            integrand = chi[r, rp] @ coeffs  # (n_tau, m, m), indices (gamma, alpha)
            if quadrature == "simpson":
                z = scipy.integrate.simpson(integrand, x=tau, axis=0)
            else:
                z = np.trapezoid(integrand, x=tau, axis=0)
            blocks[r, rp] = z.T + z.conj()
    return blocks


def decompose_random_lindblad(model: LindbladRateModel, atol: float = 0.0):
    """Split a fully decoupled model into independent Lindblad generators.

    When every off-diagonal block vanishes the evolution is a statistical
    mixture: ``rho_S(t) = sum_R P_R exp(t L_R)[rho_S(0)]``.  Returns
    ``(generators, weights)`` in that case and ``None`` (refusal) whenever
    any off-diagonal block is nonzero beyond ``atol``.
    """
    k = model.num_channels
    for r in range(k):
        for rp in range(k):
            if r != rp and np.abs(model.blocks[r, rp]).max() > atol:
                return None
    gens = [channel_generator(model, r) for r in range(k)]
    return gens, model.weights.copy()
