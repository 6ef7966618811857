"""Run configuration parsing and result-table serialization.

Configs are JSON.  Complex scalars are two-element ``[re, im]`` arrays
(bare numbers are taken as real); matrices are nested row arrays.  Tables
are written as CSV with 17 significant digits so values roundtrip
bit-exactly through text.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .model import LindbladRateModel, OperatorBasis, build_from_correlations, reduce_from_tripartite
from .qubit import PRESETS, dephasing_model
from .stochastic import StochasticModel, convert_walk_to_rate_model

__all__ = ["ConfigError", "RunConfig", "OutputTable", "parse_config", "load_config", "emit_csv"]


class ConfigError(ValueError):
    """Schema or invariant violation, carrying the offending field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise ConfigError(f"{path}.{key}", "missing required field")
    return obj[key]


def _complex_scalar(value, path: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, list) and len(value) == 2 and all(isinstance(x, (int, float)) for x in value):
        return complex(value[0], value[1])
    raise ConfigError(path, f"expected a number or [re, im] pair, got {value!r}")


def _matrix(value, path: str) -> np.ndarray:
    if not isinstance(value, list) or not value or not all(isinstance(row, list) for row in value):
        raise ConfigError(path, "expected a matrix as a list of rows")
    rows = []
    width = None
    for i, row in enumerate(value):
        entries = [_complex_scalar(x, f"{path}[{i}][{j}]") for j, x in enumerate(row)]
        if width is None:
            width = len(entries)
        elif len(entries) != width:
            raise ConfigError(f"{path}[{i}]", "ragged matrix rows")
        rows.append(entries)
    return np.array(rows, dtype=complex)


def _matrix_list(value, path: str) -> list[np.ndarray]:
    if not isinstance(value, list):
        raise ConfigError(path, "expected a list of matrices")
    return [_matrix(m, f"{path}[{i}]") for i, m in enumerate(value)]


@dataclass
class ModelSource:
    """Parsed ``model`` section; materialized lazily by :meth:`build`."""

    kind: str  # preset | rate | walk | tripartite | correlations
    payload: dict

    def preset_name(self) -> str | None:
        return self.payload.get("name") if self.kind == "preset" else None

    def build(self):
        """Return ``(LindbladRateModel, StochasticModel | None)``."""
        if self.kind == "preset":
            return dephasing_model(PRESETS[self.payload["name"]])
        if self.kind == "walk":
            walk = self.payload["walk"]
            return convert_walk_to_rate_model(walk, walk.basis), walk
        return self.payload["rate"], None


@dataclass
class RunConfig:
    model: ModelSource
    initial_state: np.ndarray
    grid: np.ndarray
    engine: str = "deterministic"
    trajectories: int | None = None
    seed: int | None = None
    output: str | None = None
    rtol: float = 1e-9
    psd_tol: float = 1e-8
    kernel_points: list[complex] = field(default_factory=list)
    workers: int = 1


_DEFAULT_STATE = np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex)  # +x projector


def _parse_grid(section, path: str) -> np.ndarray:
    if not isinstance(section, dict):
        raise ConfigError(path, "expected an object with stop/count")
    stop = _require(section, "stop", path)
    count = _require(section, "count", path)
    spacing = section.get("spacing", "linear")
    if not isinstance(stop, (int, float)) or stop <= 0:
        raise ConfigError(f"{path}.stop", "must be a positive number")
    if not isinstance(count, int) or count < 2:
        raise ConfigError(f"{path}.count", "must be an integer >= 2")
    if spacing == "linear":
        return np.linspace(0.0, float(stop), count)
    if spacing == "log":
        decades = section.get("decades", 4)
        inner = np.geomspace(float(stop) * 10.0 ** (-decades), float(stop), count - 1)
        return np.concatenate([[0.0], inner])
    raise ConfigError(f"{path}.spacing", f"must be 'linear' or 'log', got {spacing!r}")


def _parse_basis(section, path: str) -> OperatorBasis:
    try:
        return OperatorBasis(np.array(_matrix_list(section, path)))
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def _parse_rate_model(section, path: str) -> LindbladRateModel:
    basis = _parse_basis(_require(section, "basis", path), f"{path}.basis")
    weights = np.asarray(_require(section, "weights", path), dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-10:
        raise ConfigError(f"{path}.weights", f"weights must be nonnegative and sum to 1, got {weights.tolist()}")
    diagonal = [_matrix(m, f"{path}.diagonal_blocks[{i}]") for i, m in enumerate(_require(section, "diagonal_blocks", path))]
    offdiag = {}
    for i, ent in enumerate(section.get("offdiagonal_blocks", [])):
        epath = f"{path}.offdiagonal_blocks[{i}]"
        r, rp = _require(ent, "to", epath), _require(ent, "from", epath)
        offdiag[(r, rp)] = _matrix(_require(ent, "block", epath), f"{epath}.block")
    hams = None
    if "hamiltonians" in section:
        hams = np.array(_matrix_list(section["hamiltonians"], f"{path}.hamiltonians"))
    sys_h = _matrix(section["system_hamiltonian"], f"{path}.system_hamiltonian") if "system_hamiltonian" in section else None
    try:
        return LindbladRateModel.from_blocks(basis, weights, np.array(diagonal), offdiag, hams, sys_h)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def _parse_walk_model(section, path: str) -> StochasticModel:
    basis = _parse_basis(_require(section, "basis", path), f"{path}.basis")
    kraus = [
        _matrix_list(ops, f"{path}.jump_kraus[{i}]") for i, ops in enumerate(_require(section, "jump_kraus", path))
    ]
    try:
        return StochasticModel(
            basis=basis,
            hamiltonian=_matrix(_require(section, "hamiltonian", path), f"{path}.hamiltonian"),
            dissipator_blocks=np.array(_matrix_list(_require(section, "channel_dissipators", path), f"{path}.channel_dissipators")),
            hop_rates=np.asarray(_require(section, "hop_rates", path), dtype=float),
            kraus_maps=kraus,
            weights=np.asarray(_require(section, "weights", path), dtype=float),
        )
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def _parse_model(section, path: str) -> ModelSource:
    if not isinstance(section, dict):
        raise ConfigError(path, "expected an object")
    kind = _require(section, "type", path)
    if kind == "preset":
        name = _require(section, "name", path)
        if name not in PRESETS:
            raise ConfigError(f"{path}.name", f"unknown preset {name!r}; available: {sorted(PRESETS)}")
        return ModelSource("preset", {"name": name})
    if kind == "rate":
        return ModelSource("rate", {"rate": _parse_rate_model(section, path)})
    if kind == "walk":
        return ModelSource("walk", {"walk": _parse_walk_model(section, path)})
    if kind == "tripartite":
        basis = _parse_basis(_require(section, "basis", path), f"{path}.basis")
        k = _require(section, "channels", path)
        raw = _require(section, "b", path)
        m = basis.size
        b = np.zeros((k * k, k * k, m, m), dtype=complex)
        for i, ent in enumerate(raw):
            epath = f"{path}.b[{i}]"
            u, v = _require(ent, "u", epath), _require(ent, "v", epath)
            b[u[0] * k + u[1], v[0] * k + v[1]] = _matrix(_require(ent, "block", epath), f"{epath}.block")
        weights = np.asarray(section["weights"], dtype=float) if "weights" in section else None
        try:
            return ModelSource("rate", {"rate": reduce_from_tripartite(b, k, basis, weights)})
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from exc
    if kind == "correlations":
        basis = _parse_basis(_require(section, "basis", path), f"{path}.basis")
        tau = np.asarray(_require(section, "tau", path), dtype=float)
        chi = np.asarray(_require(section, "chi", path), dtype=complex)
        h_sys = _matrix(_require(section, "system_hamiltonian", path), f"{path}.system_hamiltonian")
        weights = np.asarray(_require(section, "weights", path), dtype=float)
        try:
            blocks = build_from_correlations(chi, tau, h_sys, basis, section.get("quadrature", "simpson"))
            model = LindbladRateModel(basis, weights, blocks, None, h_sys)
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from exc
        return ModelSource("rate", {"rate": model})
    raise ConfigError(f"{path}.type", f"unknown model type {kind!r}")


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON run configuration."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"JSON syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("$", "top level must be an object")

    model = _parse_model(_require(raw, "model", "$"), "$.model")
    grid = _parse_grid(_require(raw, "grid", "$"), "$.grid")
    state = _matrix(raw["initial_state"], "$.initial_state") if "initial_state" in raw else _DEFAULT_STATE.copy()

    engine = raw.get("engine", "deterministic")
    if engine not in ("deterministic", "stochastic", "both"):
        raise ConfigError("$.engine", f"must be deterministic|stochastic|both, got {engine!r}")
    trajectories = raw.get("trajectories")
    seed = raw.get("seed")
    if engine in ("stochastic", "both"):
        if trajectories is None or not isinstance(trajectories, int) or trajectories < 1:
            raise ConfigError("$.trajectories", "stochastic runs need an integer trajectory count >= 1")
        if seed is None or not isinstance(seed, int):
            raise ConfigError("$.seed", "stochastic runs need an integer master seed")

    tols = raw.get("tolerances", {})
    rtol = float(tols.get("rtol", 1e-9))
    psd_tol = float(tols.get("psd", 1e-8))

    kernel_points = [_complex_scalar(u, f"$.kernel_u[{i}]") for i, u in enumerate(raw.get("kernel_u", []))]
    workers = raw.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError("$.workers", "must be an integer >= 1")

    tr = np.trace(state)
    if abs(tr - 1.0) > 1e-10:
        raise ConfigError("$.initial_state", f"trace {tr} must be 1")

    return RunConfig(
        model=model,
        initial_state=state,
        grid=grid,
        engine=engine,
        trajectories=trajectories,
        seed=seed,
        output=raw.get("output"),
        rtol=rtol,
        psd_tol=psd_tol,
        kernel_points=kernel_points,
        workers=workers,
    )


def load_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


@dataclass
class OutputTable:
    """Column-schema'd table of real observables, one row per grid point."""

    columns: list[str]
    rows: np.ndarray  # (T, C) float64

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=float)
        if self.rows.size and self.rows.shape[1] != len(self.columns):
            raise ValueError("row width does not match column count")
        if self.rows.size and not np.all(np.isfinite(self.rows)):
            raise ValueError("table contains non-finite values")


def emit_csv(table: OutputTable, path: str) -> None:
    """Write a table as CSV with 17-significant-digit decimal text."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(table.columns) + "\n")
        for row in table.rows:
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


def _observable_columns(dim: int) -> list[str]:
    cols = [f"pop_{i}" for i in range(dim)]
    for i in range(dim):
        for j in range(i + 1, dim):
            cols += [f"coh_{i}{j}_re", f"coh_{i}{j}_im"]
    return cols


def _observable_values(states: np.ndarray) -> np.ndarray:
    """Map (T, d, d) states to the named real observable columns."""
    d = states.shape[1]
    cols = [states[:, i, i].real for i in range(d)]
    for i in range(d):
        for j in range(i + 1, d):
            cols += [states[:, i, j].real, states[:, i, j].imag]
    return np.stack(cols, axis=1)


def deterministic_table(result) -> OutputTable:
    """Table for an :class:`~lindbladrate.solver.EvolutionResult`."""
    d, k = result.dim, result.num_channels
    columns = ["t"] + _observable_columns(d) + [f"trace_ch{r}" for r in range(k)] + ["min_eig"]
    data = np.concatenate(
        [
            result.times[:, None],
            _observable_values(result.system),
            result.channel_traces(),
            result.min_eigenvalue[:, None],
        ],
        axis=1,
    )
    return OutputTable(columns, data)


def stochastic_table(acc) -> OutputTable:
    """Table for an :class:`~lindbladrate.stochastic.EnsembleAccumulator`,
    with a standard-error column per observable."""
    d, k = acc.dim, acc.num_channels
    system = acc.system_estimate()
    se_re, se_im = acc.system_standard_error()
    min_eig = np.array([np.linalg.eigvalsh(0.5 * (s + s.conj().T))[0] for s in system])
    obs_cols = _observable_columns(d)
    columns = ["t"] + obs_cols + [f"trace_ch{r}" for r in range(k)] + ["min_eig"]
    columns += [f"se_{c}" for c in obs_cols]
    se_vals = [se_re[:, i, i] for i in range(d)]
    for i in range(d):
        for j in range(i + 1, d):
            se_vals += [se_re[:, i, j], se_im[:, i, j]]
    data = np.concatenate(
        [
            acc.grid[:, None],
            _observable_values(system),
            acc.channel_occupation(),
            min_eig[:, None],
            np.stack(se_vals, axis=1),
        ],
        axis=1,
    )
    return OutputTable(columns, data)
