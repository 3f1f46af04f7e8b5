"""Exact simulation of stochastic ensemble machines.

An ensemble machine runs many copies of a probabilistic machine in parallel.
At each step the *collection* of copy states makes a stochastic transition
that may condition on the entire history of collections (the model is wider
than a Markov chain), and reading out a symbol samples the symbol frequency
across copies.  Everything downstream of the transition structure only ever
consumes the per-collection readout distribution, so a collection may be an
explicit tuple of copy states or an opaque label with an attached readout
distribution; both constructions are supported.

All computations here are exact enumerations of the chain-rule product, with
a trajectory cap guarding against combinatorial blowup.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Mapping, Sequence

import numpy as np

from .entropy import (
    ExperimentPlan,
    ReadoutStats,
    ViolationReport,
    _check_distribution,
    evaluate_inequality,
)
from .errors import (
    ConfigError,
    IncompleteKernelError,
    SpecFormatError,
    TractabilityError,
)

Collection = tuple[str, ...]
History = tuple[Collection, ...]

INITIAL_DIST_TOL = 1e-12
KERNEL_ROW_TOL = 1e-12
MAX_TRAJECTORIES = 1_000_000


def _as_collection(key) -> Collection:
    if isinstance(key, str):
        return (key,)
    return tuple(key)


@dataclass(frozen=True)
class EnsembleSpec:
    """State collections, their readout distributions, and the initial law."""

    symbols: tuple[str, ...]
    collections: tuple[Collection, ...]
    readouts: Mapping[Collection, np.ndarray]
    initial: Mapping[Collection, float]
    num_copies: int | None = None
    states: tuple[str, ...] | None = None
    readout_map: Mapping[str, str] | None = None

    def __post_init__(self) -> None:
        if len(set(self.symbols)) != len(self.symbols):
            raise ConfigError("symbols must be distinct")
        known = set(self.collections)
        for c in self.initial:
            if c not in known:
                raise ConfigError(f"initial distribution names unknown collection {c}")
        total = sum(self.initial.values())
        if abs(total - 1.0) > INITIAL_DIST_TOL or any(p < 0 for p in self.initial.values()):
            raise ConfigError(
                f"initial distribution sums to {total!r}, must be 1 within {INITIAL_DIST_TOL}"
            )
        for c in self.collections:
            vec = np.asarray(self.readouts[c], dtype=float)
            if vec.shape != (len(self.symbols),):
                raise ConfigError(f"readout distribution of {c} has wrong length")
            if np.any(vec < 0) or abs(float(vec.sum()) - 1.0) > INITIAL_DIST_TOL:
                raise ConfigError(f"readout distribution of {c} is not normalized")

    def readout_vector(self, collection: Collection) -> np.ndarray:
        try:
            return np.asarray(self.readouts[collection], dtype=float)
        except KeyError:
            raise ConfigError(f"unknown collection {collection}") from None

    @classmethod
    def from_copies(
        cls,
        num_copies: int,
        states: Sequence[str],
        symbols: Sequence[str],
        readout_map: Mapping[str, str],
        initial: Mapping[Collection, float],
        collections: Sequence[Collection] | None = None,
    ) -> "EnsembleSpec":
        """Ensemble of explicit copy-state tuples with a deterministic
        per-copy readout; collection readout distributions are the exact
        symbol frequencies across copies."""
        states = tuple(states)
        symbols = tuple(symbols)
        missing = [s for s in states if s not in readout_map]
        if missing:
            raise ConfigError(f"readout_map is not total: missing {missing}")
        bad = [s for s, m in readout_map.items() if m not in symbols]
        if bad:
            raise ConfigError(f"readout_map targets unknown symbols for states {bad}")
        if collections is None:
            collections = tuple(initial.keys())
        collections = tuple(_as_collection(c) for c in collections)
        for c in collections:
            if len(c) != num_copies or any(s not in states for s in c):
                raise ConfigError(f"collection {c} is not a {num_copies}-tuple of states")
        readouts = {}
        for c in collections:
            freqs = readout_frequencies(c, readout_map, symbols)
            readouts[c] = np.array([float(freqs[m]) for m in symbols])
        return cls(
            symbols=symbols,
            collections=collections,
            readouts=readouts,
            initial={_as_collection(c): p for c, p in initial.items()},
            num_copies=num_copies,
            states=states,
            readout_map=dict(readout_map),
        )

    @classmethod
    def from_readouts(
        cls,
        symbols: Sequence[str],
        readouts: Mapping[object, Sequence[float]],
        initial: Mapping[object, float],
    ) -> "EnsembleSpec":
        """Opaque collections carrying arbitrary readout distributions (the
        stand-in for the infinite-copy limit)."""
        symbols = tuple(symbols)
        table = {_as_collection(k): np.asarray(v, dtype=float) for k, v in readouts.items()}
        return cls(
            symbols=symbols,
            collections=tuple(table.keys()),
            readouts=table,
            initial={_as_collection(k): p for k, p in initial.items()},
        )


def readout_frequencies(
    collection: Collection, readout_map: Mapping[str, str], symbols: Sequence[str]
) -> dict[str, Fraction]:
    """Exact symbol frequencies across the copies of a collection."""
    n = len(collection)
    counts = {m: 0 for m in symbols}
    for s in collection:
        counts[readout_map[s]] += 1
    return {m: Fraction(c, n) for m, c in counts.items()}


def readout_distribution(spec: EnsembleSpec, collection: Collection) -> dict:
    """Symbol distribution read from one collection.

    Copy-built ensembles give exact rational frequencies; opaque ensembles
    return their stored (float) distributions.
    """
    collection = _as_collection(collection)
    if spec.readout_map is not None:
        return readout_frequencies(collection, spec.readout_map, spec.symbols)
    vec = spec.readout_vector(collection)
    return {m: float(v) for m, v in zip(spec.symbols, vec)}


@dataclass(frozen=True)
class TransitionKernel:
    """History-conditioned transition law over collections.

    ``order`` bounds how much history a transition may condition on
    (``None`` = the full history, i.e. beyond any Markov chain).  Tables are
    keyed by the chronological history tuple truncated to the order; one
    table per step, or a single shared table for stationary kernels.
    """

    order: int | None
    step_tables: tuple[Mapping[History, Mapping[Collection, float]], ...]
    stationary: bool = False

    def __post_init__(self) -> None:
        if self.order is not None and self.order < 1:
            raise ConfigError(f"kernel order must be >= 1 or None, got {self.order}")
        if not self.step_tables:
            raise ConfigError("kernel needs at least one table")
        for table in self.step_tables:
            for hist, dist in table.items():
                total = sum(dist.values())
                if abs(total - 1.0) > KERNEL_ROW_TOL or any(p < 0 for p in dist.values()):
                    raise ConfigError(
                        f"kernel row for history {hist} sums to {total!r}"
                    )

    @classmethod
    def stationary_kernel(
        cls, table: Mapping[History, Mapping[Collection, float]], order: int | None = 1
    ) -> "TransitionKernel":
        return cls(order=order, step_tables=(dict(table),), stationary=True)

    @classmethod
    def per_step(
        cls,
        tables: Sequence[Mapping[History, Mapping[Collection, float]]],
        order: int | None = 1,
    ) -> "TransitionKernel":
        return cls(order=order, step_tables=tuple(dict(t) for t in tables), stationary=False)

    def history_key(self, history: History) -> History:
        if self.order is None:
            return history
        return history[-self.order:]

    def distribution(self, step: int, history: History) -> Mapping[Collection, float]:
        """Next-collection law at ``step`` (1-based) for a given history."""
        if self.stationary:
            table = self.step_tables[0]
        else:
            if step > len(self.step_tables):
                raise IncompleteKernelError(
                    f"kernel defines {len(self.step_tables)} steps, step {step} requested"
                )
            table = self.step_tables[step - 1]
        key = self.history_key(history)
        try:
            return table[key]
        except KeyError:
            raise IncompleteKernelError(
                f"no kernel entry at step {step} for history {key}"
            ) from None


def joint_state_distribution(
    spec: EnsembleSpec,
    kernel: TransitionKernel,
    steps: int,
    max_trajectories: int = MAX_TRAJECTORIES,
) -> dict[History, float]:
    """Exact chain-rule product over all collection trajectories.

    Zero-probability branches are pruned; exceeding ``max_trajectories``
    raises rather than silently truncating.
    """
    if steps < 0:
        raise ConfigError(f"steps must be nonnegative, got {steps}")
    frontier: dict[History, float] = {
        (c,): p for c, p in spec.initial.items() if p > 0.0
    }
    for j in range(1, steps + 1):
        extended: dict[History, float] = {}
        for history, prob in frontier.items():
            for nxt, q in kernel.distribution(j, history).items():
                if q > 0.0:
                    extended[history + (_as_collection(nxt),)] = prob * q
            if len(extended) > max_trajectories:
                raise TractabilityError(
                    f"more than {max_trajectories} trajectories at step {j};"
                    " use the sampling path instead"
                )
        frontier = extended
    return frontier


@dataclass(frozen=True)
class GrandJoint:
    """Full distribution over readout-symbol sequences, one axis per step."""

    symbols: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=float)
        _check_distribution(probs, "grand joint")
        expected = (len(self.symbols),) * probs.ndim
        if probs.shape != expected:
            raise ConfigError(f"grand joint shape {probs.shape} != {expected}")
        object.__setattr__(self, "probs", probs)

    @property
    def last_step(self) -> int:
        return self.probs.ndim - 1


def grand_joint(
    spec: EnsembleSpec,
    kernel: TransitionKernel,
    steps: int,
    max_trajectories: int = MAX_TRAJECTORIES,
) -> GrandJoint:
    """Marginalize collection trajectories against per-step readouts."""
    n = len(spec.symbols)
    if n ** (steps + 1) > max_trajectories:
        raise TractabilityError(
            f"symbol-sequence space {n}^{steps + 1} exceeds {max_trajectories}"
        )
    trajectories = joint_state_distribution(spec, kernel, steps, max_trajectories)
    total = np.zeros((n,) * (steps + 1))
    for history, prob in trajectories.items():
        vectors = [spec.readout_vector(c) for c in history]
        total += prob * reduce(np.multiply.outer, vectors)
    return GrandJoint(symbols=spec.symbols, probs=total)


def conditional_readouts(grand: GrandJoint) -> ReadoutStats:
    """Pairwise joints and marginals needed by the readout inequality."""
    L = grand.last_step
    probs = grand.probs
    axes = range(L + 1)

    def pair(l: int, lp: int) -> np.ndarray:
        other = tuple(ax for ax in axes if ax not in (l, lp))
        return probs.sum(axis=other)

    joints = {(j - 1, j): pair(j - 1, j) for j in range(1, L + 1)}
    if L > 1:
        joints[(0, L)] = pair(0, L)
    marginals = {
        l: probs.sum(axis=tuple(ax for ax in axes if ax != l)) for l in axes
    }
    return ReadoutStats(
        symbols=grand.symbols, last_step=L, joints=joints, marginals=marginals
    )


def markov_readout_stats(
    symbols: Sequence[str],
    initial: np.ndarray,
    step_matrices: Sequence[np.ndarray],
) -> ReadoutStats:
    """Exact pairwise readout statistics of a symbol-valued Markov chain.

    Equivalent to ``conditional_readouts(grand_joint(...))`` for the chain
    whose collections are the symbols themselves, but computed by forward
    propagation so it stays tractable for hundreds of steps.
    """
    initial = np.asarray(initial, dtype=float)
    marginals = {0: initial}
    joints = {}
    current = initial
    product = np.eye(len(initial))
    for j, matrix in enumerate(step_matrices, start=1):
        matrix = np.asarray(matrix, dtype=float)
        joints[(j - 1, j)] = current[:, None] * matrix
        product = product @ matrix
        current = current @ matrix
        marginals[j] = current
    L = len(step_matrices)
    if L > 1:
        joints[(0, L)] = initial[:, None] * product
    return ReadoutStats(
        symbols=tuple(symbols), last_step=L, joints=joints, marginals=marginals
    )


@dataclass(frozen=True)
class ImitationResult:
    """Outcome of fitting an ensemble machine to quantum step conditionals."""

    spec: EnsembleSpec
    kernel: TransitionKernel
    step_targets: tuple[np.ndarray, ...]
    residual: float
    classical_end_to_end: np.ndarray
    classical_report: ViolationReport
    quantum_end_to_end: np.ndarray | None = None

    @property
    def end_gap(self) -> float | None:
        """Largest entrywise gap between the composed classical end-to-end
        conditional and the quantum one (the failure of the imitation)."""
        if self.quantum_end_to_end is None:
            return None
        return float(
            np.max(np.abs(self.classical_end_to_end - self.quantum_end_to_end))
        )


def fit_imitation(
    step_targets: Sequence[np.ndarray],
    initial: np.ndarray,
    symbols: Sequence[str] = ("target", "rest"),
    quantum_end_to_end: np.ndarray | None = None,
    max_trajectories: int = MAX_TRAJECTORIES,
) -> ImitationResult:
    """Construct the ensemble machine matching all adjacent conditionals.

    A Markov chain over symbol-valued collections with the target matrices
    as its kernel always reproduces every adjacent conditional exactly; the
    reported residual is obtained back through the readout machinery (full
    enumeration when tractable, forward propagation otherwise).  The
    composed classical end-to-end conditional is what fails to match the
    quantum one.
    """
    symbols = tuple(symbols)
    n = len(symbols)
    targets = [np.asarray(t, dtype=float) for t in step_targets]
    for t in targets:
        if t.shape != (n, n):
            raise ConfigError(f"step matrix shape {t.shape} != {(n, n)}")
        if np.any(t < 0) or np.max(np.abs(t.sum(axis=1) - 1.0)) > 1e-12:
            raise ConfigError("step matrices must be row-stochastic")
    initial = np.asarray(initial, dtype=float)
    L = len(targets)

    labels = [(m,) for m in symbols]
    spec = EnsembleSpec.from_readouts(
        symbols=symbols,
        readouts={lab: np.eye(n)[i] for i, lab in enumerate(labels)},
        initial={lab: float(initial[i]) for i, lab in enumerate(labels)},
    )
    tables = []
    for t in targets:
        tables.append(
            {
                (lab,): {labels[j]: float(t[i, j]) for j in range(n)}
                for i, lab in enumerate(labels)
            }
        )
    kernel = TransitionKernel.per_step(tables, order=1)

    if n ** (L + 1) <= max_trajectories:
        stats = conditional_readouts(grand_joint(spec, kernel, L, max_trajectories))
    else:
        stats = markov_readout_stats(symbols, initial, targets)

    residual = 0.0
    for j in range(1, L + 1):
        cond, defined = stats.conditional(j - 1, j)
        if defined.any():
            residual = max(
                residual, float(np.max(np.abs(cond[defined] - targets[j - 1][defined])))
            )

    composed = reduce(np.matmul, targets)
    plan = ExperimentPlan.from_counts(n_c=L, L=L, n_d=L)
    report = evaluate_inequality(stats, plan)
    return ImitationResult(
        spec=spec,
        kernel=kernel,
        step_targets=tuple(targets),
        residual=residual,
        classical_end_to_end=composed,
        classical_report=report,
        quantum_end_to_end=(
            None if quantum_end_to_end is None else np.asarray(quantum_end_to_end, dtype=float)
        ),
    )


def random_ensemble(
    rng: np.random.Generator,
    max_collections: int = 3,
    max_steps: int = 3,
    symbols: Sequence[str] = ("tau", "not_tau"),
) -> tuple[EnsembleSpec, TransitionKernel, int]:
    """Random ensemble machine for property tests.

    Mixes Markov, finite-order, and full-history kernels, opaque and
    copy-built readouts, and occasionally sparse initial laws.
    """
    symbols = tuple(symbols)
    n_coll = int(rng.integers(2, max_collections + 1))
    steps = int(rng.integers(1, max_steps + 1))
    order = [1, 2, None][int(rng.integers(0, 3))]

    if rng.random() < 0.5:
        labels = [(f"c{i}",) for i in range(n_coll)]
        readouts = {lab: rng.dirichlet(np.ones(len(symbols))) for lab in labels}
    else:
        states = ("a", "b", "c")[: max(2, len(symbols))]
        num_copies = int(rng.integers(2, 5))
        seen: set[Collection] = set()
        while len(seen) < n_coll:
            seen.add(tuple(states[i] for i in rng.integers(0, len(states), num_copies)))
        labels = sorted(seen)
        readout_map = {s: symbols[int(rng.integers(0, len(symbols)))] for s in states}
        freq_spec = EnsembleSpec.from_copies(
            num_copies=num_copies,
            states=states,
            symbols=symbols,
            readout_map=readout_map,
            initial={labels[0]: 1.0},
            collections=labels,
        )
        readouts = {lab: freq_spec.readout_vector(lab) for lab in labels}

    weights = rng.dirichlet(np.ones(n_coll))
    if n_coll > 1 and rng.random() < 0.3:
        weights[int(rng.integers(0, n_coll))] = 0.0
        weights = weights / weights.sum()
    initial = {lab: float(w) for lab, w in zip(labels, weights)}
    spec = EnsembleSpec.from_readouts(symbols, readouts, initial)
    # from_readouts re-wraps labels; recover its canonical collections
    labels = list(spec.collections)

    tables = []
    reachable = {(lab,) for lab, w in spec.initial.items() if w > 0}
    kernel_probe = TransitionKernel(order=order, step_tables=({},), stationary=True)
    for _ in range(steps):
        table: dict[History, dict[Collection, float]] = {}
        next_reachable: set[History] = set()
        for history in reachable:
            key = kernel_probe.history_key(history)
            if key not in table:
                row = rng.dirichlet(np.ones(n_coll))
                table[key] = {lab: float(p) for lab, p in zip(labels, row)}
            for lab, p in table[key].items():
                if p > 0:
                    next_reachable.add(history + (lab,))
        tables.append(table)
        reachable = next_reachable
    kernel = TransitionKernel.per_step(tables, order=order)
    return spec, kernel, steps


# ---------------------------------------------------------------------------
# Declarative ensemble files
# ---------------------------------------------------------------------------

ENSEMBLE_SCHEMA_VERSION = 1


def _collection_key(c: Collection, copy_mode: bool) -> str:
    return ",".join(c) if copy_mode else c[0]


def _parse_collection(key: str, copy_mode: bool) -> Collection:
    return tuple(key.split(",")) if copy_mode else (key,)


def _parse_history(key: str, copy_mode: bool) -> History:
    return tuple(_parse_collection(part, copy_mode) for part in key.split("|"))


def load_ensemble(document: dict) -> tuple[EnsembleSpec, TransitionKernel, int | None]:
    """Build an ensemble machine from its declarative JSON document.

    See README for the schema.  Returns the spec, the kernel, and the
    optional number of steps declared in the file.
    """
    try:
        version = document["schema_version"]
        symbols = tuple(document["symbols"])
        ens = document["ensemble"]
        kern = document["kernel"]
        mode = ens["mode"]
    except (KeyError, TypeError) as exc:
        raise SpecFormatError(f"missing required field: {exc}") from exc
    if version != ENSEMBLE_SCHEMA_VERSION:
        raise SpecFormatError(f"unsupported schema_version {version}")

    copy_mode = mode == "copies"
    try:
        if copy_mode:
            initial = {
                _parse_collection(k, True): float(v) for k, v in ens["initial"].items()
            }
            declared = ens.get("collections")
            collections = (
                [_parse_collection(k, True) for k in declared]
                if declared
                else None
            )
            spec = EnsembleSpec.from_copies(
                num_copies=int(ens["num_copies"]),
                states=tuple(ens["states"]),
                symbols=symbols,
                readout_map=dict(ens["readout_map"]),
                initial=initial,
                collections=collections,
            )
        elif mode == "readouts":
            spec = EnsembleSpec.from_readouts(
                symbols=symbols,
                readouts={k: list(map(float, v)) for k, v in ens["collections"].items()},
                initial={k: float(v) for k, v in ens["initial"].items()},
            )
        else:
            raise SpecFormatError(f"unknown ensemble mode {mode!r}")

        order_field = kern.get("order", 1)
        order = None if order_field == "full" else int(order_field)

        def parse_table(raw: dict) -> dict[History, dict[Collection, float]]:
            return {
                _parse_history(hk, copy_mode): {
                    _parse_collection(ck, copy_mode): float(p) for ck, p in row.items()
                }
                for hk, row in raw.items()
            }

        if kern.get("stationary", False):
            kernel = TransitionKernel.stationary_kernel(parse_table(kern["tables"]), order)
        else:
            kernel = TransitionKernel.per_step(
                [parse_table(t) for t in kern["tables"]], order
            )
    except SpecFormatError:
        raise
    except (KeyError, TypeError, ValueError, ConfigError) as exc:
        raise SpecFormatError(f"malformed ensemble document: {exc}") from exc

    steps = document.get("steps")
    return spec, kernel, None if steps is None else int(steps)


def load_ensemble_file(path: str) -> tuple[EnsembleSpec, TransitionKernel, int | None]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            document = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecFormatError(f"{path} is not valid JSON: {exc}") from exc
    return load_ensemble(document)


def dump_ensemble(
    spec: EnsembleSpec, kernel: TransitionKernel, steps: int | None = None
) -> dict:
    """Inverse of ``load_ensemble`` for the supported constructions."""
    copy_mode = spec.readout_map is not None
    if copy_mode:
        ens = {
            "mode": "copies",
            "num_copies": spec.num_copies,
            "states": list(spec.states),
            "readout_map": dict(spec.readout_map),
            "collections": [_collection_key(c, True) for c in spec.collections],
            "initial": {
                _collection_key(c, True): p for c, p in spec.initial.items()
            },
        }
    else:
        ens = {
            "mode": "readouts",
            "collections": {
                _collection_key(c, False): [float(x) for x in spec.readout_vector(c)]
                for c in spec.collections
            },
            "initial": {
                _collection_key(c, False): p for c, p in spec.initial.items()
            },
        }

    def dump_table(table) -> dict:
        return {
            "|".join(_collection_key(c, copy_mode) for c in hist): {
                _collection_key(c, copy_mode): p for c, p in row.items()
            }
            for hist, row in table.items()
        }

    kern = {
        "order": "full" if kernel.order is None else kernel.order,
        "stationary": kernel.stationary,
        "tables": (
            dump_table(kernel.step_tables[0])
            if kernel.stationary
            else [dump_table(t) for t in kernel.step_tables]
        ),
    }
    document = {
        "schema_version": ENSEMBLE_SCHEMA_VERSION,
        "symbols": list(spec.symbols),
        "ensemble": ens,
        "kernel": kern,
    }
    if steps is not None:
        document["steps"] = steps
    return document
