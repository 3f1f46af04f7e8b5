"""Amplitude amplification restricted to the target/complement plane.

Everything here lives on the 2-dimensional span of the target state and its
orthogonal complement, so operators are plain 2x2 complex matrices.  Two
representations of the amplification step are provided:

* ``grover_full_matrix`` -- the reflection-product matrix parametrized by the
  initial success probability ``p0`` and the two reflection phases
  ``phi`` / ``phi_tau``.  The textbook small-``p0`` form of this matrix is a
  scalar multiple of a unitary (rows have norm ``1 + theta**2``); we return
  the rescaled, exactly unitary version so that repeated application
  conserves probability.
* ``grover_rotation`` -- the phase-matched limit ``-exp(i*theta*sigma_x)``,
  a rotation by ``theta`` per iteration.

Phase conventions: adjacent-step transition probabilities are identical in
both representations, and all derived observables compare squared moduli
only.  For state evolution the perpendicular amplitude carries a ``-1j``
phase in the sigma_x convention (see ``amplification_start``) so that the
usual success law ``sin(k*theta + asin(sqrt(p0)))**2`` holds.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DegenerateProblemError,
    NumericalInstabilityError,
    PlanError,
)

UNITARITY_TOL = 1e-10
STATE_NORM_TOL = 1e-12
NORM_DRIFT_LIMIT = 1e-9
PHASE_MATCH_TOL = 1e-9
SMALL_P0_LIMIT = 1e-2
GAMMA_IDENTITY_TOL = 1e-10

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


def closest_integer(x: float) -> int:
    """Closest integer to ``x``, rounding half away from zero.

    The tie-breaking rule matters only on exact half-integers, which never
    occur for generic rotation angles; it is fixed here for determinism.
    """
    if x >= 0:
        return int(math.floor(x + 0.5))
    return -int(math.floor(-x + 0.5))


def half_critical(n_c: int) -> int:
    """Halved iteration count, floored when ``n_c`` is odd."""
    return n_c // 2


@dataclass(frozen=True)
class TwoLevelState:
    """Normalized amplitude pair on the {target, complement} plane."""

    amp_target: complex
    amp_perp: complex

    def __post_init__(self) -> None:
        norm_sq = abs(self.amp_target) ** 2 + abs(self.amp_perp) ** 2
        if abs(norm_sq - 1.0) > STATE_NORM_TOL:
            raise ConfigError(
                f"state norm^2 = {norm_sq!r} deviates from 1 beyond {STATE_NORM_TOL}"
            )

    @property
    def prob_target(self) -> float:
        """Probability of reading the target symbol, |amp_target|^2."""
        return abs(self.amp_target) ** 2

    def as_vector(self) -> np.ndarray:
        return np.array([self.amp_target, self.amp_perp], dtype=complex)

    @staticmethod
    def basis_target() -> "TwoLevelState":
        return TwoLevelState(1.0 + 0.0j, 0.0j)

    @staticmethod
    def basis_perp() -> "TwoLevelState":
        return TwoLevelState(0.0j, 1.0 + 0.0j)


def amplification_start(p0: float, form: str = "full") -> TwoLevelState:
    """Initial state with target probability ``p0``.

    For ``form="rotation"`` (the sigma_x convention) the perpendicular
    amplitude is ``-1j*sqrt(1-p0)``: the complement absorbs a quarter-wave
    phase, which is what makes the rotation turn amplitude toward the target
    rather than away from it.  For ``form="full"`` the real pair is correct.
    """
    if not 0.0 <= p0 <= 1.0:
        raise ConfigError(f"p0 must lie in [0, 1], got {p0}")
    a = math.sqrt(p0)
    b = math.sqrt(1.0 - p0)
    if form == "rotation":
        return TwoLevelState(a + 0.0j, -1j * b)
    if form == "full":
        return TwoLevelState(a + 0.0j, b + 0.0j)
    raise ConfigError(f"unknown representation {form!r}")


@dataclass(frozen=True)
class Unitary2:
    """A 2x2 unitary, validated on construction."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.entries, dtype=complex)
        if m.shape != (2, 2):
            raise ConfigError(f"expected a 2x2 matrix, got shape {m.shape}")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)
        defect = np.max(np.abs(m @ m.conj().T - np.eye(2)))
        if defect > UNITARITY_TOL:
            raise ConfigError(
                f"matrix is not unitary: max |U U^dag - I| = {defect:.3e}"
            )

    @property
    def dagger(self) -> "Unitary2":
        return Unitary2(self.entries.conj().T)

    def __matmul__(self, other: "Unitary2") -> "Unitary2":
        return Unitary2(self.entries @ other.entries)

    def apply(self, state: TwoLevelState) -> TwoLevelState:
        vec = self.entries @ state.as_vector()
        return TwoLevelState(vec[0], vec[1])


@dataclass(frozen=True)
class MeasurementSetting:
    """Projective readout {target, everything else} on the plane."""

    projector_target: np.ndarray = field(
        default_factory=lambda: np.diag([1.0, 0.0]).astype(complex)
    )
    projector_rest: np.ndarray = field(
        default_factory=lambda: np.diag([0.0, 1.0]).astype(complex)
    )

    def __post_init__(self) -> None:
        for name, p in (("target", self.projector_target), ("rest", self.projector_rest)):
            if np.max(np.abs(p @ p - p)) > 1e-12:
                raise ConfigError(f"projector_{name} is not idempotent")
        if np.max(np.abs(self.projector_target + self.projector_rest - np.eye(2))) > 1e-12:
            raise ConfigError("projectors do not resolve the identity")

    @property
    def measurement_operator(self) -> np.ndarray:
        """The +/-1 observable: rest-projector minus target-projector."""
        return self.projector_rest - self.projector_target

    def outcome_probabilities(self, state: TwoLevelState) -> tuple[float, float]:
        vec = state.as_vector()
        p_t = float(np.real(vec.conj() @ self.projector_target @ vec))
        return p_t, 1.0 - p_t


@dataclass(frozen=True)
class QaaParams:
    """Problem parameters and derived quantities of the amplification run.

    ``theta`` is the per-iteration rotation angle ``2*sqrt(p0)*sin(phi/2)``,
    ``xi = phi - phi_tau`` the phase mismatch, and ``n_c`` the iteration
    count at which the target probability peaks.
    """

    p0: float
    phi: float
    phi_tau: float
    theta: float
    xi: float
    n_c: int

    def __post_init__(self) -> None:
        if self.p0 <= 0.0:
            raise DegenerateProblemError(
                "p0 = 0 leaves no target amplitude to amplify"
            )
        if self.p0 > 1.0:
            raise ConfigError(f"p0 must not exceed 1, got {self.p0}")
        for name, angle in (("phi", self.phi), ("phi_tau", self.phi_tau)):
            if not 0.0 < angle <= math.pi:
                raise ConfigError(f"{name} must lie in (0, pi], got {angle}")
        expected_theta = 2.0 * math.sqrt(self.p0) * math.sin(self.phi / 2.0)
        if abs(self.theta - expected_theta) > 1e-12:
            raise ConfigError(
                f"theta = {self.theta} inconsistent with 2*sqrt(p0)*sin(phi/2)"
                f" = {expected_theta}"
            )
        if abs(self.xi - (self.phi - self.phi_tau)) > 1e-12:
            raise ConfigError("xi inconsistent with phi - phi_tau")
        if self.n_c != critical_iterations_from(self.p0, self.theta):
            raise ConfigError("n_c inconsistent with the critical-count formula")
        if self.p0 > SMALL_P0_LIMIT:
            warnings.warn(
                f"p0 = {self.p0} is outside the small-p0 regime in which the"
                " reflection-product matrix is a faithful representation",
                stacklevel=3,
            )

    @property
    def phase_matched(self) -> bool:
        return abs(self.xi) < PHASE_MATCH_TOL

    @classmethod
    def from_problem(
        cls, p0: float, phi: float = math.pi, phi_tau: float = math.pi
    ) -> "QaaParams":
        if p0 <= 0.0:
            raise DegenerateProblemError(
                "p0 = 0 leaves no target amplitude to amplify"
            )
        theta = 2.0 * math.sqrt(p0) * math.sin(phi / 2.0)
        return cls(
            p0=p0,
            phi=phi,
            phi_tau=phi_tau,
            theta=theta,
            xi=phi - phi_tau,
            n_c=critical_iterations_from(p0, theta),
        )

    @classmethod
    def from_theta(
        cls, theta: float, phi: float = math.pi, phi_tau: float = math.pi
    ) -> "QaaParams":
        """Parameters with a prescribed rotation angle, solving for ``p0``."""
        if theta <= 0.0:
            raise ConfigError(f"theta must be positive, got {theta}")
        amp = theta / (2.0 * math.sin(phi / 2.0))
        return cls.from_problem(amp * amp, phi=phi, phi_tau=phi_tau)

    @classmethod
    def from_gamma(
        cls, gamma: float, phi: float = math.pi, phi_tau: float = math.pi
    ) -> "QaaParams":
        """Problem-scale convention ``theta = sqrt(10**-gamma)``."""
        if gamma <= 0:
            raise ConfigError(f"gamma must be positive, got {gamma}")
        return cls.from_theta(math.sqrt(10.0 ** (-gamma)), phi=phi, phi_tau=phi_tau)


def critical_iterations_from(p0: float, theta: float) -> int:
    if theta <= 0.0:
        raise ConfigError(f"theta must be positive, got {theta}")
    raw = closest_integer((math.pi / 2.0 - math.sqrt(p0)) / theta)
    # Guard for p0 close to 1, where the formula can round to zero.
    return max(1, raw)


def critical_iterations(params: QaaParams) -> int:
    """Iteration count maximizing the target probability."""
    return critical_iterations_from(params.p0, params.theta)


def grover_rotation(theta: float) -> Unitary2:
    """Phase-matched amplification step ``-exp(i*theta*sigma_x)``."""
    if not 0.0 <= theta <= math.pi / 2.0:
        raise ConfigError(f"theta must lie in [0, pi/2], got {theta}")
    c, s = math.cos(theta), math.sin(theta)
    return Unitary2(-np.array([[c, 1j * s], [1j * s, c]]))


def rotation_power_closed_form(theta: float, k: int) -> np.ndarray:
    """k-th power of the rotation step, evaluated by the angle-addition law."""
    c, s = math.cos(k * theta), math.sin(k * theta)
    sign = -1.0 if k % 2 else 1.0
    return sign * np.array([[c, 1j * s], [1j * s, c]])


def grover_full_matrix(params: QaaParams) -> Unitary2:
    """Reflection-product amplification step on the plane.

    The small-``p0`` matrix form has rows of norm ``sqrt(1 + theta**2)``; it
    is divided out so the result is exactly unitary and iterating it
    conserves probability.
    """
    if params.p0 <= 0.0:
        raise DegenerateProblemError("p0 = 0 leaves no target amplitude to amplify")
    root = math.sqrt(params.p0)
    off = 1.0 - np.exp(1j * params.phi)
    raw = np.array(
        [
            [-np.exp(1j * params.phi_tau), off * root],
            [off * np.exp(1j * params.phi_tau) * root, -np.exp(1j * params.phi)],
        ]
    )
    return Unitary2(raw / math.sqrt(1.0 + params.theta**2))


def effective_rotation_angle(params: QaaParams) -> float:
    """Exact per-iteration rotation angle of the rescaled full matrix.

    Equals ``atan(theta)``; the nominal ``theta`` is its small-angle limit.
    Only meaningful for phase-matched parameters.
    """
    if not params.phase_matched:
        raise PlanError("effective rotation angle requires phase matching (xi = 0)")
    return math.atan(params.theta)


def _raw_power(matrix: np.ndarray, k: int) -> np.ndarray:
    if k < 0:
        raise ConfigError(f"power must be nonnegative, got {k}")
    result = np.eye(2, dtype=complex)
    base = np.array(matrix, dtype=complex)
    n = k
    while n:
        if n & 1:
            result = result @ base
        base = base @ base
        n >>= 1
    return result


def matrix_power(u: Unitary2, k: int) -> Unitary2:
    """``u**k`` by repeated squaring (deterministic, no eigendecomposition)."""
    return Unitary2(_raw_power(u.entries, k))


def apply_power(state: TwoLevelState, u: Unitary2, k: int) -> TwoLevelState:
    """Apply ``u**k`` to a state, with a norm-conservation guard."""
    vec = _raw_power(u.entries, k) @ state.as_vector()
    norm_sq = float(np.real(vec.conj() @ vec))
    if abs(norm_sq - 1.0) > NORM_DRIFT_LIMIT:
        raise NumericalInstabilityError(
            f"norm^2 drifted to {norm_sq!r} after {k} applications"
        )
    vec = vec / math.sqrt(norm_sq)
    return TwoLevelState(vec[0], vec[1])


def success_probability(theta: float, k: int, p0: float) -> float:
    """Target probability after ``k`` rotation steps from a ``p0`` start."""
    return math.sin(k * theta + math.asin(math.sqrt(p0))) ** 2


def gamma_product(xi: float, m: int) -> float:
    """Cosine-product amplification factor, via the doubling recursion."""
    if m < 1:
        raise ConfigError(f"m must be at least 1, got {m}")
    value = 1.0
    for j in range(m):
        value *= math.cos((2**j) * xi / 2.0)
    return value


def gamma_sine_ratio(xi: float, m: int) -> float:
    """Closed-form amplification factor ``sin(2^m xi/2) / (2^m sin(xi/2))``."""
    if m < 1:
        raise ConfigError(f"m must be at least 1, got {m}")
    half = xi / 2.0
    if math.sin(half) == 0.0:
        return 1.0  # xi -> 0 limit
    return math.sin((2**m) * half) / ((2**m) * math.sin(half))


@dataclass(frozen=True)
class PowerDecomposition:
    """``G**(2**m)`` split into its amplification rotation and phase error.

    ``amplification`` is the exact rotation by ``2^m * gamma * theta``; the
    diagonal ``phase_error`` vanishes exactly at phase matching (xi = 0).
    """

    amplification: Unitary2
    phase_error: np.ndarray
    gamma: float

    @property
    def approx_power(self) -> np.ndarray:
        """Leading-order matrix: amplification plus the error term."""
        return self.amplification.entries + self.phase_error


def power_decomposition(theta: float, xi: float, m: int) -> PowerDecomposition:
    """Decompose the ``2^m``-th amplification power for mismatch ``xi``.

    The amplification factor is evaluated both as the cosine product and as
    the sine ratio; disagreement beyond ``GAMMA_IDENTITY_TOL`` indicates a
    numerical breakdown and raises.
    """
    if m < 1:
        raise ConfigError(f"m must be at least 1, got {m}")
    g_prod = gamma_product(xi, m)
    g_sine = gamma_sine_ratio(xi, m)
    if abs(g_prod - g_sine) > GAMMA_IDENTITY_TOL:
        raise NumericalInstabilityError(
            f"amplification-factor identity broke down: {g_prod} vs {g_sine}"
        )
    angle = (2**m) * g_prod * theta
    c, s = math.cos(angle), math.sin(angle)
    amplification = Unitary2(np.array([[c, 1j * s], [1j * s, c]]))
    half_phase = (2 ** (m - 1)) * xi
    phase_error = np.diag(
        [np.exp(1j * half_phase) - 1.0, np.exp(-1j * half_phase) - 1.0]
    )
    return PowerDecomposition(
        amplification=amplification, phase_error=phase_error, gamma=g_prod
    )


def step_conditional_probs(
    params: QaaParams, step_power: int, form: str = "rotation"
) -> np.ndarray:
    """Transition probabilities between readout symbols across one cut step.

    Row index is the conditioning symbol, column the next symbol, with
    ordering (target, rest).  ``step_power`` is the number of amplification
    iterations bundled into the step.
    """
    if not isinstance(step_power, (int, np.integer)) or step_power < 1:
        raise PlanError(
            f"step power must be a positive integer, got {step_power!r}"
        )
    if form == "rotation":
        stay = math.cos(step_power * params.theta) ** 2
        flip = math.sin(step_power * params.theta) ** 2
        return np.array([[stay, flip], [flip, stay]])
    if form == "full":
        power = matrix_power(grover_full_matrix(params), int(step_power))
        # ``table[i, j] = |<j|G^k|i>|^2``: columns of the matrix power give
        # the outgoing distribution of each basis state.
        return np.abs(power.entries.T) ** 2
    raise ConfigError(f"unknown representation {form!r}")
