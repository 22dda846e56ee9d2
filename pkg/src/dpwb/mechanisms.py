"""Noise mechanisms turning a deterministic value into an epsilon-DP release.

All samplers take a :class:`numpy.random.Generator` and are otherwise pure.
Passing ``size`` returns an array of independent releases of the same
value; without it a Python scalar is returned.

When the sensitivity is 0 the release is the deterministic value (clamped
to the mechanism's bounds, if any) and no randomness is consumed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from dpwb.errors import ConfigurationError, InvalidArgumentError, NonConvergenceError

MAX_REJECTION_ATTEMPTS = 10**6
MIN_ACCEPTANCE_PROBABILITY = 1e-6


@dataclass(frozen=True)
class Bounds:
    """Closed interval ``[lower, upper]``."""

    lower: float
    upper: float

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise InvalidArgumentError(f"bounds must be finite, got [{self.lower}, {self.upper}]")
        if self.lower > self.upper:
            raise InvalidArgumentError(f"lower bound {self.lower} exceeds upper bound {self.upper}")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def clamp(self, x):
        if np.ndim(x) == 0:
            return min(max(x, self.lower), self.upper)
        return np.clip(x, self.lower, self.upper)

    def is_integral(self) -> bool:
        return float(self.lower).is_integer() and float(self.upper).is_integer()

    @classmethod
    def parse(cls, text: str) -> "Bounds":
        """Parse ``"LO:HI"``."""
        try:
            lo, hi = text.split(":")
            return cls(float(lo), float(hi))
        except ValueError as exc:
            raise InvalidArgumentError(f"cannot parse bounds {text!r}; expected LO:HI") from exc


class MechanismKind(str, enum.Enum):
    LAPLACE_PURE = "laplace-pure"
    LAPLACE_TRUNCATED = "laplace-truncated"
    LAPLACE_BOUNDED_DOMAIN = "laplace-bounded-domain"
    LAPLACE_FOLDED = "laplace-folded"
    GEOMETRIC_PURE = "geometric-pure"
    GEOMETRIC_TRUNCATED = "geometric-truncated"
    SNAPPING = "snapping"

    @property
    def needs_bounds(self) -> bool:
        return self in _BOUNDED_KINDS

    @property
    def integer_valued(self) -> bool:
        return self in (MechanismKind.GEOMETRIC_PURE, MechanismKind.GEOMETRIC_TRUNCATED)


_BOUNDED_KINDS = frozenset(
    {
        MechanismKind.LAPLACE_TRUNCATED,
        MechanismKind.LAPLACE_BOUNDED_DOMAIN,
        MechanismKind.LAPLACE_FOLDED,
        MechanismKind.GEOMETRIC_TRUNCATED,
    }
)


@dataclass(frozen=True)
class MechanismSpec:
    """A noise mechanism and its parameters.

    ``bounds`` belongs to the truncated, bounded-domain and folded variants;
    ``clamp_radius`` to the snapping mechanism. Queries fill either from the
    natural output domain when left unset.
    """

    kind: MechanismKind
    bounds: Optional[Bounds] = None
    clamp_radius: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", MechanismKind(self.kind))
        if self.bounds is not None and not self.kind.needs_bounds:
            raise InvalidArgumentError(f"{self.kind.value} does not take bounds")
        if self.clamp_radius is not None:
            if self.kind is not MechanismKind.SNAPPING:
                raise InvalidArgumentError(f"{self.kind.value} does not take a clamp radius")
            if not (math.isfinite(self.clamp_radius) and self.clamp_radius > 0):
                raise ConfigurationError(f"clamp radius must be positive and finite, got {self.clamp_radius}")
        if self.kind is MechanismKind.GEOMETRIC_TRUNCATED and self.bounds is not None:
            if not self.bounds.is_integral():
                raise InvalidArgumentError("geometric-truncated needs integer bounds")

    def with_defaults(self, bounds: Optional[Bounds] = None, clamp_radius: Optional[float] = None) -> "MechanismSpec":
        """Fill unset parameters; explicitly set ones are kept."""
        spec = self
        if spec.kind.needs_bounds and spec.bounds is None and bounds is not None:
            if spec.kind is MechanismKind.GEOMETRIC_TRUNCATED:
                bounds = Bounds(math.floor(bounds.lower), math.ceil(bounds.upper))
            spec = replace(spec, bounds=bounds)
        if spec.kind is MechanismKind.SNAPPING and spec.clamp_radius is None and clamp_radius is not None:
            spec = replace(spec, clamp_radius=clamp_radius)
        return spec

    @property
    def label(self) -> str:
        return self.kind.value


def _check_epsilon(eps: float) -> float:
    eps = float(eps)
    if not (math.isfinite(eps) and eps > 0):
        raise InvalidArgumentError(f"epsilon must be positive and finite, got {eps}")
    return eps


def _check_sensitivity(sensitivity: float) -> float:
    sensitivity = float(sensitivity)
    if not (math.isfinite(sensitivity) and sensitivity >= 0):
        raise InvalidArgumentError(f"sensitivity must be non-negative and finite, got {sensitivity}")
    return sensitivity


def _check_value(value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise InvalidArgumentError(f"value must be finite, got {value}")
    return value


def _constant(value, size):
    if size is None:
        return value
    return np.full(size, value, dtype=np.int64 if isinstance(value, int) else float)


def _as_output(x, size):
    if size is None:
        return float(x)
    return x


def laplace_pure(value: float, sensitivity: float, eps: float, rng: np.random.Generator, size=None):
    """Add Laplace noise of scale ``sensitivity / eps``."""
    value = _check_value(value)
    sensitivity = _check_sensitivity(sensitivity)
    eps = _check_epsilon(eps)
    if sensitivity == 0:
        return _constant(value, size)
    scale = sensitivity / eps
    return _as_output(value + rng.laplace(0.0, scale, size), size)


def laplace_truncated(value, sensitivity, eps, bounds: Bounds, rng, size=None):
    """Laplace release mapped to the closest bound when it falls outside."""
    if _check_sensitivity(sensitivity) == 0:
        return _constant(float(bounds.clamp(_check_value(value))), size)
    return bounds.clamp(laplace_pure(value, sensitivity, eps, rng, size))


def _laplace_cdf(x: float, loc: float, scale: float) -> float:
    z = (x - loc) / scale
    if z < 0:
        return 0.5 * math.exp(z)
    return 1.0 - 0.5 * math.exp(-z)


def laplace_bounded_domain(value, sensitivity, eps, bounds: Bounds, rng, size=None):
    """Rejection-sample Laplace releases until one lies in ``bounds``.

    Note that plain rejection sampling renormalises the density differently
    for neighbouring inputs, so the realised guarantee is weaker than the
    nominal ``eps`` unless the caller inflates the noise scale accordingly.
    This function applies no such correction.

    Raises
    ------
    NonConvergenceError
        If the acceptance probability is below 1e-6, or if no draw is
        accepted within ``MAX_REJECTION_ATTEMPTS`` attempts per output.
    """
    value = _check_value(value)
    sensitivity = _check_sensitivity(sensitivity)
    eps = _check_epsilon(eps)
    if sensitivity == 0:
        return _constant(float(bounds.clamp(value)), size)
    if not bounds.lower < bounds.upper:
        raise InvalidArgumentError("bounded-domain Laplace needs lower < upper")

    scale = sensitivity / eps
    accept = _laplace_cdf(bounds.upper, value, scale) - _laplace_cdf(bounds.lower, value, scale)
    if accept < MIN_ACCEPTANCE_PROBABILITY:
        raise NonConvergenceError(
            f"acceptance probability {accept:.3g} below {MIN_ACCEPTANCE_PROBABILITY:g}: "
            f"value {value} is too far outside [{bounds.lower}, {bounds.upper}] for scale {scale:g}"
        )

    count = 1 if size is None else int(np.prod(size))
    out = np.empty(count)
    filled = 0
    attempts = 0
    cap = MAX_REJECTION_ATTEMPTS * count
    while filled < count:
        if attempts >= cap:
            raise NonConvergenceError(f"no accepted draw after {attempts} attempts")
        need = count - filled
        batch = min(int(need / accept * 1.1) + 4, cap - attempts, MAX_REJECTION_ATTEMPTS)
        draws = value + rng.laplace(0.0, scale, batch)
        attempts += batch
        ok = draws[(draws >= bounds.lower) & (draws <= bounds.upper)][:need]
        out[filled : filled + ok.size] = ok
        filled += ok.size
    if size is None:
        return float(out[0])
    return out.reshape(size)


def fold_into(x, lower: float, upper: float):
    """Reflect ``x`` across the violated bound until it lies in ``[lower, upper]``.

    Equivalent to repeated ``x -> 2*bound - x`` reflections, computed in
    closed form so that far-out draws cost O(1).
    """
    if lower == upper:
        return float(lower) if np.ndim(x) == 0 else np.full(np.shape(x), float(lower))
    width = upper - lower
    y = np.mod(np.asarray(x, dtype=float) - lower, 2 * width)
    y = np.where(y > width, 2 * width - y, y)
    out = np.clip(lower + y, lower, upper)
    if np.ndim(x) == 0:
        return float(out)
    return out


def laplace_folded(value, sensitivity, eps, bounds: Bounds, rng, size=None):
    """Laplace release folded back into ``bounds``."""
    if _check_sensitivity(sensitivity) == 0:
        return _constant(float(bounds.clamp(_check_value(value))), size)
    if not bounds.lower < bounds.upper:
        raise InvalidArgumentError("folded Laplace needs lower < upper")
    return fold_into(laplace_pure(value, sensitivity, eps, rng, size), bounds.lower, bounds.upper)


def _check_integer(value, what: str) -> int:
    try:
        as_float = float(value)
    except (TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"{what} must be an integer, got {value!r}") from exc
    if not (math.isfinite(as_float) and as_float.is_integer()):
        raise InvalidArgumentError(f"{what} must be an integer, got {value!r}")
    return int(value) if isinstance(value, (int, np.integer)) else int(as_float)


def two_sided_geometric(alpha: float, rng: np.random.Generator, size=None):
    """Integer noise with ``P(Z = k) proportional to alpha ** |k|``."""
    p = 1.0 - alpha
    z = rng.geometric(p, size) - rng.geometric(p, size)
    if size is None:
        return int(z)
    return z.astype(np.int64)


def geometric_pure(value, sensitivity, eps, rng, size=None):
    """Add two-sided geometric noise with ``alpha = exp(-eps / sensitivity)``."""
    value = _check_integer(value, "value")
    sensitivity = _check_integer(_check_sensitivity(sensitivity), "geometric sensitivity")
    eps = _check_epsilon(eps)
    if sensitivity == 0:
        return _constant(value, size)
    # 1 - alpha computed without cancellation for small eps
    alpha = 1.0 + math.expm1(-eps / sensitivity)
    return value + two_sided_geometric(alpha, rng, size)


def geometric_truncated(value, sensitivity, eps, bounds: Bounds, rng, size=None):
    """Geometric release mapped to the closest integer bound."""
    if not bounds.is_integral():
        raise InvalidArgumentError("geometric-truncated needs integer bounds")
    lo, hi = int(bounds.lower), int(bounds.upper)
    out = geometric_pure(value, sensitivity, eps, rng, size)
    if size is None:
        return min(max(out, lo), hi)
    return np.clip(out, lo, hi)


def uniform_full_entropy(rng: np.random.Generator, size=None):
    """Uniform double in (0, 1) over *all* representable doubles.

    The binary exponent is geometric (each halving of the interval is half as
    likely) and the 52 mantissa bits are uniform, so every double is drawn
    with probability equal to the width of the real interval it covers,
    rather than only multiples of 2**-53. Never returns 0 or 1.
    """
    mantissa = (np.uint64(1) << np.uint64(52)) | rng.integers(0, 1 << 52, size=size, dtype=np.uint64)
    leading_zeros = rng.geometric(0.5, size=size) - 1
    out = np.ldexp(mantissa.astype(np.float64), -53 - leading_zeros)
    if size is None:
        return float(out)
    return out


def is_power_of_two(x: float) -> bool:
    if not (math.isfinite(x) and x > 0):
        return False
    return math.frexp(x)[0] == 0.5


def next_power_of_two(x: float) -> float:
    """Smallest power of two (possibly negative exponent) ``>= x``."""
    if not (math.isfinite(x) and x > 0):
        raise InvalidArgumentError(f"expected a positive finite number, got {x}")
    mantissa, exponent = math.frexp(x)
    if mantissa == 0.5:
        return x
    return math.ldexp(1.0, exponent)


def round_to_multiple(x, lambda_pow2: float):
    """Round to the nearest multiple of a power of two, ties to even.

    Division and multiplication by a power of two are exact in binary
    floating point, so the only rounding is the intended one.
    """
    if not is_power_of_two(lambda_pow2):
        raise InvalidArgumentError(f"grid spacing must be a power of two, got {lambda_pow2}")
    # + 0.0 turns -0.0 into 0.0
    out = np.rint(np.asarray(x, dtype=float) / lambda_pow2) * lambda_pow2 + 0.0
    if np.ndim(x) == 0:
        return float(out)
    return out


def snapping_grid(sensitivity: float, eps: float) -> tuple[float, float]:
    """Return ``(scale, grid)`` for the snapping mechanism.

    ``scale`` is the Laplace scale ``sensitivity / eps``; ``grid`` the smallest
    power of two not below it.
    """
    scale = _check_sensitivity(sensitivity) / _check_epsilon(eps)
    return scale, next_power_of_two(scale)


def snapping_laplace(value, sensitivity, eps, clamp_radius: float, rng, size=None):
    """Floating-point-safe Laplace release.

    Clamps ``value`` to ``[-B, B]``, adds ``scale * sign * ln(U)`` with ``U``
    from :func:`uniform_full_entropy`, rounds to the nearest multiple of the
    power-of-two grid and clamps again. The scale is ``sensitivity / eps``
    without the machine-precision correction, so the guarantee holds for
    ``eps * (1 + eta)`` with ``eta`` of the order of the float spacing
    relative to ``B / scale``.

    Raises
    ------
    ConfigurationError
        If ``B`` is not positive and finite, or the grid exceeds ``2 * B``.
    """
    value = _check_value(value)
    clamp_radius = float(clamp_radius)
    if not (math.isfinite(clamp_radius) and clamp_radius > 0):
        raise ConfigurationError(f"clamp radius must be positive and finite, got {clamp_radius}")
    clamp = Bounds(-clamp_radius, clamp_radius)
    if _check_sensitivity(sensitivity) == 0:
        return _constant(float(clamp.clamp(value)), size)

    scale, grid = snapping_grid(sensitivity, eps)
    if grid > 2 * clamp_radius:
        raise ConfigurationError(
            f"snapping grid {grid:g} exceeds the clamp interval width {2 * clamp_radius:g}; "
            "raise the clamp radius or epsilon"
        )
    u = uniform_full_entropy(rng, size)
    sign = rng.integers(0, 2, size=size) * 2 - 1
    noisy = clamp.clamp(value) + sign * scale * np.log(u)
    out = clamp.clamp(round_to_multiple(noisy, grid))
    return _as_output(out, size)


def release(spec: MechanismSpec, value, sensitivity: float, eps: float, rng: np.random.Generator, size=None):
    """Dispatch to the sampler named by ``spec``."""
    kind = spec.kind
    if kind.needs_bounds and spec.bounds is None:
        raise ConfigurationError(f"{kind.value} requires bounds")
    if kind is MechanismKind.LAPLACE_PURE:
        return laplace_pure(value, sensitivity, eps, rng, size)
    if kind is MechanismKind.LAPLACE_TRUNCATED:
        return laplace_truncated(value, sensitivity, eps, spec.bounds, rng, size)
    if kind is MechanismKind.LAPLACE_BOUNDED_DOMAIN:
        return laplace_bounded_domain(value, sensitivity, eps, spec.bounds, rng, size)
    if kind is MechanismKind.LAPLACE_FOLDED:
        return laplace_folded(value, sensitivity, eps, spec.bounds, rng, size)
    if kind is MechanismKind.GEOMETRIC_PURE:
        return geometric_pure(value, sensitivity, eps, rng, size)
    if kind is MechanismKind.GEOMETRIC_TRUNCATED:
        return geometric_truncated(value, sensitivity, eps, spec.bounds, rng, size)
    if kind is MechanismKind.SNAPPING:
        if spec.clamp_radius is None:
            raise ConfigurationError("snapping requires a clamp radius")
        return snapping_laplace(value, sensitivity, eps, spec.clamp_radius, rng, size)
    raise InvalidArgumentError(f"unknown mechanism {kind!r}")


Sampler = Callable[[float, np.random.Generator, Optional[int]], np.ndarray]


def sampler(spec: MechanismSpec, sensitivity: float, eps: float) -> Sampler:
    """Bind a mechanism to ``(sensitivity, eps)`` as ``f(value, rng, size)``."""

    def draw(value, rng, size=None):
        return release(spec, value, sensitivity, eps, rng, size)

    return draw
