"""Log-normal duration models: ML fitting, distribution functions, sampling.

One model is fitted per (vehicle class, direction) group; a full model set
holds exactly the four groups.  Sigma is the maximum-likelihood (1/n)
standard deviation of the log durations, unlike the descriptive n-1
deviation reported elsewhere.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np
from scipy.special import ndtri

from .errors import (
    DegenerateSampleError,
    DomainError,
    EmptySampleError,
    MissingGroupError,
    NonPositiveDurationError,
)

if TYPE_CHECKING:
    from .extract import LaneChangeEvent

MODEL_GROUPS = (("car", "left"), ("car", "right"), ("truck", "left"), ("truck", "right"))


@dataclass(frozen=True)
class LogNormalModel:
    vehicle_class: str
    direction: str
    mu: float
    sigma: float
    n: int
    log_likelihood: float

    @property
    def median(self) -> float:
        return math.exp(self.mu)

    @property
    def mean(self) -> float:
        return math.exp(self.mu + self.sigma**2 / 2.0)


def fit(durations: Sequence[float], vehicle_class: str, direction: str) -> LogNormalModel:
    """Maximum-likelihood log-normal fit of a duration sample (n >= 2)."""
    values = np.asarray(durations, dtype=float)
    if len(values) < 2:
        raise EmptySampleError(f"need at least 2 durations, got {len(values)}")
    if np.any(values <= 0.0):
        raise NonPositiveDurationError("durations must be strictly positive")
    logs = np.log(values)
    mu = float(np.mean(logs))
    sigma = float(np.sqrt(np.mean((logs - mu) ** 2)))
    if sigma == 0.0:
        raise DegenerateSampleError("all durations identical; sigma would be 0")
    n = len(values)
    # log-likelihood at the MLE; the quadratic term collapses to n/2
    log_likelihood = -n / 2.0 * math.log(2.0 * math.pi) - n * math.log(sigma) - float(
        np.sum(logs)
    ) - n / 2.0
    return LogNormalModel(vehicle_class, direction, mu, sigma, n, log_likelihood)


def pdf(model: LogNormalModel, x: float) -> float:
    if x <= 0.0:
        raise DomainError(f"pdf requires x > 0, got {x}")
    z = (math.log(x) - model.mu) / model.sigma
    return math.exp(-0.5 * z * z) / (x * model.sigma * math.sqrt(2.0 * math.pi))


def cdf(model: LogNormalModel, x: float) -> float:
    if x <= 0.0:
        raise DomainError(f"cdf requires x > 0, got {x}")
    z = (math.log(x) - model.mu) / (model.sigma * math.sqrt(2.0))
    return 0.5 * (1.0 + math.erf(z))


def quantile(model: LogNormalModel, q: float) -> float:
    if not 0.0 < q < 1.0:
        raise DomainError(f"quantile requires q in (0,1), got {q}")
    return math.exp(model.mu + model.sigma * float(ndtri(q)))


def sample(model: LogNormalModel, n: int, seed: int) -> np.ndarray:
    """Inverse-transform sampling; deterministic for a fixed seed."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    rng = np.random.default_rng(seed)
    u = rng.random(n)
    # keep the uniforms strictly inside (0,1) so every draw is finite
    tiny = 2.0**-53
    u = np.clip(u, tiny, 1.0 - tiny)
    return np.exp(model.mu + model.sigma * ndtri(u))


@dataclass(frozen=True)
class KsReport:
    statistic: float
    n: int
    # descriptive distance only: no p-value is attached because the model
    # parameters are usually estimated from the same data


def goodness_of_fit(model: LogNormalModel, durations: Sequence[float]) -> KsReport:
    """One-sample Kolmogorov-Smirnov distance between data and model CDF."""
    values = np.sort(np.asarray(durations, dtype=float))
    n = len(values)
    if n == 0:
        raise EmptySampleError("cannot evaluate fit on an empty sample")
    model_cdf = np.array([cdf(model, float(x)) for x in values])
    upper = np.arange(1, n + 1) / n - model_cdf
    lower = model_cdf - np.arange(0, n) / n
    return KsReport(statistic=float(np.max(np.maximum(upper, lower))), n=n)


def fit_models(events: Iterable["LaneChangeEvent"]) -> list[LogNormalModel]:
    """Fit the full four-model set, one per (vehicle class, direction).

    A missing group is an error; a partial model set would silently skew
    any simulation that consumes it.
    """
    grouped: dict[tuple[str, str], list[float]] = {}
    for event in events:
        grouped.setdefault((event.vehicle_class, event.direction), []).append(event.duration_s)
    models = []
    for vehicle_class, direction in MODEL_GROUPS:
        durations = grouped.get((vehicle_class, direction), [])
        if len(durations) < 2:
            raise MissingGroupError(
                f"group ({vehicle_class}, {direction}) has {len(durations)} events; "
                "a full model set needs every group"
            )
        models.append(fit(durations, vehicle_class, direction))
    return models


def write_models_json(models: Sequence[LogNormalModel], path: str | Path) -> None:
    payload = [asdict(model) for model in models]
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def read_models_json(path: str | Path) -> list[LogNormalModel]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return [LogNormalModel(**entry) for entry in payload]
