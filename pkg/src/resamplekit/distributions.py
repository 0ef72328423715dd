"""Known parametric distributions usable as generators or side variables.

A :class:`KnownDistribution` is an immutable value object: a family name plus
a parameter tuple.  Families supported: ``exponential`` (rate), ``normal``
(mu, sigma), ``uniform`` (a, b), ``triangular`` (lower, mode, upper) and
``empirical`` (a fixed value list, sampled with replacement).  The parametric
families are backed by the corresponding scipy.stats distributions.

Two construction paths mirror the CLI and the config format:

* ``parse_distribution("exp:3")``, ``parse_distribution("triangular:0,2,4")``
  -- compact ``family:p1,p2,...`` strings used on the command line;
* ``from_dict({"family": "exponential", "rate": 2.0})`` -- JSON objects with
  named parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

__all__ = [
    "KnownDistribution",
    "exponential",
    "normal",
    "uniform",
    "triangular",
    "empirical",
    "parse_distribution",
    "from_dict",
]

_FAMILIES = ("exponential", "normal", "uniform", "triangular", "empirical")

# family aliases accepted by the parsers
_ALIASES = {
    "exp": "exponential",
    "exponential": "exponential",
    "normal": "normal",
    "gauss": "normal",
    "uniform": "uniform",
    "triangular": "triangular",
    "tri": "triangular",
    "empirical": "empirical",
}

# named JSON parameters per family, in positional order
_PARAM_NAMES = {
    "exponential": ("rate",),
    "normal": ("mu", "sigma"),
    "uniform": ("a", "b"),
    "triangular": ("lower", "mode", "upper"),
}

_frozen_cache: dict[tuple, object] = {}


@dataclass(frozen=True)
class KnownDistribution:
    """Immutable distribution descriptor with sampling and cdf access."""

    family: str
    params: tuple[float, ...]

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown distribution family {self.family!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        p = self.params
        if self.family == "exponential":
            if len(p) != 1 or p[0] <= 0:
                raise ValueError(f"exponential needs one positive rate, got {p}")
        elif self.family == "normal":
            if len(p) != 2 or p[1] <= 0:
                raise ValueError(f"normal needs (mu, sigma>0), got {p}")
        elif self.family == "uniform":
            if len(p) != 2 or not p[0] < p[1]:
                raise ValueError(f"uniform needs (a, b) with a < b, got {p}")
        elif self.family == "triangular":
            if len(p) != 3 or not (p[0] <= p[1] <= p[2]) or p[0] >= p[2]:
                raise ValueError(
                    f"triangular needs lower <= mode <= upper, lower < upper, got {p}")
        elif self.family == "empirical":
            if len(p) == 0:
                raise ValueError("empirical needs at least one value")

    # -- scipy backing ----------------------------------------------------

    @property
    def _frozen(self):
        key = (self.family, self.params)
        dist = _frozen_cache.get(key)
        if dist is None:
            dist = _make_frozen(self.family, self.params)
            _frozen_cache[key] = dist
        return dist

    @property
    def is_continuous(self) -> bool:
        return self.family != "empirical"

    # -- queries ----------------------------------------------------------

    def sample(self, rng: np.random.Generator, size=None):
        """Draw from the distribution using the supplied generator."""
        if self.family == "empirical":
            values = np.asarray(self.params)
            idx = rng.integers(0, len(values), size=size)
            return values[idx]
        if self.family == "exponential":
            return rng.exponential(1.0 / self.params[0], size=size)
        if self.family == "normal":
            return rng.normal(self.params[0], self.params[1], size=size)
        if self.family == "uniform":
            a, b = self.params
            return rng.uniform(a, b, size=size)
        if self.family == "triangular":
            return rng.triangular(*self.params, size=size)
        return self._frozen.rvs(size=size, random_state=rng)

    def cdf(self, x):
        if self.family == "empirical":
            values = np.sort(np.asarray(self.params))
            return np.searchsorted(values, x, side="right") / len(values)
        return self._frozen.cdf(x)

    def sf(self, x):
        """Survival function 1 - cdf(x)."""
        if self.family == "empirical":
            return 1.0 - self.cdf(x)
        return self._frozen.sf(x)

    def pdf(self, x):
        if self.family == "empirical":
            raise ValueError("empirical distribution has no density")
        return self._frozen.pdf(x)

    def ppf(self, q):
        """Quantile function (inverse cdf)."""
        if self.family == "empirical":
            values = np.sort(np.asarray(self.params))
            idx = np.ceil(np.asarray(q) * len(values)).astype(int) - 1
            return values[np.clip(idx, 0, len(values) - 1)]
        return self._frozen.ppf(q)

    def mean(self) -> float:
        if self.family == "empirical":
            return float(np.mean(self.params))
        return float(self._frozen.mean())

    def var(self) -> float:
        if self.family == "empirical":
            return float(np.var(self.params))
        return float(self._frozen.var())

    def support(self) -> tuple[float, float]:
        if self.family == "empirical":
            return (float(min(self.params)), float(max(self.params)))
        lo, hi = self._frozen.support()
        return (float(lo), float(hi))

    def __repr__(self):
        if self.family == "empirical" and len(self.params) > 6:
            return f"KnownDistribution(empirical, {len(self.params)} values)"
        body = ",".join(format(p, "g") for p in self.params)
        return f"KnownDistribution({self.family}:{body})"


def _make_frozen(family: str, params: tuple[float, ...]):
    if family == "exponential":
        return stats.expon(scale=1.0 / params[0])
    if family == "normal":
        return stats.norm(params[0], params[1])
    if family == "uniform":
        a, b = params
        return stats.uniform(loc=a, scale=b - a)
    if family == "triangular":
        lo, mode, hi = params
        return stats.triang(c=(mode - lo) / (hi - lo), loc=lo, scale=hi - lo)
    raise ValueError(family)


# -- constructors ---------------------------------------------------------

def exponential(rate: float) -> KnownDistribution:
    return KnownDistribution("exponential", (rate,))


def normal(mu: float, sigma: float) -> KnownDistribution:
    return KnownDistribution("normal", (mu, sigma))


def uniform(a: float, b: float) -> KnownDistribution:
    return KnownDistribution("uniform", (a, b))


def triangular(lower: float, mode: float, upper: float) -> KnownDistribution:
    return KnownDistribution("triangular", (lower, mode, upper))


def empirical(values) -> KnownDistribution:
    return KnownDistribution("empirical", tuple(float(v) for v in values))


def parse_distribution(text: str) -> KnownDistribution:
    """Parse a compact ``family:p1,p2,...`` descriptor (e.g. ``exp:3``)."""
    head, sep, tail = text.strip().partition(":")
    family = _ALIASES.get(head.strip().lower())
    if family is None:
        raise ValueError(f"unknown distribution family {head.strip()!r} in {text!r}")
    if not sep or not tail.strip():
        raise ValueError(f"missing parameters in distribution {text!r}")
    try:
        params = tuple(float(tok) for tok in tail.split(","))
    except ValueError:
        raise ValueError(f"non-numeric parameter in distribution {text!r}") from None
    return KnownDistribution(family, params)


def from_dict(obj: dict) -> KnownDistribution:
    """Build a distribution from a JSON object with named parameters."""
    if "family" not in obj:
        raise ValueError(f"distribution object missing 'family': {obj!r}")
    family = _ALIASES.get(str(obj["family"]).lower())
    if family is None:
        raise ValueError(f"unknown distribution family {obj['family']!r}")
    if family == "empirical":
        if "values" not in obj:
            raise ValueError("empirical distribution object needs 'values'")
        return empirical(obj["values"])
    names = _PARAM_NAMES[family]
    missing = [n for n in names if n not in obj]
    if missing:
        raise ValueError(f"{family} distribution object missing {missing}")
    return KnownDistribution(family, tuple(float(obj[n]) for n in names))
