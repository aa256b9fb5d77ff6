"""Analytic Black-Scholes-Merton pricing (strike-normalized) and synthetic datasets.

All prices are normalized by strike: the model input is moneyness m = S/K and
the label is c_hat = C/K. Feature ranges for the synthetic generator:

    m     in [0.8, 1.2]
    T     in [0.2, 1.1]   (years)
    r     in [0.02, 0.1]
    sigma in [0.01, 1.0]

The pricing oracle accepts the closure of these ranges including the
deterministic limits sigma = 0 and T = 0.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

FEATURES = ("m", "T", "r", "sigma")

FEATURE_RANGES = {
    "m": (0.8, 1.2),
    "T": (0.2, 1.1),
    "r": (0.02, 0.1),
    "sigma": (0.01, 1.0),
}

CSV_HEADER = "m,T,r,sigma,c_hat"


class DegenerateRegimeError(ValueError):
    """Raised by bsm_kernels when T <= 0 or sigma <= 0 (d1/d2 undefined)."""


class DatasetFormatError(ValueError):
    """Raised when a dataset file cannot be parsed."""


class OutOfRangeWarning(UserWarning):
    """A loaded feature lies outside the generator range (still accepted)."""


@dataclass(frozen=True)
class MarketPoint:
    """One option-pricing input: moneyness, maturity, rate, volatility."""

    m: float
    T: float
    r: float
    sigma: float

    def __post_init__(self):
        for name in ("m", "T", "r", "sigma"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"non-finite {name}: {v!r}")
        if self.m <= 0:
            raise ValueError(f"moneyness must be positive, got {self.m}")
        if self.T < 0:
            raise ValueError(f"maturity must be >= 0, got {self.T}")
        if self.sigma < 0:
            raise ValueError(f"volatility must be >= 0, got {self.sigma}")

    def features(self) -> np.ndarray:
        """Feature vector in canonical order (m, T, r, sigma)."""
        return np.array([self.m, self.T, self.r, self.sigma])


@dataclass(frozen=True)
class PriceLabel:
    """Normalized European call price c_hat = C/K."""

    c_hat: float


@dataclass(frozen=True)
class KernelPair:
    """The d1/d2 kernels of the BSM formula; d2 = d1 - sigma*sqrt(T) by construction."""

    d1: float
    d2: float


@dataclass
class Dataset:
    """Aligned market points and price labels, plus the generator seed.

    ``seed`` is None for datasets loaded from files that do not record one.
    """

    points: list[MarketPoint]
    labels: list[PriceLabel]
    seed: int | None = None

    def __post_init__(self):
        if len(self.points) != len(self.labels):
            raise ValueError(
                f"points/labels length mismatch: {len(self.points)} vs {len(self.labels)}"
            )

    def __len__(self) -> int:
        return len(self.points)

    def feature_matrix(self) -> np.ndarray:
        """(n, 4) array of features in canonical order."""
        return np.array([p.features() for p in self.points])

    def label_vector(self) -> np.ndarray:
        return np.array([lab.c_hat for lab in self.labels])

    def subset(self, indices) -> "Dataset":
        return Dataset(
            points=[self.points[i] for i in indices],
            labels=[self.labels[i] for i in indices],
            seed=self.seed,
        )


def norm_cdf(x: float) -> float:
    """Standard normal CDF N(x), absolute error below 1e-10.

    Backed by the platform complementary error function: N(x) = erfc(-x/sqrt(2))/2.
    """
    if not math.isfinite(x):
        raise ValueError(f"norm_cdf requires finite input, got {x!r}")
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def bsm_kernels(p: MarketPoint) -> KernelPair:
    """d1 and d2 for the nondegenerate branch (T > 0 and sigma > 0)."""
    if p.T <= 0 or p.sigma <= 0:
        raise DegenerateRegimeError(
            f"d1/d2 undefined for T={p.T}, sigma={p.sigma}; use the limit branch of bsm_price"
        )
    vol_sqrt_t = p.sigma * math.sqrt(p.T)
    d1 = (math.log(p.m) + (p.r + 0.5 * p.sigma**2) * p.T) / vol_sqrt_t
    return KernelPair(d1=d1, d2=d1 - vol_sqrt_t)


def bsm_price(p: MarketPoint) -> PriceLabel:
    """Normalized call price m*N(d1) - exp(-rT)*N(d2).

    For sigma = 0 or T = 0 returns the deterministic limit max(m - exp(-rT), 0).
    """
    if p.T <= 0 or p.sigma <= 0:
        return PriceLabel(c_hat=max(p.m - math.exp(-p.r * p.T), 0.0))
    k = bsm_kernels(p)
    c = p.m * norm_cdf(k.d1) - math.exp(-p.r * p.T) * norm_cdf(k.d2)
    # fp rounding can leave a tiny negative residue deep out of the money
    return PriceLabel(c_hat=max(c, 0.0))


def generate_dataset(n: int, seed: int) -> Dataset:
    """n points sampled i.i.d. uniform per feature range, labeled by bsm_price.

    Each feature column draws from its own child stream of SeedSequence(seed),
    so the draws for one column never depend on the other columns.
    """
    if n < 1:
        raise ValueError("empty dataset: n must be >= 1")
    streams = np.random.SeedSequence(seed).spawn(len(FEATURES))
    columns = {}
    for name, stream in zip(FEATURES, streams):
        lo, hi = FEATURE_RANGES[name]
        columns[name] = np.random.default_rng(stream).uniform(lo, hi, size=n)
    points = [
        MarketPoint(
            m=float(columns["m"][i]),
            T=float(columns["T"][i]),
            r=float(columns["r"][i]),
            sigma=float(columns["sigma"][i]),
        )
        for i in range(n)
    ]
    labels = [bsm_price(p) for p in points]
    return Dataset(points=points, labels=labels, seed=seed)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def save_dataset(d: Dataset, path) -> None:
    """Write CSV with header ``m,T,r,sigma,c_hat``; reals at 17 significant digits.

    The generator seed is kept in a leading ``# seed:`` comment so that
    save/load round-trips every field.
    """
    with open(path, "w") as fh:
        if d.seed is not None:
            fh.write(f"# seed: {d.seed}\n")
        fh.write(CSV_HEADER + "\n")
        for p, lab in zip(d.points, d.labels):
            fh.write(
                ",".join(_fmt(v) for v in (p.m, p.T, p.r, p.sigma, lab.c_hat)) + "\n"
            )


def load_dataset(path) -> Dataset:
    """Parse a dataset CSV; malformed rows raise DatasetFormatError with the line number.

    Features outside the generator ranges emit OutOfRangeWarning but are
    accepted (the pricing oracle's domain is wider than the generator's).
    """
    expected = CSV_HEADER.split(",")
    seed: int | None = None
    points: list[MarketPoint] = []
    labels: list[PriceLabel] = []
    with open(path) as fh:
        lines = fh.readlines()
    lineno = 0
    body = []
    for raw in lines:
        lineno += 1
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if "seed:" in line:
                try:
                    seed = int(line.split("seed:")[1].strip())
                except ValueError as exc:
                    raise DatasetFormatError(f"line {lineno}: bad seed comment: {line!r}") from exc
            continue
        body.append((lineno, line))
    if not body:
        raise DatasetFormatError("no header line found")
    header_lineno, header = body[0]
    cols = [c.strip() for c in header.split(",")]
    if cols != expected:
        missing = [c for c in expected if c not in cols]
        if missing:
            raise DatasetFormatError(
                f"line {header_lineno}: missing column(s) {', '.join(missing)}; header must be {CSV_HEADER!r}"
            )
        raise DatasetFormatError(
            f"line {header_lineno}: bad header {header!r}; expected {CSV_HEADER!r}"
        )
    for lineno, line in body[1:]:
        parts = line.split(",")
        if len(parts) != len(expected):
            raise DatasetFormatError(
                f"line {lineno}: expected {len(expected)} columns, got {len(parts)}"
            )
        try:
            m, T, r, sigma, c_hat = (float(v) for v in parts)
        except ValueError as exc:
            raise DatasetFormatError(f"line {lineno}: non-numeric value in {line!r}") from exc
        for name, value in zip(FEATURES, (m, T, r, sigma)):
            lo, hi = FEATURE_RANGES[name]
            if not (lo <= value <= hi):
                warnings.warn(
                    f"line {lineno}: {name}={value:g} outside generator range [{lo}, {hi}]",
                    OutOfRangeWarning,
                    stacklevel=2,
                )
        points.append(MarketPoint(m=m, T=T, r=r, sigma=sigma))
        labels.append(PriceLabel(c_hat=c_hat))
    return Dataset(points=points, labels=labels, seed=seed)
