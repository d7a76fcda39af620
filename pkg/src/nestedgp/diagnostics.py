"""Posterior summaries: HPD intervals, modes, Geweke scores, galactic units."""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GalacticDerived",
    "HpdInterval",
    "ParamSummary",
    "PosteriorSummary",
    "galactic_convert",
    "geweke_z",
    "histogram_mode",
    "hpd",
    "hpd_table",
    "summarize",
]

V0_KM_S = 220.0
R0_KPC = 8.0
MIN_HPD_SAMPLES = 20


@dataclass(frozen=True)
class HpdInterval:
    lo: float
    hi: float
    mass: float = 0.95
    lo_index: int = 0
    hi_index: int = 0

    @property
    def width(self):
        return self.hi - self.lo

    def contains(self, x):
        return self.lo <= x <= self.hi

    def overlaps(self, other):
        return self.lo <= other.hi and other.lo <= self.hi

    def __str__(self):
        return f"[{self.lo:.4g}, {self.hi:.4g}]"


def hpd(samples, mass=0.95):
    """Shortest window of sorted samples holding ``ceil(mass * n)`` of them.

    Ties go to the leftmost window.  ``lo_index``/``hi_index`` refer to the
    sorted sample array.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n < MIN_HPD_SAMPLES:
        raise ValueError(f"need at least {MIN_HPD_SAMPLES} samples for an HPD interval, got {n}")
    if not 0 < mass < 1:
        raise ValueError("mass must lie in (0, 1)")
    k = min(n, math.ceil(mass * n - 1e-9))
    widths = x[k - 1:] - x[: n - k + 1]
    i = int(np.argmin(widths))
    return HpdInterval(float(x[i]), float(x[i + k - 1]), mass, i, i + k - 1)


def histogram_mode(samples):
    """Centre of the tallest histogram bin (Freedman-Diaconis, Sturges fallback)."""
    x = np.asarray(samples, dtype=float).ravel()
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        return lo
    q75, q25 = np.percentile(x, [75, 25])
    iqr = q75 - q25
    if x.size >= 30 and iqr > 0:
        width = 2.0 * iqr * x.size ** (-1.0 / 3.0)
        bins = max(1, int(math.ceil((hi - lo) / width)))
    else:
        bins = int(math.ceil(math.log2(x.size))) + 1
    counts, edges = np.histogram(x, bins=bins, range=(lo, hi))
    j = int(np.argmax(counts))
    return float(0.5 * (edges[j] + edges[j + 1]))


def _mean_variance(x):
    """Variance of the sample mean of a correlated series, by batch means."""
    n = x.size
    nb = max(2, int(math.sqrt(n)))
    size = n // nb
    if size < 1:
        return float(np.var(x, ddof=1) / n) if n > 1 else 0.0
    batches = x[: nb * size].reshape(nb, size).mean(axis=1)
    return float(np.var(batches, ddof=1) / nb)


def geweke_z(trace, first=0.1, last=0.5):
    """Geweke z-score comparing the first 10% with the last 50% of a trace."""
    x = np.asarray(trace, dtype=float)
    x = x[~np.isnan(x)]
    n = x.size
    if n < 20:
        return float("nan")
    a = x[: int(first * n)]
    b = x[n - int(last * n):]
    diff = a.mean() - b.mean()
    var = _mean_variance(a) + _mean_variance(b)
    if var <= 0:
        return 0.0 if diff == 0 else math.copysign(math.inf, diff)
    return float(diff / math.sqrt(var))


@dataclass(frozen=True)
class ParamSummary:
    name: str
    mode: float
    mean: float
    interval: HpdInterval
    geweke: float


@dataclass
class PosteriorSummary:
    params: dict
    acceptance: dict = field(default_factory=dict)
    n_used: int = 0
    burnin_frac: float = 0.5
    loglik_geweke: float = float("nan")

    def __getitem__(self, name):
        return self.params[name]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["parameter", "mode", "mean", "hpd_lo", "hpd_hi", "mass", "geweke_z"])
            for p in self.params.values():
                vals = [p.mode, p.mean, p.interval.lo, p.interval.hi, p.interval.mass, p.geweke]
                w.writerow([p.name] + [repr(float(v)) for v in vals])

    @classmethod
    def from_csv(cls, path):
        params = {}
        with open(path, newline="") as fh:
            for row in csv.DictReader(r for r in fh if not r.startswith("#")):
                iv = HpdInterval(float(row["hpd_lo"]), float(row["hpd_hi"]), float(row["mass"]))
                params[row["parameter"]] = ParamSummary(
                    row["parameter"], float(row["mode"]), float(row["mean"]), iv,
                    float(row["geweke_z"]),
                )
        return cls(params=params)


def summarize(report, burnin_frac=0.5, mass=0.95):
    """Mode, mean, HPD and Geweke score for every recorded parameter."""
    n = report.n_iter
    if n == 0:
        raise ValueError("empty trace")
    start = int(burnin_frac * n)
    if n - start < 1:
        start = 0
    params = {}
    for name in report.parameter_names():
        x = report.columns[name][start:]
        x = x[~np.isnan(x)]
        if x.size == 0:
            continue
        if x.size >= MIN_HPD_SAMPLES:
            iv = hpd(x, mass)
        else:
            iv = HpdInterval(float(x.min()), float(x.max()), mass)
        params[name] = ParamSummary(name, histogram_mode(x), float(x.mean()), iv, geweke_z(x))
    acc = {}
    for name, col in report.columns.items():
        if name.startswith("accept_"):
            c = col[start:]
            c = c[~np.isnan(c)]
            if c.size:
                acc[name] = float(c.mean())
    return PosteriorSummary(
        params=params,
        acceptance=acc,
        n_used=n - start,
        burnin_frac=burnin_frac,
        loglik_geweke=geweke_z(report.columns["loglik"][start:]),
    )


TABLE_ORDER = ["q_1", "q_2", "a_1", "a_2", "delta_1", "delta_2",
               "sigma11", "rho", "sigma22", "s1_test", "s2_test"]


def hpd_table(summaries, params=None):
    """Aligned text table: one row per parameter, one HPD column per run.

    ``summaries`` maps a column label (e.g. ``"using only training data"``)
    to a :class:`PosteriorSummary`.  Missing entries print as ``-``.
    """
    if params is None:
        seen = []
        for s in summaries.values():
            for name in s.params:
                if name not in seen and not name.startswith("ell_"):
                    seen.append(name)
        rank = {n: i for i, n in enumerate(TABLE_ORDER)}
        params = sorted(seen, key=lambda n: (rank.get(n, len(rank)), n))
    header = ["Parameters"] + list(summaries)
    rows = [header]
    for name in params:
        row = [name]
        for s in summaries.values():
            p = s.params.get(name)
            row.append(str(p.interval) if p is not None else "-")
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = [" | ".join(c.ljust(w) for c, w in zip(r, widths)) for r in rows]
    lines.insert(1, "-+-".join("-" * w for w in widths))
    return "\n".join(lines)


@dataclass(frozen=True)
class GalacticDerived:
    """Model-unit results expressed in galactic units."""

    length_unit_kpc: float
    omega_bar: float
    bar_angle_deg: tuple
    omega_bar_interval: tuple | None = None


def galactic_convert(s1, s2_interval, s1_interval=None):
    """One model length unit is ``8 kpc / s1``; ``Omega_bar = 220 km/s / unit``.

    The bar angle interval is converted from radians to degrees.
    """
    if not s1 > 0:
        raise ValueError(f"radial location must be positive, got {s1}")
    unit = R0_KPC / s1
    omega = V0_KM_S / unit
    lo, hi = (s2_interval.lo, s2_interval.hi) if isinstance(s2_interval, HpdInterval) else s2_interval
    angle = (math.degrees(lo), math.degrees(hi))
    omega_iv = None
    if s1_interval is not None:
        a, b = (s1_interval.lo, s1_interval.hi) if isinstance(s1_interval, HpdInterval) else s1_interval
        if not a > 0:
            raise ValueError("radial interval must be positive")
        omega_iv = (V0_KM_S * a / R0_KPC, V0_KM_S * b / R0_KPC)
    return GalacticDerived(unit, omega, angle, omega_iv)
