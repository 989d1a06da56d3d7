"""Seeded Monte Carlo simulation of the buffer chain and uplink metrics.

Replication ``r`` of a run seeded with ``seed`` draws from
``Philox(SeedSequence(seed, spawn_key=(r,)))``; the stream therefore does not
depend on how many replications are requested.  Exponentials are sampled by
inverse transform, ``-log(U) * mean`` with ``U`` in ``(0, 1]``.
"""
from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numba
import numpy as np
from scipy import stats

from .exceptions import ConfigError, SupportMismatchError
from .limiting import LimitingDistribution
from .performance import LinkParams
from .storage import BufferSpec, EffectiveParams

__all__ = [
    "ErrorCounting",
    "SimConfig",
    "Estimate",
    "SimResult",
    "simulate",
    "distribution_distance",
    "binned_masses",
    "default_warmup",
    "replication_generator",
]

_CHUNK = 1 << 20


class ErrorCounting(str, enum.Enum):
    ANALYTIC = "analytic-conditional"
    SYMBOL = "symbol-level"


def default_warmup(delta: float, l: int | None) -> int:
    """``ceil(10 l / delta)`` slots, at least 1000 (``l = 1`` for infinite buffers)."""
    return max(1000, math.ceil(10 * (l or 1) / delta))


@dataclass(frozen=True)
class SimConfig:
    n_slots: int = 1_000_000
    warmup_slots: int | None = None
    seed: int = 12345
    n_replications: int = 10
    histogram_bins: int = 100
    error_counting_mode: ErrorCounting = ErrorCounting.ANALYTIC
    n_bits: int = 1
    n_batches: int = 20
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "error_counting_mode", ErrorCounting(self.error_counting_mode))
        if self.n_slots <= 0:
            raise ConfigError("n_slots must be positive")
        if self.warmup_slots is not None and not 0 <= self.warmup_slots < self.n_slots:
            raise ConfigError("need n_slots > warmup_slots >= 0")
        if self.histogram_bins < 10:
            raise ConfigError("histogram_bins must be at least 10")
        if self.n_replications < 1:
            raise ConfigError("n_replications must be at least 1")
        if self.n_bits < 1 or self.n_batches < 2 or self.workers < 1:
            raise ConfigError("n_bits, workers >= 1 and n_batches >= 2 required")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    def warmup_for(self, delta: float, l: int | None) -> int:
        w = self.warmup_slots if self.warmup_slots is not None else default_warmup(delta, l)
        if w >= self.n_slots:
            raise ConfigError(f"warmup ({w}) must be shorter than n_slots ({self.n_slots})")
        return w


@dataclass(frozen=True)
class Estimate:
    """Point estimate with a 95% confidence radius."""

    value: float
    ci: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "ci", float(self.ci))

    def covers(self, target: float, radii: float = 1.0) -> bool:
        return abs(self.value - target) <= radii * self.ci


@dataclass(frozen=True)
class SimResult:
    p_trans_hat: Estimate
    atom_freq_hat: Estimate
    aer_hat: Estimate
    channel_outage_hat: Estimate
    total_outage_hat: Estimate
    histogram_edges: np.ndarray = field(repr=False)
    histogram_masses: np.ndarray = field(repr=False)
    slots_counted: int = 0
    overflow_mass: float = 0.0
    non_stationary: bool = False

    def to_dict(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            if isinstance(v, dict):
                out[k] = {kk: format(float(vv), ".17g") for kk, vv in v.items()}
            elif isinstance(v, np.ndarray):
                out[k] = [format(float(x), ".17g") for x in v]
            elif isinstance(v, float):
                out[k] = format(v, ".17g")
            else:
                out[k] = v
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "SimResult":
        est = {k: Estimate(float(d[k]["value"]), float(d[k]["ci"]))
               for k in ("p_trans_hat", "atom_freq_hat", "aer_hat",
                         "channel_outage_hat", "total_outage_hat")}
        return cls(**est,
                   histogram_edges=np.array([float(x) for x in d["histogram_edges"]]),
                   histogram_masses=np.array([float(x) for x in d["histogram_masses"]]),
                   slots_counted=int(d["slots_counted"]),
                   overflow_mass=float(d["overflow_mass"]),
                   non_stationary=bool(d["non_stationary"]))

    def histogram_csv(self) -> str:
        """Two-column CSV ``bin_center,mass``."""
        centers = 0.5 * (self.histogram_edges[1:] + self.histogram_edges[:-1])
        lines = ["bin_center,mass"]
        lines += [f"{c:.17g},{m:.17g}" for c, m in zip(centers, self.histogram_masses)]
        return "\n".join(lines) + "\n"


def replication_generator(seed: int, replication: int) -> np.random.Generator:
    """Independent Philox stream for one replication."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(replication,))))


@numba.njit(nogil=True, cache=True)
def _chain(b, harvest, gain, noise, thin, m_eff, cap, finite, snr_tx, gamma_thr,
           mod_a, mod_b, symbol_mode, counting, edges_lo, bin_width, hist, acc):
    # acc: [slots, transmits, outages, err_sum, bits, atoms, overflow]
    nbins = hist.shape[0]
    atom_level = cap * (1.0 - 1e-12)
    for i in range(harvest.shape[0]):
        if counting:
            acc[0] += 1.0
            if finite and b >= atom_level:
                acc[5] += 1.0
            else:
                j = int((b - edges_lo) / bin_width)
                if j >= nbins:
                    j = nbins - 1
                    acc[6] += 1.0
                hist[j] += 1.0
        if b > m_eff:
            if counting:
                snr = snr_tx * gain[i]
                acc[1] += 1.0
                if snr < gamma_thr:
                    acc[2] += 1.0
                if symbol_mode:
                    thr = math.sqrt(mod_b * snr)
                    for k in range(noise.shape[1]):
                        acc[4] += 1.0
                        if noise[i, k] > thr and thin[i, k] < mod_a:
                            acc[3] += 1.0
                else:
                    acc[3] += mod_a * 0.5 * math.erfc(math.sqrt(mod_b * snr) / math.sqrt(2.0))
                    acc[4] += 1.0
            b = b - m_eff + harvest[i]
        else:
            b = b + harvest[i]
        if finite and b > cap:
            b = cap
    return b


def _histogram_range(eff: EffectiveParams, buf: BufferSpec, n_slots: int) -> tuple[float, float]:
    if buf.is_finite:
        return 0.0, buf.capacity
    delta = eff.delta
    if delta > 1.0:
        from .limiting import infinite_pdf

        p = infinite_pdf(eff).p
        return 0.0, eff.m_eff + math.log(1e-12) / p
    return 0.0, eff.m_eff + eff.harvest_mean_eff * (n_slots * max(1.0 - delta, 0.05) + 50.0)


def _run_replication(r: int, eff, buf, link, cfg, warmup, lo, hi):
    rng = replication_generator(cfg.seed, r)
    symbol = cfg.error_counting_mode is ErrorCounting.SYMBOL
    nbins = cfg.histogram_bins
    width = (hi - lo) / nbins
    hist = np.zeros(nbins)
    measured = cfg.n_slots - warmup
    bounds = np.linspace(0, measured, cfg.n_batches + 1).astype(np.int64)
    batch_acc = np.zeros((cfg.n_batches, 7))
    cap = buf.capacity if buf.is_finite else 0.0
    snr_tx = link.snr_bar * eff.delta
    b = 0.0
    empty = np.zeros((0, 0))

    def advance(n, counting, acc):
        nonlocal b
        done = 0
        while done < n:
            size = min(_CHUNK, n - done)
            harvest = -np.log1p(-rng.random(size)) * eff.harvest_mean_eff
            gain = -np.log1p(-rng.random(size))
            if symbol and counting:
                noise = rng.standard_normal((size, cfg.n_bits))
                thin = rng.random((size, cfg.n_bits))
            else:
                noise = thin = empty
            b = _chain(b, harvest, gain, noise, thin, eff.m_eff, cap, buf.is_finite, snr_tx,
                       link.snr_threshold, link.mod_a, link.mod_b, symbol, counting,
                       lo, width, hist, acc)
            done += size

    advance(warmup, False, np.zeros(7))
    for k in range(cfg.n_batches):
        advance(int(bounds[k + 1] - bounds[k]), True, batch_acc[k])
    return hist, batch_acc


def _ratio_estimate(num: np.ndarray, den: np.ndarray, resolution: float) -> Estimate:
    """Ratio of totals with a 95% radius from the spread of per-group ratios."""
    total = num.sum() / den.sum() if den.sum() > 0 else 0.0
    ok = den > 0
    groups = num[ok] / den[ok]
    n = groups.size
    if n < 2:
        return Estimate(float(total), max(resolution, 0.0))
    sd = float(np.std(groups, ddof=1))
    radius = stats.t.ppf(0.975, n - 1) * sd / math.sqrt(n)
    return Estimate(float(total), max(float(radius), resolution))


def simulate(eff: EffectiveParams, buf: BufferSpec, link: LinkParams, cfg: SimConfig) -> SimResult:
    """Simulate the storage chain and estimate the limiting metrics.

    Harvests are i.i.d. exponential with mean ``eff.harvest_mean_eff``; uplink
    gains are i.i.d. unit-mean exponential.  The first ``warmup`` slots of each
    replication are discarded.  Confidence radii come from the spread of
    replication means when ``n_replications >= 2``, otherwise from batch
    means within the single replication; every radius is floored at one count
    of resolution.
    """
    if buf.is_finite:
        buf.check_multiple(eff.m_eff)
    warmup = cfg.warmup_for(eff.delta, buf.l)
    lo, hi = _histogram_range(eff, buf, cfg.n_slots)
    reps = range(cfg.n_replications)
    if cfg.workers > 1 and cfg.n_replications > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            outs = list(pool.map(lambda r: _run_replication(r, eff, buf, link, cfg, warmup, lo, hi), reps))
    else:
        outs = [_run_replication(r, eff, buf, link, cfg, warmup, lo, hi) for r in reps]

    hist = np.sum([h for h, _ in outs], axis=0)
    if cfg.n_replications >= 2:
        groups = np.array([acc.sum(axis=0) for _, acc in outs])
    else:
        groups = outs[0][1]
    slots, tx, outage, errs, bits, atoms, overflow = groups.T
    n_total = slots.sum()
    res = 1.0 / n_total
    p_trans = _ratio_estimate(tx, slots, res)
    atom = _ratio_estimate(atoms, slots, res)
    chan = _ratio_estimate(outage, tx, 1.0 / max(tx.sum(), 1.0))
    err = _ratio_estimate(errs, bits, 1.0 / max(bits.sum(), 1.0))
    tot = _ratio_estimate(slots - tx + outage, slots, res)
    masses = hist / n_total
    edges = np.linspace(lo, hi, cfg.histogram_bins + 1)
    non_stationary = (not buf.is_finite) and eff.delta <= 1.0
    return SimResult(p_trans, atom, err, chan, tot, edges, masses, int(n_total),
                     float(overflow.sum() / n_total), non_stationary)


def binned_masses(dist: LimitingDistribution, edges: np.ndarray) -> np.ndarray:
    """Analytic density mass inside each histogram bin (atom excluded)."""
    cdf = np.asarray(dist.cdf(np.minimum(edges, np.nextafter(dist.capacity, 0.0))), dtype=float)
    return np.diff(cdf)


def distribution_distance(result: SimResult, dist: LimitingDistribution) -> dict:
    """L1 and Kolmogorov distances between a simulated histogram and ``dist``.

    ``l1`` compares bin masses of the density only; ``atom`` is the absolute
    atom difference; ``sup_cdf`` is the largest cdf gap over the bin edges,
    with the atom included at K.
    """
    edges = result.histogram_edges
    if edges[0] != 0.0 or (math.isfinite(dist.capacity) and
                           not math.isclose(edges[-1], dist.capacity, rel_tol=1e-12)):
        raise SupportMismatchError("histogram edges do not span the distribution support")
    analytic = binned_masses(dist, edges)
    l1 = float(np.abs(result.histogram_masses - analytic).sum())
    emp_cdf = np.concatenate([[0.0], np.cumsum(result.histogram_masses)])
    ana_cdf = np.concatenate([[0.0], np.cumsum(analytic)])
    atom_emp = result.atom_freq_hat.value
    gaps = np.abs(emp_cdf - ana_cdf)
    if math.isfinite(dist.capacity):
        gaps[-1] = abs(emp_cdf[-1] + atom_emp - ana_cdf[-1] - dist.atom)
    return {"l1": l1, "sup_cdf": float(gaps.max()), "atom": abs(atom_emp - dist.atom)}
