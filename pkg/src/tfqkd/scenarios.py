"""Scenario runners producing CSV plot data.

Each runner takes a :class:`~tfqkd.config.RunConfig` and returns a
:class:`ScenarioResult` of plain tables. Writing the result stamps the
config digest and seed into every file; nothing time-dependent is written,
so the same config and seed give byte-identical files.
"""
from __future__ import annotations

import csv
import dataclasses
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from .channel import ChannelModel, expected_count_table
from .config import RunConfig
from .keyrate import DecoyParams, key_rate, skc0
from .noise_model import FrameSchedule, LinkNoise, SliceConfig, max_linewidth_for_er, mean_er_over_qframe
from .refdata import DISTANCES_KM, load_decoy_params
from .recovery import RecoveryConfig, recover_stream
from .sifting import tally_er
from .synth import BeatCarrier, RateProfile, simulate_run

FIBER_DB_PER_KM = 0.19


@dataclass
class Table:
    name: str
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)


@dataclass
class ScenarioResult:
    scenario: str
    config: RunConfig
    tables: list[Table]
    summary: dict[str, float] = field(default_factory=dict)

    def table(self, name: str) -> Table:
        return next(t for t in self.tables if t.name == name)

    def write(self, out_dir: str | Path) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        header = self.config.provenance({"scenario": self.scenario})
        tables = list(self.tables)
        if self.summary:
            tables.append(Table("summary", ("quantity", "value"), sorted(self.summary.items())))
        paths = []
        for t in tables:
            p = out / f"{self.scenario}_{t.name}.csv"
            write_csv(p, t.columns, t.rows, header)
            paths.append(p)
        return paths


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, columns, rows, header: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(v) for v in r])


def point_seed(seed: int, *index: int) -> int:
    """Deterministic seed of one scenario point."""
    return int(np.random.SeedSequence([int(seed), *index]).generate_state(1, dtype=np.uint64)[0] >> 1)


def _pool_map(func, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(func, items))
    return [func(x) for x in items]


# --------------------------------------------------------------------------
# interference error rate
# --------------------------------------------------------------------------


def simulated_er(carrier: BeatCarrier, noise: LinkNoise, schedule: FrameSchedule, rates: RateProfile,
                 recovery: RecoveryConfig, slice_cfg: SliceConfig, n_frames: int, seed: int,
                 max_events: int = 50_000_000, trajectory_sample_period: float = 10e-9):
    """Monte Carlo ER: simulate, recover the carrier per Q-frame, sift."""
    stream = simulate_run(carrier, noise, schedule, rates, seed=seed, n_frames=n_frames,
                          max_events=max_events, trajectory_sample_period=trajectory_sample_period)
    est = recover_stream(stream, schedule, recovery)
    return tally_er(stream, est, schedule, slice_cfg)


def er_scan(cfg: RunConfig, threads: int = 1) -> ScenarioResult:
    """ER against R-frame duration for several count rates, simulated and analytic."""
    sc, run = cfg["scenario"], cfg["run"]
    noise, carrier, rec, sl = cfg.noise(), cfg.carrier(), cfg.recovery(), cfg.slice()
    t_q = cfg.schedule().t_q
    points = [(i, j, rate, t_r) for i, rate in enumerate(sc["er_scan_rates_mcps"])
              for j, t_r in enumerate(sc["er_scan_t_r_us"])]

    def one(p):
        i, j, rate, t_r = p
        sched = FrameSchedule(t_r * 1e-6, t_q)
        out = simulated_er(carrier, noise, sched, RateProfile(rate * 1e6, rate * 1e6, cfg.rates().dark_rate),
                           rec, sl, sc["er_scan_frames"], point_seed(run["seed"], i, j), run["max_events"],
                           run["trajectory_sample_period_ns"] * 1e-9)
        return rate, t_r, out.er, out.stderr, out.valid, mean_er_over_qframe(noise, sched, sl)

    rows = _pool_map(one, points, threads)
    table = Table("er_vs_tr", ("rate_mcps", "t_r_us", "er_mc", "er_mc_stderr", "n_valid", "er_analytic"), rows)
    summary = {}
    for rate in sc["er_scan_rates_mcps"]:
        sub = [r for r in rows if r[0] == rate]
        best = min(sub, key=lambda r: r[2])
        summary[f"best_t_r_us_at_{rate:g}_mcps"] = best[1]
        summary[f"min_er_mc_at_{rate:g}_mcps"] = best[2]
    return ScenarioResult("er-scan", cfg, [table], summary)


def linewidth_scan(cfg: RunConfig, threads: int = 1) -> ScenarioResult:
    """Analytic ER against laser linewidth (both lasers equal)."""
    sc = cfg["scenario"]
    sched = FrameSchedule(sc["linewidth_scan_t_r_us"] * 1e-6, sc["linewidth_scan_t_q_us"] * 1e-6)
    sl = cfg.slice()
    rows = _pool_map(lambda lw: (lw, mean_er_over_qframe(LinkNoise.white_lasers(lw * 1e3), sched, sl)),
                     sc["linewidth_scan_khz"], threads)
    summary = {
        "slice_floor": sl.floor,
        "max_linewidth_khz_for_er_0.11": max_linewidth_for_er(0.11, sched, sl) / 1e3,
    }
    return ScenarioResult("linewidth-scan", cfg, [Table("er_vs_linewidth", ("linewidth_khz", "er_analytic"), rows)],
                          summary)


# --------------------------------------------------------------------------
# secret key rate
# --------------------------------------------------------------------------


def interpolated_params(distance_km: float, n_total: float, base: DecoyParams | None = None,
                        finite_size: bool = True) -> DecoyParams:
    """Source parameters interpolated linearly between the tabulated distances."""
    rows = [load_decoy_params(d) for d in DISTANCES_KM]
    d = float(np.clip(distance_km, DISTANCES_KM[0], DISTANCES_KM[-1]))
    vals = {}
    for name in ("mu_y", "mu_x", "mu_o", "p_z", "epsilon", "p_x"):
        vals[name] = float(np.interp(d, DISTANCES_KM, [getattr(r, name) for r in rows]))
    ref = base or rows[0]
    return dataclasses.replace(ref, n_total=n_total, finite_size=finite_size, **vals)


def forward_key_rate(distance_km: float, n_total: float, channel: ChannelModel, base: DecoyParams,
                     finite_size: bool = True) -> float:
    params = interpolated_params(distance_km, n_total, base, finite_size)
    return key_rate(expected_count_table(params, channel), params).R


def fit_loss_exponent(loss_db: np.ndarray, rate: np.ndarray) -> float:
    """Slope ``b`` of ``log R = b log eta + c`` over points with R > 0."""
    ok = rate > 0
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(-loss_db[ok] / 10.0, np.log10(rate[ok]), 1)[0])


def skr_curve(cfg: RunConfig, threads: int = 1) -> ScenarioResult:
    """Key rate against fiber length for several finite sizes, with SKC0."""
    sc = cfg["scenario"]
    base = cfg.decoy()
    ch0 = cfg.channel()
    dists = sc["skr_distances_km"]
    sizes = sc["skr_n_totals"]

    def one(d):
        ch = dataclasses.replace(ch0, loss_db=FIBER_DB_PER_KM * d, dark_prob=sc["skr_dark_prob"])
        asym = forward_key_rate(d, sizes[-1], ch, base, finite_size=False)
        fin = [forward_key_rate(d, n, ch, base) for n in sizes]
        return (d, ch.loss_db, skc0(ch.loss_db), asym, *fin)

    rows = _pool_map(one, dists, threads)
    cols = ("distance_km", "loss_db", "skc0", "r_asymptotic") + tuple(f"r_n{n:.0e}".replace("+", "") for n in sizes)
    table = Table("skr_vs_distance", cols, rows)

    # the scaling fit holds the source parameters fixed so only the channel varies
    fixed = dataclasses.replace(base, finite_size=False)
    fit_rows = []
    for l in np.linspace(40, 90, 11):
        ch = dataclasses.replace(ch0, loss_db=float(l), dark_prob=sc["skr_dark_prob"])
        fit_rows.append((float(l), key_rate(expected_count_table(fixed, ch), fixed).R))
    fit = Table("asymptotic_fit_points", ("loss_db", "r_asymptotic"), fit_rows)
    summary = {"loss_exponent_40_90db": fit_loss_exponent(fit.column("loss_db"), fit.column("r_asymptotic"))}
    # first distance where the largest finite size beats SKC0 (beyond the first km)
    beats = [r[0] for r in rows if r[0] > 0 and r[-1] > r[2]]
    summary["first_distance_beating_skc0_km"] = beats[0] if beats else math.nan
    return ScenarioResult("skr-curve", cfg, [table, fit], summary)


# --------------------------------------------------------------------------
# FFT histogram
# --------------------------------------------------------------------------


def _gauss(x, a, m, s):
    return a * np.exp(-0.5 * ((x - m) / s) ** 2)


def histogram_fwhm(values: np.ndarray, step: float, center: float) -> dict[str, float]:
    """FWHM of estimates lying on a frequency grid of spacing ``step``.

    The histogram uses one bin per grid point; a Gaussian is fitted to it.
    ``fwhm_std`` is ``2 sqrt(2 ln 2)`` times the sample standard deviation.
    """
    k = np.rint((values - center) / step).astype(np.int64)
    ks = np.arange(k.min(), k.max() + 1)
    counts = np.bincount(k - k.min())
    x = ks * step
    out = {"fwhm_std": 2 * math.sqrt(2 * math.log(2)) * float(np.std(values)),
           "mean_offset": float(np.mean(values) - center)}
    if ks.size >= 3:
        try:
            with warnings.catch_warnings():
                # a histogram narrower than the grid leaves the width unconstrained
                warnings.simplefilter("ignore", OptimizeWarning)
                p, _ = curve_fit(_gauss, x, counts, p0=[counts.max(), x[np.argmax(counts)], max(np.std(values), step)])
            out["fwhm_fit"] = 2 * math.sqrt(2 * math.log(2)) * abs(float(p[2]))
            out["fit_residual_rms"] = float(np.sqrt(np.mean((_gauss(x, *p) - counts) ** 2)))
        except RuntimeError:
            out["fwhm_fit"] = out["fit_residual_rms"] = math.nan
    else:
        out["fwhm_fit"] = out["fit_residual_rms"] = math.nan
    return out


def fft_hist(cfg: RunConfig, threads: int = 1) -> ScenarioResult:
    """Histograms of the frequency estimate with and without zero padding."""
    sc, run = cfg["scenario"], cfg["run"]
    sched, carrier = cfg.schedule(), cfg.carrier()
    rates = dataclasses.replace(cfg.rates(), q_rate=0.0)
    stream = simulate_run(carrier, cfg.noise(), sched, rates, seed=run["seed"], n_frames=sc["fft_hist_frames"],
                          max_events=run["max_events"], trajectory_sample_period=run["trajectory_sample_period_ns"] * 1e-9)
    tables, summary = [], {}
    bin_hz = sc["fft_hist_bin_khz"] * 1e3
    for pad in (True, False):
        rec = dataclasses.replace(cfg.recovery(), pad=pad)
        est = recover_stream(stream, sched, rec, threads=threads)
        nu = np.array([est[k].nu_hat for k in sorted(est)])
        span = sched.r_frame_ps(1)[1] - sched.r_frame_ps(0)[0] if rec.duplex else sched.r_frame_ps(0)[1]
        length = rec.fft_length(-(-span // rec.bin_ps))
        step = 1.0 / (length * rec.bin_width)
        tag = "padded" if pad else "unpadded"
        for k, v in histogram_fwhm(nu, step, carrier.nu).items():
            summary[f"{tag}_{k}_hz"] = v
        summary[f"{tag}_grid_step_hz"] = step
        summary[f"{tag}_estimates"] = float(nu.size)
        edges = np.arange(math.floor((nu.min() - carrier.nu) / bin_hz), math.ceil((nu.max() - carrier.nu) / bin_hz) + 2)
        counts, e = np.histogram(nu - carrier.nu, bins=edges * bin_hz)
        tables.append(Table(f"hist_{tag}", ("offset_hz_lo", "offset_hz_hi", "count"),
                            list(zip(e[:-1], e[1:], counts.astype(int)))))
    return ScenarioResult("fft-hist", cfg, tables, summary)


SCENARIOS = {
    "er-scan": er_scan,
    "linewidth-scan": linewidth_scan,
    "skr-curve": skr_curve,
    "fft-hist": fft_hist,
}
