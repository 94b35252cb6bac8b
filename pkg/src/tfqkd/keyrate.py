"""Finite-size key rate of 3-intensity sending-or-not-sending TF-QKD with AOPP.

Labels follow the results-table convention ``Detected-AB ab``: ``A``/``B`` is
the window type chosen by Alice/Bob (``Z`` signal window, ``X`` decoy or
vacuum window) and ``a``/``b`` the source actually used (``y`` signal, ``x``
decoy, ``o`` vacuum).

Source pairs used by the decoy analysis exclude the ZZ windows (those feed
the raw key only), e.g. ``n_oo' = XXoo + XZoo + ZXoo`` and
``n_oy' = XZoy``; the expected pulse numbers ``N_kz`` are built the same way.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import chernoff

DETECTED_LABELS = (
    "ZZyy", "ZZyo", "ZZoy", "ZZoo",
    "ZXyx", "ZXyo", "ZXox", "ZXoo",
    "XZxy", "XZxo", "XZoy", "XZoo",
    "XXxx", "XXxo", "XXox", "XXoo",
)

#: source pair -> table labels contributing to it
PAIR_LABELS = {
    "oo": ("XXoo", "XZoo", "ZXoo"),
    "ox": ("XXox", "ZXox"),
    "xo": ("XXxo", "XZxo"),
    "oy": ("XZoy",),
    "yo": ("ZXyo",),
    "xx": ("XXxx",),
}

SKC0_CAP = 60.0


# --------------------------------------------------------------------------
# parameters and observed data
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FailureProbs:
    eps_est: float = 1e-10
    eps_cor: float = 1e-10
    eps_pa: float = 1e-10
    eps_hat: float = 1e-10

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not (0.0 < v < 1.0):
                raise ValueError(f"{k} must lie in (0, 1)")


@dataclass(frozen=True)
class DecoyParams:
    """Source intensities, window probabilities and finite-size settings.

    ``p_z`` is the signal-window probability, ``p_x`` the decoy-window
    probability and ``epsilon`` the sending probability inside a signal
    window. With ``finite_size=False`` every statistical-fluctuation
    correction is switched off (asymptotic mode).
    """

    mu_y: float
    mu_x: float
    mu_o: float
    p_z: float
    epsilon: float
    p_x: float
    n_total: float
    f_ec: float = 1.1
    failure: FailureProbs = field(default_factory=FailureProbs)
    finite_size: bool = True

    def __post_init__(self):
        if not (0 <= self.mu_o < self.mu_x < self.mu_y):
            raise ValueError("intensities must satisfy 0 <= mu_o < mu_x < mu_y")
        for name in ("p_z", "epsilon", "p_x"):
            if not (0.0 <= getattr(self, name) <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.p_z + self.p_x > 1.0 + 1e-12:
            raise ValueError("p_z + p_x must not exceed 1")
        if self.n_total <= 0:
            raise ValueError("n_total must be positive")
        if self.f_ec < 1.0:
            raise ValueError("f_ec must be >= 1")

    @property
    def p_o(self) -> float:
        return max(0.0, 1.0 - self.p_z - self.p_x)

    def window_probs(self) -> dict[str, float]:
        """Probability of each (window, source) choice for one party."""
        return {
            "Zy": self.p_z * self.epsilon,
            "Zo": self.p_z * (1.0 - self.epsilon),
            "Xx": self.p_x,
            "Xo": self.p_o,
        }

    def expected_sent(self) -> dict[str, float]:
        """Expected number of pulse pairs sent for every table label."""
        w = self.window_probs()
        out = {}
        for lab in DETECTED_LABELS:
            out[lab] = self.n_total * w.get(lab[0] + lab[2], 0.0) * w.get(lab[1] + lab[3], 0.0)
        return out


@dataclass
class CountTable:
    """Observed counts of one finite-size run, in the results-table layout.

    ``detected`` maps every label of :data:`DETECTED_LABELS` to its number of
    one-detector heralded events. ``sent`` (optional) holds the pulse pairs
    actually sent per label; when absent the expected values implied by the
    parameters are used. ``n_g``/``n_odd``/``n_x_sent`` are reconstructed
    from the other rows when not supplied, see :meth:`aopp_observables` and
    :meth:`x_sent`.
    """

    n_total: float
    detected: dict[str, float]
    x_matched: float
    x_matched_correct: float
    n_t: float
    qber_z: float
    n_t_after: float
    qber_after: float
    n_g: float | None = None
    n_odd: float | None = None
    sent: dict[str, float] | None = None
    n_x_sent: float | None = None
    diagnostics: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        missing = set(DETECTED_LABELS) - set(self.detected)
        if missing:
            raise ValueError(f"missing detected labels: {sorted(missing)}")
        if any(v < 0 for v in self.detected.values()):
            raise ValueError("detected counts must be >= 0")
        if self.sent is not None:
            for lab in DETECTED_LABELS:
                if self.detected[lab] > self.sent.get(lab, math.inf):
                    raise ValueError(f"{lab}: detected exceeds sent")
        if not (0 <= self.x_matched_correct <= self.x_matched):
            raise ValueError("matched X counts inconsistent")
        for name in ("qber_z", "qber_after"):
            if not (0.0 <= getattr(self, name) <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.n_g is not None and self.n_odd is not None:
            if not (0 <= self.n_odd <= self.n_g <= self.n_t):
                raise ValueError("AOPP observables must satisfy 0 <= n_odd <= n_g <= n_t")

    # -- derived quantities ---------------------------------------------------

    @property
    def m_x(self) -> float:
        """Error events among matched X-basis pairs."""
        return self.x_matched - self.x_matched_correct

    def pair_counts(self) -> dict[str, float]:
        return {k: float(sum(self.detected[lab] for lab in labs)) for k, labs in PAIR_LABELS.items()}

    def pair_sent(self, params: DecoyParams) -> dict[str, float]:
        sent = self.sent if self.sent is not None else params.expected_sent()
        return {k: float(sum(sent[lab] for lab in labs)) for k, labs in PAIR_LABELS.items()}

    def x_sent(self, params: DecoyParams) -> float:
        """Number of sent decoy-decoy pairs passing the phase post-selection.

        Without an explicit value the matched fraction of the detected XXxx
        events is applied to the sent XXxx pairs.
        """
        if self.n_x_sent is not None:
            return float(self.n_x_sent)
        n_xx = self.pair_sent(params)["xx"]
        det = self.detected["XXxx"]
        if det <= 0:
            raise ValueError("cannot reconstruct N_X without detected XXxx events")
        return n_xx * self.x_matched / det

    def aopp_observables(self) -> tuple[float, float]:
        """``(n_g, n_odd)``; reconstructed from the ZZ rows when missing.

        Bob's raw bit is 0 when he sent (``ZZyy``, ``ZZoy``) and 1 otherwise.
        AOPP pairs every minority bit with a majority bit, so
        ``n_g = min(#0, #1)``; random two-by-two grouping gives an expected
        ``n_t * p0 * p1`` odd-parity pairs.
        """
        if self.n_g is not None and self.n_odd is not None:
            return float(self.n_g), float(self.n_odd)
        b0 = self.detected["ZZyy"] + self.detected["ZZoy"]
        b1 = self.detected["ZZyo"] + self.detected["ZZoo"]
        total = b0 + b1
        if total <= 0:
            return 0.0, 0.0
        n_g = float(min(b0, b1)) if self.n_g is None else float(self.n_g)
        n_odd = float(total * (b0 / total) * (b1 / total)) if self.n_odd is None else float(self.n_odd)
        return n_g, n_odd

    # -- serialization --------------------------------------------------------

    def rows(self) -> list[tuple[str, float]]:
        rows: list[tuple[str, float]] = [("N_send", self.n_total)]
        rows += [(f"Detected-{lab}", self.detected[lab]) for lab in DETECTED_LABELS]
        rows += [
            ("Detected XXxx matching", self.x_matched),
            ("Correct XXxx matching", self.x_matched_correct),
            ("Sifted key bits in Z-basis before AOPP", self.n_t),
            ("QBER_ZZ before AOPP", self.qber_z),
            ("Survived key bits in Z-basis after AOPP", self.n_t_after),
            ("QBER_ZZ after AOPP", self.qber_after),
        ]
        if self.n_g is not None:
            rows.append(("AOPP pairs n_g", self.n_g))
        if self.n_odd is not None:
            rows.append(("Random odd-parity pairs n_odd", self.n_odd))
        if self.n_x_sent is not None:
            rows.append(("Sent XXxx matching", self.n_x_sent))
        if self.sent is not None:
            rows += [(f"Sent-{lab}", self.sent[lab]) for lab in DETECTED_LABELS]
        rows += [(f"diag:{k}", v) for k, v in sorted(self.diagnostics.items())]
        return rows

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label", "value"])
        for lab, v in self.rows():
            w.writerow([lab, _fmt(v)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_mapping(cls, m: dict[str, float]) -> "CountTable":
        def get(key, default=None):
            return float(m[key]) if key in m else default

        sent = None
        if all(f"Sent-{lab}" in m for lab in DETECTED_LABELS):
            sent = {lab: float(m[f"Sent-{lab}"]) for lab in DETECTED_LABELS}
        try:
            return cls(
                n_total=float(m["N_send"]),
                detected={lab: float(m[f"Detected-{lab}"]) for lab in DETECTED_LABELS},
                x_matched=float(m["Detected XXxx matching"]),
                x_matched_correct=float(m["Correct XXxx matching"]),
                n_t=float(m["Sifted key bits in Z-basis before AOPP"]),
                qber_z=float(m["QBER_ZZ before AOPP"]),
                n_t_after=float(m["Survived key bits in Z-basis after AOPP"]),
                qber_after=float(m["QBER_ZZ after AOPP"]),
                n_g=get("AOPP pairs n_g"),
                n_odd=get("Random odd-parity pairs n_odd"),
                sent=sent,
                n_x_sent=get("Sent XXxx matching"),
                diagnostics={k[5:]: float(v) for k, v in m.items() if k.startswith("diag:")},
            )
        except KeyError as exc:
            raise ValueError(f"count table is missing row {exc.args[0]!r}") from None

    @classmethod
    def from_csv(cls, path: str | Path) -> "CountTable":
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        if not rows or rows[0] != ["label", "value"]:
            raise ValueError(f"{path}: expected a 'label,value' header")
        return cls.from_mapping({r[0]: float(r[1]) for r in rows[1:]})


def _fmt(v: float) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() and abs(v) < 1e16 else repr(v)


# --------------------------------------------------------------------------
# decoy-state analysis
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RateBounds:
    observed: float
    lower: float
    upper: float


def _exp_bounds(n: float, params: DecoyParams) -> tuple[float, float]:
    if not params.finite_size:
        return n, n
    eps = params.failure.eps_est
    return chernoff.expected_lower(n, eps), chernoff.expected_upper(n, eps)


def expected_counting_rates(table: CountTable, params: DecoyParams) -> dict[str, RateBounds]:
    """Confidence bounds on the expected counting rates ``<S_kz>``.

    Returns bounds for the pairs ``oo, ox, xo, oy, yo`` and for the X-basis
    error rate ``tx = m_X / N_X``.
    """
    counts = table.pair_counts()
    sent = table.pair_sent(params)
    out = {}
    for key in ("oo", "ox", "xo", "oy", "yo"):
        n_sent = sent[key]
        if n_sent <= 0:
            raise ValueError(f"no pulses sent for source pair {key}")
        lo, hi = _exp_bounds(counts[key], params)
        out[key] = RateBounds(counts[key] / n_sent, min(lo / n_sent, 1.0), min(hi / n_sent, 1.0))
    n_x = table.x_sent(params)
    if n_x <= 0:
        raise ValueError("N_X must be positive")
    lo, hi = _exp_bounds(table.m_x, params)
    out["tx"] = RateBounds(table.m_x / n_x, min(lo / n_x, 1.0), min(hi / n_x, 1.0))
    return out


@dataclass(frozen=True)
class DecoyBounds:
    s01_lo: float
    s10_lo: float
    s1_lo: float
    clamped: tuple[str, ...] = ()


def decoy_lower_bounds(rates: dict[str, RateBounds], params: DecoyParams) -> DecoyBounds:
    """Lower bounds on the single-photon counting rates of |01> and |10>.

    Security-pessimistic choices: the positive ``S_ox'`` term takes its lower
    bound, the subtracted ``S_oy'`` and ``S_oo'`` terms their upper bounds.
    """
    my, mx = params.mu_y, params.mu_x
    if my == mx:
        raise ValueError("mu_y and mu_x must differ")
    den = my * mx * (my - mx)
    oo = rates["oo"].upper

    def bound(decoy: RateBounds, signal: RateBounds) -> float:
        return (my**2 * math.exp(mx) * decoy.lower - mx**2 * math.exp(my) * signal.upper
                - (my**2 - mx**2) * oo) / den

    s01 = bound(rates["ox"], rates["oy"])
    s10 = bound(rates["xo"], rates["yo"])
    clamped = tuple(name for name, v in (("s01_lo", s01), ("s10_lo", s10)) if v < 0)
    s01, s10 = max(s01, 0.0), max(s10, 0.0)
    return DecoyBounds(s01, s10, 0.5 * (s01 + s10), clamped)


@dataclass(frozen=True)
class PhaseErrorBound:
    n10_lo: float
    n01_lo: float
    e1ph_hi: float


def untagged_and_phase_error(bounds: DecoyBounds, params: DecoyParams,
                             rates: dict[str, RateBounds]) -> PhaseErrorBound:
    """Expected untagged bits and the upper bound on their phase-flip error rate.

    The decoy intensity ``mu_x`` plays the role of both X-window intensities.
    ``<T_X>`` takes its upper bound and the subtracted vacuum term its lower
    bound. ``e1ph_hi`` is ``inf`` when ``s1_lo`` is zero.
    """
    pre = params.n_total * params.p_z**2 * params.epsilon * (1 - params.epsilon) * params.mu_y * math.exp(-params.mu_y)
    n10 = pre * bounds.s10_lo
    n01 = pre * bounds.s01_lo
    mu_sum = 2.0 * params.mu_x
    att = math.exp(-mu_sum)
    if bounds.s1_lo <= 0:
        return PhaseErrorBound(n10, n01, math.inf)
    e1 = (rates["tx"].upper - att * rates["oo"].lower / 2.0) / (att * mu_sum * bounds.s1_lo)
    return PhaseErrorBound(n10, n01, max(e1, 0.0))


# --------------------------------------------------------------------------
# AOPP
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AoppResult:
    u: float = math.nan
    n10: float = math.nan
    n01: float = math.nan
    n1: float = math.nan
    n1_r: float = math.nan
    n01_prime: float = math.nan
    n10_prime: float = math.nan
    n_min: float = math.nan
    n1_prime: float = 0.0
    r: float = math.nan
    e_tau: float = math.nan
    m_s: float = math.nan
    e1ph_prime: float = 0.5
    e_tau_capped: bool = False
    failed_stage: str | None = None


def aopp(n10_lo: float, n01_lo: float, e1ph_hi: float, table: CountTable,
         params: DecoyParams) -> AoppResult:
    """Untagged bits and phase-flip error rate surviving odd-parity pairing.

    Follows the chain u -> n10, n01 -> n1 -> n1^r -> n01', n10' -> n_min ->
    n1' and r -> e_tau -> M_s -> e1ph'. Any intermediate that is not strictly
    positive stops the chain and is named in ``failed_stage``.
    """
    eps = params.failure.eps_est
    fin = params.finite_size
    phi_l = (lambda x: chernoff.phi_lower(x, eps)) if fin else (lambda x: x)
    phi_u = (lambda x: chernoff.phi_upper(x, eps)) if fin else (lambda x: x)

    n_g, n_odd = table.aopp_observables()
    if n_odd <= 0 or n_g <= 0:
        return AoppResult(failed_stage="pairing")
    u = n_g / (2.0 * n_odd)
    n10 = phi_l(u * n10_lo)
    n01 = phi_l(u * n01_lo)
    n1 = n10 + n01
    if n1 <= 0 or table.n_t <= 0:
        return AoppResult(u=u, n10=n10, n01=n01, n1=n1, failed_stage="n1")
    n1_r = phi_l(n1**2 / (2.0 * u * table.n_t))
    if n1_r <= 0:
        return AoppResult(u=u, n10=n10, n01=n01, n1=n1, n1_r=n1_r, failed_stage="n1_r")
    dev = math.sqrt(-math.log(eps) / (2.0 * n1_r)) if fin else 0.0
    n01p = 2.0 * n1_r * (n01 / n1 - dev)
    n10p = 2.0 * n1_r * (n10 / n1 - dev)
    n_min = min(n01p, n10p)
    partial = dict(u=u, n10=n10, n01=n01, n1=n1, n1_r=n1_r, n01_prime=n01p, n10_prime=n10p, n_min=n_min)
    if n_min <= 0:
        return AoppResult(**partial, failed_stage="n_min")
    n1p = 2.0 * phi_l(n_min * (1.0 - n_min / (2.0 * n1_r)))
    if n1p <= 0:
        return AoppResult(**partial, n1_prime=0.0, failed_stage="n1_prime")
    partial["n1_prime"] = n1p
    if fin:
        gap = n1 - 2.0 * n1_r
        if gap <= 0:
            return AoppResult(**partial, failed_stage="r")
        r = n1 / gap * math.log(3.0 * gap**2 / eps)
    else:
        r = 0.0
    if not math.isfinite(e1ph_hi):
        return AoppResult(**partial, r=r, failed_stage="e1ph")
    den = 2.0 * n1_r - r
    if den <= 0:
        return AoppResult(**partial, r=r, failed_stage="e_tau")
    e_tau = phi_u(2.0 * n1_r * e1ph_hi) / den
    # e (1 - e) peaks at 1/2: capping there keeps M_s worst case
    capped = e_tau > 0.5
    e_tau = min(e_tau, 0.5)
    m_s = phi_u(max(n1_r - r, 0.0) * e_tau * (1.0 - e_tau)) + r
    e1p = 2.0 * m_s / n1p
    return AoppResult(**partial, r=r, e_tau=e_tau, m_s=m_s, e1ph_prime=e1p, e_tau_capped=capped)


# --------------------------------------------------------------------------
# key rate
# --------------------------------------------------------------------------


def binary_entropy(x):
    """Shannon binary entropy in bits, with h(0) = h(1) = 0."""
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)):
        raise ValueError("argument must lie in [0, 1]")
    inner = (x > 0) & (x < 1)
    xs = np.where(inner, x, 0.5)
    out = np.where(inner, -xs * np.log2(xs) - (1 - xs) * np.log2(1 - xs), 0.0)
    return float(out) if out.ndim == 0 else out


def skc0(total_loss_db: float) -> float:
    """Repeaterless secret-key capacity ``-log2(1 - eta)`` in bits per pulse.

    Lossless channels (``eta = 1``) return :data:`SKC0_CAP`.
    """
    if total_loss_db < 0:
        raise ValueError("loss must be >= 0 dB")
    eta = 10.0 ** (-total_loss_db / 10.0)
    if eta >= 1.0:
        return SKC0_CAP
    return min(-math.log1p(-eta) / math.log(2.0), SKC0_CAP)


@dataclass
class KeyRateReport:
    """Every intermediate of the key-rate calculation, for auditing."""

    s_oo: RateBounds | None = None
    s_ox: RateBounds | None = None
    s_xo: RateBounds | None = None
    s_oy: RateBounds | None = None
    s_yo: RateBounds | None = None
    t_x: RateBounds | None = None
    s01_lo: float = 0.0
    s10_lo: float = 0.0
    s1_lo: float = 0.0
    n10_lo: float = 0.0
    n01_lo: float = 0.0
    e1ph_hi: float = math.nan
    aopp: AoppResult = field(default_factory=AoppResult)
    n1_prime: float = 0.0
    e1ph_prime: float = 0.5
    n_t_prime: float = 0.0
    e_prime: float = 0.0
    leak_ec: float = 0.0
    finite_penalty: float = 0.0
    R: float = 0.0
    R_unclamped: float = 0.0
    K: float | None = None
    clamped: tuple[str, ...] = ()
    no_key_stage: str | None = None
    notes: tuple[str, ...] = ()

    @property
    def has_key(self) -> bool:
        return self.R > 0

    def items(self) -> list[tuple[str, object]]:
        out: list[tuple[str, object]] = []
        for name in ("s_oo", "s_ox", "s_xo", "s_oy", "s_yo", "t_x"):
            rb = getattr(self, name)
            if rb is not None:
                out += [(f"{name}_obs", rb.observed), (f"{name}_lo", rb.lower), (f"{name}_hi", rb.upper)]
        out += [(k, getattr(self, k)) for k in ("s01_lo", "s10_lo", "s1_lo", "n10_lo", "n01_lo", "e1ph_hi")]
        out += [(f"aopp_{k}", v) for k, v in asdict(self.aopp).items()]
        out += [(k, getattr(self, k)) for k in ("n1_prime", "e1ph_prime", "n_t_prime", "e_prime",
                                                 "leak_ec", "finite_penalty", "R_unclamped", "R", "K")]
        out += [("clamped", ";".join(self.clamped)), ("no_key_stage", self.no_key_stage or ""),
                ("notes", ";".join(self.notes))]
        return out

    def to_text(self) -> str:
        lines = []
        for k, v in self.items():
            if isinstance(v, float):
                v = repr(v)
            lines.append(f"{k} = {'' if v is None else v}")
        return "\n".join(lines) + "\n"


def key_rate(table: CountTable, params: DecoyParams, slots_per_second: float | None = None) -> KeyRateReport:
    """Run the whole chain from a count table to the secret key rate.

    ``R`` is in bits per sent pulse pair and clamped at zero; ``K`` is
    ``R * slots_per_second`` when a slot rate is given.
    """
    if not (0.0 <= table.qber_after <= 0.5):
        raise ValueError("bit error rate after AOPP must lie in [0, 0.5]")
    rep = KeyRateReport(n_t_prime=table.n_t_after, e_prime=table.qber_after)
    notes = ["T_X enters with its upper confidence bound"]
    if table.n_g is None or table.n_odd is None:
        notes.append("n_g/n_odd reconstructed from ZZ rows")
    if table.n_x_sent is None:
        notes.append("N_X reconstructed from the matched fraction of detected XXxx")
    rep.notes = tuple(notes)

    if sum(table.detected.values()) == 0:
        rep.no_key_stage = "no_counts"
        return _finish(rep, slots_per_second)

    rates = expected_counting_rates(table, params)
    rep.s_oo, rep.s_ox, rep.s_xo = rates["oo"], rates["ox"], rates["xo"]
    rep.s_oy, rep.s_yo, rep.t_x = rates["oy"], rates["yo"], rates["tx"]

    b = decoy_lower_bounds(rates, params)
    rep.s01_lo, rep.s10_lo, rep.s1_lo = b.s01_lo, b.s10_lo, b.s1_lo
    clamped = list(b.clamped)
    pe = untagged_and_phase_error(b, params, rates)
    rep.n10_lo, rep.n01_lo, rep.e1ph_hi = pe.n10_lo, pe.n01_lo, pe.e1ph_hi
    if b.s1_lo <= 0:
        rep.clamped = tuple(clamped)
        rep.no_key_stage = "decoy"
        return _finish(rep, slots_per_second)

    res = aopp(pe.n10_lo, pe.n01_lo, pe.e1ph_hi, table, params)
    rep.aopp = res
    if res.failed_stage is not None:
        if res.failed_stage in ("n_min", "n1_prime"):
            clamped.append(res.failed_stage)
        rep.clamped = tuple(clamped)
        rep.no_key_stage = f"aopp:{res.failed_stage}"
        return _finish(rep, slots_per_second)

    if res.e_tau_capped:
        clamped.append("e_tau")
    e1p = res.e1ph_prime
    if e1p > 0.5:
        clamped.append("e1ph_prime")
        e1p = 0.5
    rep.n1_prime, rep.e1ph_prime = res.n1_prime, e1p

    rep.leak_ec = params.f_ec * table.n_t_after * binary_entropy(table.qber_after)
    if params.finite_size:
        fp = params.failure
        rep.finite_penalty = 2 * math.log2(2 / fp.eps_cor) + 4 * math.log2(1 / (math.sqrt(2) * fp.eps_pa * fp.eps_hat))
    raw = (res.n1_prime * (1 - binary_entropy(e1p)) - rep.leak_ec - rep.finite_penalty) / params.n_total
    rep.R_unclamped = raw
    if raw <= 0:
        clamped.append("R")
        rep.no_key_stage = "privacy_amplification"
    rep.R = max(raw, 0.0)
    rep.clamped = tuple(clamped)
    return _finish(rep, slots_per_second)


def _finish(rep: KeyRateReport, slots_per_second: float | None) -> KeyRateReport:
    if slots_per_second is not None:
        rep.K = rep.R * slots_per_second
    return rep
