"""Monte Carlo harness: trial execution, summaries, and figure sweeps.

Trials are independently seeded from (master_seed, trial_index) through
purpose-tagged Philox streams, so any run is reproducible bit-for-bit and
independent of execution order or worker count. Sweeps emit rows for one
fixed CSV schema (see CSV_HEADER); fields that do not apply to a row are
left empty.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import analysis, channel, coding
from .analysis import Criterion, GammaParams
from .channel import ChannelRealization, SystemConfig
from .coding import Construction, EncodingMatrix
from .errors import EmptySample, InvalidShape, NonIntegralBlocklength, ShapeMismatch
from .numerics import Rng, ks_distance

CSV_HEADER = [
    "experiment",
    "snr_db",
    "rate",
    "l",
    "l_tilde",
    "scheme",
    "trials",
    "mean_mse",
    "var_mse",
    "theory_mean",
    "theory_var",
    "ks_stat",
    "exceedance",
    "bound",
]

SWEEPABLE_PARAMETERS = {"snr_db", "rate", "l_tilde", "epsilon", "eta"}

# Purpose tags for flat Philox streams under one master seed.
_STREAM_TRIAL = 1
_STREAM_CHANNEL = 2
_STREAM_CONSTRUCT = 3
_STREAM_ORACLE = 4
_STREAM_VALIDATE = 5


def stream_id(purpose: int, index: int = 0) -> int:
    """Distinct 64-bit stream key per (purpose, index) pair."""
    if index < 0 or index >= 1 << 48:
        raise ValueError("stream index out of range")
    return (purpose << 48) + index


class ChannelMode(str, Enum):
    FIXED_UNIT_MIN_GAIN = "fixed-unit"
    RICIAN_PER_TRIAL = "rician-per-trial"
    FIXED_FROM_SEED = "fixed-from-seed"


@dataclass(eq=False)
class ExperimentPlan:
    """Everything needed to rerun one batch of transmissions."""

    config: SystemConfig
    construction: Construction = Construction.RANDOM_ORTHONORMAL
    trials: int = 1000
    channel_mode: ChannelMode = ChannelMode.RICIAN_PER_TRIAL
    sweep: list[tuple[str, list[float]]] | None = None
    output_path: str | None = None
    matrix_path: str | None = None

    def __post_init__(self):
        self.construction = Construction(self.construction)
        self.channel_mode = ChannelMode(self.channel_mode)
        if self.trials < 1:
            raise ValueError("need at least one trial")
        for name, _values in self.sweep or []:
            if name not in SWEEPABLE_PARAMETERS:
                raise ValueError(
                    f"unknown sweep parameter {name!r}; expected one of "
                    f"{sorted(SWEEPABLE_PARAMETERS)}"
                )

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "construction": self.construction.value,
            "trials": self.trials,
            "channel_mode": self.channel_mode.value,
            "sweep": self.sweep,
            "output_path": self.output_path,
            "matrix_path": self.matrix_path,
        }


@dataclass(eq=False)
class TrialSet:
    """Realized distortions plus per-trial channel metadata."""

    plan: ExperimentPlan
    samples: np.ndarray
    channel_min_gains: np.ndarray
    p_used: np.ndarray


@dataclass
class MseReport:
    mean: float
    variance: float
    theory_mean: float
    theory_variance: float
    ks_statistic: float | None = None
    exceedance_freq: float | None = None
    degenerate: bool = False

    def to_json(self) -> dict:
        return {
            "mean": self.mean,
            "variance": self.variance,
            "theory_mean": self.theory_mean,
            "theory_variance": self.theory_variance,
            "ks_statistic": self.ks_statistic,
            "exceedance_freq": self.exceedance_freq,
            "degenerate": self.degenerate,
        }


def build_encoding(plan: ExperimentPlan) -> EncodingMatrix:
    """Materialize the plan's encoding matrix (seeded from the config)."""
    config = plan.config
    if plan.construction is Construction.RANDOM_ORTHONORMAL:
        rng = Rng(config.master_seed, stream_id(_STREAM_CONSTRUCT))
        return coding.construct_random_orthonormal(config.l_tilde, config.l, rng)
    if plan.construction is Construction.IDENTITY:
        if config.l_tilde != config.l:
            raise InvalidShape("identity construction needs l_tilde == l")
        return coding.construct_identity(config.l)
    if plan.construction is Construction.REPETITION:
        if config.l_tilde % config.l != 0:
            raise InvalidShape(
                "repetition construction needs l_tilde to be a multiple of l"
            )
        return coding.construct_repetition(config.l, config.l_tilde // config.l)
    if plan.matrix_path is None:
        raise ValueError("custom construction needs matrix_path")
    enc = coding.load_matrix(plan.matrix_path)
    if enc.l != config.l or enc.l_tilde != config.l_tilde:
        raise ShapeMismatch(
            f"matrix file shape ({enc.l_tilde}, {enc.l}) does not match "
            f"config ({config.l_tilde}, {config.l})"
        )
    return enc


def fixed_channel_for(plan: ExperimentPlan) -> ChannelRealization | None:
    if plan.channel_mode is ChannelMode.FIXED_UNIT_MIN_GAIN:
        return channel.all_ones_channel(plan.config.k_users)
    if plan.channel_mode is ChannelMode.FIXED_FROM_SEED:
        rng = Rng(plan.config.master_seed, stream_id(_STREAM_CHANNEL, 0))
        return channel.sample_rician(plan.config, rng)
    return None


def _run_chunk(args):
    enc, config, mode, fixed, start, stop = args
    n = stop - start
    samples = np.empty(n)
    min_gains = np.empty(n)
    p_used = np.empty(n)
    ch = fixed
    p = None if ch is None else channel.max_power_scaling(ch, config)
    for j, i in enumerate(range(start, stop)):
        if mode is ChannelMode.RICIAN_PER_TRIAL:
            ch = channel.sample_rician(
                config, Rng(config.master_seed, stream_id(_STREAM_CHANNEL, i))
            )
            p = channel.max_power_scaling(ch, config)
        trial_rng = Rng(config.master_seed, stream_id(_STREAM_TRIAL, i))
        outcome = channel.run_round(enc, config, ch, p, trial_rng)
        samples[j] = outcome.distortion
        min_gains[j] = ch.min_gain
        p_used[j] = p
    return samples, min_gains, p_used


def run_trials(plan: ExperimentPlan, workers: int = 1) -> TrialSet:
    """Execute the plan's transmissions at the maximal power scaling.

    The channel is held fixed across trials in the fixed modes and redrawn
    per trial otherwise; the power scaling is recomputed whenever the
    channel changes. Results are identical for any worker count.
    """
    enc = build_encoding(plan)
    fixed = fixed_channel_for(plan)
    config = plan.config

    if workers < 1:
        raise ValueError("need at least one worker")
    bounds = np.linspace(0, plan.trials, num=min(workers, plan.trials) + 1, dtype=int)
    chunks = [
        (enc, config, plan.channel_mode, fixed, int(a), int(b))
        for a, b in zip(bounds[:-1], bounds[1:])
        if b > a
    ]
    if len(chunks) == 1:
        parts = [_run_chunk(chunks[0])]
    else:
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(_run_chunk, chunks))

    samples = np.concatenate([p[0] for p in parts])
    min_gains = np.concatenate([p[1] for p in parts])
    p_used = np.concatenate([p[2] for p in parts])
    return TrialSet(
        plan=plan, samples=samples, channel_min_gains=min_gains, p_used=p_used
    )


def summarize(
    ts: TrialSet, theory: GammaParams, eta: float | None = None
) -> MseReport:
    """Empirical moments against the Gamma law, plus optional fit statistics.

    The one-sample KS statistic is only meaningful when the channel was
    held fixed (the Gamma law conditions on the realization), so it is
    omitted in the per-trial fading mode. When ``eta`` is given, the report
    carries the frequency of samples exceeding (1 + eta) times the theory
    mean.
    """
    samples = np.asarray(ts.samples, dtype=float)
    if samples.size == 0:
        raise EmptySample("summarize needs at least one sample")
    degenerate = samples.size == 1
    variance = 0.0 if degenerate else float(np.var(samples, ddof=1))

    ks_statistic = None
    if ts.plan.channel_mode is not ChannelMode.RICIAN_PER_TRIAL:
        ks_statistic = ks_distance(
            np.sort(samples), lambda x: analysis.gamma_cdf(theory, x)
        )
    exceedance = None
    if eta is not None:
        exceedance = float(np.mean(samples >= (1.0 + eta) * theory.mean))

    return MseReport(
        mean=float(np.mean(samples)),
        variance=variance,
        theory_mean=theory.mean,
        theory_variance=theory.variance,
        ks_statistic=ks_statistic,
        exceedance_freq=exceedance,
        degenerate=degenerate,
    )


def theory_for_trials(ts: TrialSet, enc: EncodingMatrix) -> GammaParams:
    """Mean-matched Gamma law for a trial set.

    Exact (shape l, scale p_w / (l_tilde * rho_x * min_gain)) when the
    encoding is orthonormal and the channel fixed; otherwise the mean still
    matches the spectrum formula averaged over the realized power scalings,
    and the Gamma shape is only a proxy.
    """
    spectrum = coding.gram_spectrum(enc)
    inverse_trace = float(np.sum(1.0 / spectrum) / enc.l)
    mean = inverse_trace * ts.plan.config.n0 * float(np.mean(1.0 / ts.p_used))
    return GammaParams(shape=float(enc.l), scale=mean / enc.l)


def _blank_row() -> dict:
    return {key: None for key in CSV_HEADER}


def _mean_gamma_opt(rate: float, config: SystemConfig, min_gains) -> float:
    # Law of total expectation: average the per-realization expected MSE.
    return float(rate * config.p_w / config.rho_x * np.mean(1.0 / min_gains))


def _integral_blocklength(l: float, rate: float) -> int:
    l_tilde = l / rate
    if abs(l_tilde - round(l_tilde)) > 1e-9:
        raise NonIntegralBlocklength(
            f"rate {rate} does not divide source length {l} into an integer "
            f"codeword length"
        )
    return int(round(l_tilde))


def sweep_mse_vs_snr(
    base: ExperimentPlan, snr_db_values, rates, workers: int = 1
) -> list[dict]:
    """Empirical vs theoretical mean MSE over an (SNR, rate) grid.

    Each rate runs the orthonormal construction at the implied codeword
    length; an uncoded row (identity matrix, rate 1) accompanies every SNR
    point as the baseline.
    """
    for rate in rates:
        if not 0 < rate <= 1:
            raise ValueError(f"rates must lie in (0, 1], got {rate}")
    rows = []
    for snr_db in snr_db_values:
        schemes = [("proposed", float(r)) for r in rates] + [("uncoded", 1.0)]
        for scheme, rate in schemes:
            l_tilde = _integral_blocklength(base.config.l, rate)
            config = replace(
                base.config,
                l_tilde=l_tilde,
                p_x=base.config.n0 * channel.db_to_linear(snr_db),
            )
            construction = (
                Construction.IDENTITY if scheme == "uncoded" else base.construction
            )
            plan = replace(
                base, config=config, construction=construction, sweep=None
            )
            ts = run_trials(plan, workers=workers)
            row = _blank_row()
            row.update(
                experiment="mse_vs_snr",
                snr_db=float(snr_db),
                rate=rate,
                l=config.l,
                l_tilde=l_tilde,
                scheme=scheme,
                trials=plan.trials,
                mean_mse=float(np.mean(ts.samples)),
                var_mse=float(np.var(ts.samples, ddof=1)),
                theory_mean=_mean_gamma_opt(rate, config, ts.channel_min_gains),
            )
            if plan.channel_mode is not ChannelMode.RICIAN_PER_TRIAL:
                theory = analysis.optimal_mse_gamma(
                    config.l,
                    l_tilde,
                    config.p_w,
                    config.rho_x,
                    float(ts.channel_min_gains[0]),
                )
                row["theory_var"] = theory.variance
            rows.append(row)
    return rows


def sweep_rate_regions(
    epsilon: float,
    delta: float,
    eta: float,
    snr_db_values,
    p_w: float = 1.0,
    min_gain: float = 1.0,
) -> list[dict]:
    """Rate-region boundaries per criterion over an SNR grid (min gain 1)."""
    rows = []
    for snr_db in snr_db_values:
        rho_x = channel.db_to_linear(snr_db)
        for criterion in Criterion:
            report = analysis.region_report(
                criterion,
                epsilon,
                rho_x,
                min_gain,
                p_w,
                delta=delta if criterion is Criterion.EPSILON_DELTA else None,
                eta=eta if criterion is Criterion.EPSILON_DELTA else None,
            )
            row = _blank_row()
            row.update(
                experiment="rate_regions",
                snr_db=float(snr_db),
                rate=report.r_max,
                scheme=report.criterion.value,
                l=report.l_min,
            )
            rows.append(row)
    return rows


def sweep_blocklength(
    base: ExperimentPlan, l_tilde_values, workers: int = 1
) -> list[dict]:
    """Mean/variance of the distortion as the codeword length grows.

    Holds the coding rate of the base plan fixed (the source length scales
    with the codeword length) and requires a fixed-channel mode, since the
    variance law conditions on the realization.
    """
    if base.channel_mode is ChannelMode.RICIAN_PER_TRIAL:
        raise ValueError("blocklength sweep needs a fixed-channel mode")
    rate = base.config.rate
    rows = []
    for l_tilde in l_tilde_values:
        l = rate * l_tilde
        if abs(l - round(l)) > 1e-9:
            raise NonIntegralBlocklength(
                f"codeword length {l_tilde} at rate {rate} implies "
                f"non-integer source length {l}"
            )
        config = replace(base.config, l=int(round(l)), l_tilde=int(l_tilde))
        plan = replace(base, config=config, sweep=None)
        ts = run_trials(plan, workers=workers)
        theory = analysis.optimal_mse_gamma(
            config.l,
            config.l_tilde,
            config.p_w,
            config.rho_x,
            float(ts.channel_min_gains[0]),
        )
        row = _blank_row()
        row.update(
            experiment="blocklength",
            snr_db=config.snr_db,
            rate=rate,
            l=config.l,
            l_tilde=config.l_tilde,
            scheme="proposed",
            trials=plan.trials,
            mean_mse=float(np.mean(ts.samples)),
            var_mse=float(np.var(ts.samples, ddof=1)),
            theory_mean=theory.mean,
            theory_var=theory.variance,
        )
        rows.append(row)
    return rows


def ks_two_sample(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov distance between empirical CDFs."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise EmptySample("two-sample KS needs nonempty samples")
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / a.size
    cdf_b = np.searchsorted(b, pooled, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def oracle_equivalence_test(
    enc: EncodingMatrix,
    config: SystemConfig,
    channel_realization: ChannelRealization,
    n: int,
    rng: Rng,
) -> float:
    """Full pipeline vs direct spectrum sampler, as a two-sample KS distance.

    Runs n transmissions at the maximal power scaling and draws n samples
    from the weighted-exponential law implied by the Gram spectrum; the two
    independent streams derive from the same master seed with different
    purpose tags.
    """
    if n < 1000:
        raise ValueError("need at least 1000 samples per side")
    p = channel.max_power_scaling(channel_realization, config)
    pipeline = np.empty(n)
    for i in range(n):
        trial_rng = rng.derive(stream_id(_STREAM_TRIAL, i))
        pipeline[i] = channel.run_round(
            enc, config, channel_realization, p, trial_rng
        ).distortion

    spectrum = coding.gram_spectrum(enc)
    rho = p / config.n0
    oracle_rng = rng.derive(stream_id(_STREAM_ORACLE))
    oracle = np.fromiter(
        (analysis.sample_general_mse(spectrum, rho, oracle_rng) for _ in range(n)),
        dtype=float,
        count=n,
    )
    return ks_two_sample(pipeline, oracle)


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def _format_field(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.12g}"


def write_rows(rows, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        unknown = set(row) - set(CSV_HEADER)
        if unknown:
            raise ValueError(f"row carries unknown fields {sorted(unknown)}")
        writer.writerow([_format_field(row.get(key)) for key in CSV_HEADER])


def write_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        write_rows(rows, fh)


def write_trials_csv(ts: TrialSet, path) -> None:
    """Per-trial samples: trial, distortion, min_gain, p_used."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["trial", "distortion", "min_gain", "p_used"])
        for i in range(ts.samples.size):
            writer.writerow(
                [
                    str(i),
                    _format_field(ts.samples[i]),
                    _format_field(ts.channel_min_gains[i]),
                    _format_field(ts.p_used[i]),
                ]
            )
