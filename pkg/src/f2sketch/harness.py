"""Experiment runners: MSE, memory footprint and EDISJ distinguishing.

Every runner builds its workload first, runs the sketches without touching
exact moments, and scores against the oracle in a separate pass. Per-trial
hash seeds come from ``SeedSequence([master_seed, trial])`` so rows are
reproducible independently of execution order.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import codec, oracle, streamgen
from ._validation import bucket_count_for, check_epsilon
from .hashing import MERSENNE_61
from .sketch import MomentReport, PartitionSketch, TugOfWarSketch

CSV_SCHEMA = "# f2sketch-trials v1"
WORKLOADS = ("uniform", "zipf", "edisj", "multilevel", "constant", "file")


@dataclass
class ExperimentConfig:
    workload: str = "uniform"
    n: int = 100_000
    epsilon: float = 0.25
    trials: int = 400
    seed: int = 0
    out: str | None = None
    baseline: bool = False
    universe_size: int | None = None
    zipf_exponent: float = 1.0
    t: int = 8
    d: int = 1
    label: str = "yes"
    plant_level: int | None = None
    input_path: str | None = None
    # edisj only: error parameter of the sketch; None means epsilon / 8
    sketch_epsilon: float | None = None
    timing: bool = True

    def validate(self) -> "ExperimentConfig":
        if self.workload not in WORKLOADS:
            raise ValueError(f"workload must be one of {WORKLOADS}, got {self.workload!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        check_epsilon(self.epsilon)
        if self.sketch_epsilon is not None:
            check_epsilon(self.sketch_epsilon)
        if self.n < 0:
            raise ValueError("n must be >= 0")
        if self.workload == "file" and not self.input_path:
            raise ValueError("workload 'file' needs input_path")
        return self


@dataclass
class TrialRow:
    method: str
    trial: int
    seed: int
    label: str
    exact_f2: int
    estimate: int | Fraction
    relative_error: float
    squared_relative_error: float
    encoded_bits: int
    fixed_width_bits: int
    wall_time: float | None = None


@dataclass
class MseSummary:
    rows: list[TrialRow]
    exact_f2: int
    exact_f4: int
    bucket_count: int
    empirical_mse: float
    predicted_mse: float
    bound: float
    slack: float
    passed: bool
    baseline_mse: float | None = None

    @property
    def threshold(self) -> float:
        return self.bound * (1 + self.slack)


@dataclass
class MemorySummary:
    rows: list[TrialRow]
    bucket_count: int
    n: int
    mean_bits: float
    max_bits: int
    max_counter_bits: int
    budget: int
    counter_budget: int
    fixed_width_bits: int
    passed: bool


@dataclass
class EdisjSummary:
    rows: list[TrialRow]
    yes_f2: int
    max_no_f2: int
    threshold: float
    accuracy: float
    oracle_accuracy: float
    passed: bool
    params: dict = field(default_factory=dict)


def trial_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence([int(master), int(index)]).generate_state(1, np.uint64)[0])


def default_universe(n: int) -> int:
    return max(1, min(n**3, MERSENNE_61))


def build_stream(cfg: ExperimentConfig) -> np.ndarray:
    w = cfg.workload
    if w == "uniform":
        return streamgen.uniform_stream(cfg.n, cfg.universe_size or default_universe(cfg.n), cfg.seed)
    if w == "zipf":
        universe = cfg.universe_size or max(1, min(cfg.n, streamgen.MAX_ZIPF_UNIVERSE))
        return streamgen.zipf_stream(cfg.n, universe, cfg.zipf_exponent, cfg.seed)
    if w == "edisj":
        inst = streamgen.edisj_instance(
            cfg.n, cfg.t, cfg.epsilon, cfg.d, cfg.label, cfg.seed, cfg.universe_size
        )
        return streamgen.edisj_stream(inst)
    if w == "multilevel":
        stream, _ = streamgen.multilevel_stream(
            cfg.n, cfg.epsilon, cfg.seed, cfg.universe_size, cfg.plant_level, cfg.label
        )
        return stream
    if w == "constant":
        return np.full(cfg.n, cfg.seed % MERSENNE_61, dtype=np.uint64)
    return streamgen.read_stream(cfg.input_path)


def build_report(sketch: PartitionSketch, hist: oracle.Histogram) -> MomentReport:
    return MomentReport.from_values(
        oracle.exact_moment(hist, 2),
        oracle.exact_moment(hist, 4),
        sketch.estimate(),
        codec.encode(sketch).bit_length,
    )


def _score(rows: list[dict], f2: int) -> list[TrialRow]:
    out = []
    for r in rows:
        est = r["estimate"]
        rel = float(abs(Fraction(est) - f2) / f2) if f2 > 0 else 0.0
        out.append(TrialRow(exact_f2=f2, relative_error=rel, squared_relative_error=rel * rel, **r))
    return out


def _timed(fn, timing):
    t0 = time.perf_counter()
    value = fn()
    return value, (time.perf_counter() - t0 if timing else None)


def run_mse_experiment(cfg: ExperimentConfig) -> MseSummary:
    """Fixed stream, ``cfg.trials`` independent hash seeds, MSE against ``eps^2``.

    Passes iff the empirical mean squared relative error is below
    ``eps^2 * (1 + 3/sqrt(T))``.
    """
    cfg.validate()
    stream = build_stream(cfg)
    p = bucket_count_for(cfg.epsilon)
    raw = []
    baseline_raw = []
    for i in range(cfg.trials):
        s = trial_seed(cfg.seed, i)

        def run():
            sk = PartitionSketch(epsilon=cfg.epsilon, random_state=s).fit(stream)
            return sk, sk.estimate()

        (sk, est), wall = _timed(run, cfg.timing)
        raw.append(dict(
            method="partition", trial=i, seed=s, label=cfg.label if cfg.workload == "edisj" else "",
            estimate=est, encoded_bits=codec.encode(sk).bit_length, fixed_width_bits=64 * p,
            wall_time=wall,
        ))
        if cfg.baseline:
            def run_ams():
                return TugOfWarSketch(epsilon=cfg.epsilon, random_state=s).fit(stream).estimate()

            est_b, wall_b = _timed(run_ams, cfg.timing)
            r = p - 1
            baseline_raw.append(dict(
                method="ams", trial=i, seed=s, label=raw[-1]["label"], estimate=est_b,
                encoded_bits=64 * r, fixed_width_bits=64 * r, wall_time=wall_b,
            ))

    # scoring pass
    hist = oracle.histogram(stream)
    f2 = oracle.exact_moment(hist, 2)
    f4 = oracle.exact_moment(hist, 4)
    rows = _score(raw, f2)
    mse = float(np.mean([r.squared_relative_error for r in rows]))
    predicted = float(Fraction(2, p) * (1 - Fraction(f4, f2 * f2))) if f2 else 0.0
    bound = cfg.epsilon**2
    slack = 3 / math.sqrt(cfg.trials)
    baseline_mse = None
    if baseline_raw:
        brows = _score(baseline_raw, f2)
        baseline_mse = float(np.mean([r.squared_relative_error for r in brows]))
        rows = rows + brows
    return MseSummary(
        rows=rows, exact_f2=f2, exact_f4=f4, bucket_count=p, empirical_mse=mse,
        predicted_mse=predicted, bound=bound, slack=slack,
        passed=mse < bound * (1 + slack), baseline_mse=baseline_mse,
    )


def run_memory_experiment(cfg: ExperimentConfig) -> MemorySummary:
    """Encoded size against ``bit_budget(P, n)`` and the fixed-width ``64 P``."""
    cfg.validate()
    stream = build_stream(cfg)
    n = int(stream.size)
    p = bucket_count_for(cfg.epsilon)
    raw = []
    counter_bits = []
    for i in range(cfg.trials):
        s = trial_seed(cfg.seed, i)

        def run():
            sk = PartitionSketch(epsilon=cfg.epsilon, random_state=s).fit(stream)
            return sk, codec.encode(sk)

        (sk, enc), wall = _timed(run, cfg.timing)
        counter_bits.append(enc.counter_bits)
        raw.append(dict(
            method="partition", trial=i, seed=s, label="", estimate=sk.estimate(),
            encoded_bits=enc.bit_length, fixed_width_bits=64 * p, wall_time=wall,
        ))
    f2 = oracle.exact_moment(oracle.histogram(stream), 2)
    rows = _score(raw, f2)
    bits = [r.encoded_bits for r in rows]
    budget = codec.bit_budget(p, n)
    counter_budget = codec.counter_bit_budget(p, n)
    return MemorySummary(
        rows=rows, bucket_count=p, n=n, mean_bits=float(np.mean(bits)), max_bits=max(bits),
        max_counter_bits=max(counter_bits), budget=budget, counter_budget=counter_budget,
        fixed_width_bits=64 * p,
        passed=max(bits) <= budget and max(counter_bits) <= counter_budget,
    )


def run_edisj_experiment(cfg: ExperimentConfig) -> EdisjSummary:
    """Classify ``T`` YES and ``T`` NO instances by thresholding the sketch estimate.

    The threshold is the midpoint of the closed-form YES value and the
    largest closed-form NO value. NO instances alternate between the
    disjoint and wrong-exam shapes. Passes iff accuracy >= 2/3.
    """
    cfg.validate()
    sketch_eps = cfg.sketch_epsilon if cfg.sketch_epsilon is not None else cfg.epsilon / 8
    k = streamgen.referee_repetitions(cfg.t, cfg.epsilon)
    vals = streamgen.edisj_f2_values(cfg.n, cfg.t, cfg.d, k)
    threshold = (vals["yes"] + vals["max_no"]) / 2
    p = bucket_count_for(sketch_eps)
    jobs = []
    for i in range(cfg.trials):
        jobs.append((2 * i, streamgen.Label.YES))
        no = streamgen.Label.NO_DISJOINT if i % 2 == 0 else streamgen.Label.NO_WRONG_EXAM
        jobs.append((2 * i + 1, no))
    raw, streams = [], []
    for idx, label in jobs:
        s = trial_seed(cfg.seed, idx)
        inst = streamgen.edisj_instance(cfg.n, cfg.t, cfg.epsilon, cfg.d, label, s, cfg.universe_size)
        stream = streamgen.edisj_stream(inst)

        def run():
            sk = PartitionSketch(epsilon=sketch_eps, random_state=s).fit(stream)
            return sk, sk.estimate()

        (sk, est), wall = _timed(run, cfg.timing)
        raw.append(dict(
            method="partition", trial=idx, seed=s, label=label.value, estimate=est,
            encoded_bits=codec.encode(sk).bit_length, fixed_width_bits=64 * p, wall_time=wall,
        ))
        streams.append(stream)
    rows = []
    correct = oracle_correct = 0
    for r, stream in zip(raw, streams):
        f2 = oracle.exact_moment(oracle.histogram(stream), 2)
        rows.extend(_score([r], f2))
        is_yes = r["label"] == streamgen.Label.YES.value
        correct += (r["estimate"] > threshold) == is_yes
        oracle_correct += (f2 > threshold) == is_yes
    accuracy = correct / len(raw)
    return EdisjSummary(
        rows=rows, yes_f2=vals["yes"], max_no_f2=vals["max_no"], threshold=threshold,
        accuracy=accuracy, oracle_accuracy=oracle_correct / len(raw),
        passed=accuracy >= 2 / 3,
        params=dict(n=cfg.n, t=cfg.t, d=cfg.d, k=k, epsilon=cfg.epsilon,
                    sketch_epsilon=sketch_eps, bucket_count=p),
    )


# ----------------------------------------------------------------------- CSV

CSV_COLUMNS = [f.name for f in fields(TrialRow)]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, Fraction):
        return str(value.numerator) if value.denominator == 1 else str(value)
    return str(value)


def emit_csv(rows, path, timing: bool = True) -> Path:
    """Write the schema comment, a header and one line per row.

    With ``timing=False`` the ``wall_time`` column is left empty so that runs
    with the same config are byte-identical.
    """
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(CSV_SCHEMA + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            d = asdict(row)
            if not timing:
                d["wall_time"] = None
            writer.writerow([_fmt(d[c]) for c in CSV_COLUMNS])
    return path


def _parse_estimate(text: str):
    v = Fraction(text)
    return v.numerator if v.denominator == 1 else v


_PARSERS = {
    "method": str, "trial": int, "seed": int, "label": str, "exact_f2": int,
    "estimate": _parse_estimate, "relative_error": float, "squared_relative_error": float,
    "encoded_bits": int, "fixed_width_bits": int,
    "wall_time": lambda s: float(s) if s else None,
}


def read_csv(path) -> list[TrialRow]:
    with open(path, newline="") as fh:
        first = fh.readline().rstrip("\n")
        if first != CSV_SCHEMA:
            raise ValueError(f"unexpected schema line {first!r}")
        reader = csv.DictReader(fh)
        return [TrialRow(**{k: _PARSERS[k](v) for k, v in rec.items()}) for rec in reader]
