"""Stream generators: uniform and Zipf workloads, EDISJ gap streams, multi-level packing.

An EDISJ ("exam disjointness") instance has ``t`` players holding sets of
``d``-tuples and a referee holding one exam tuple ``x``. Its stream lists each
player's set in turn (tuples flattened to their ``d`` universe ids) and then
``k = ceil(t/eps)`` copies of ``x``. The stream's F2 separates YES instances
(``x`` is the unique common tuple) from both kinds of NO instance by exactly
``d * 2k(t-1)``.

Tuples are blocks of ``d`` consecutive universe ids, so two different tuples
never share an element.
"""

from __future__ import annotations

import enum
import json
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from ._validation import as_fraction, check_epsilon
from .hashing import MERSENNE_61

MAX_ZIPF_UNIVERSE = 10**7
LAYOUT_SCHEMA = "f2sketch-layout/1"


class Label(str, enum.Enum):
    YES = "yes"
    NO_DISJOINT = "no_disjoint"
    NO_WRONG_EXAM = "no_wrong_exam"


class InvalidInstanceError(ValueError):
    pass


def _rng(seed, *extra) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *extra]))


def uniform_stream(n: int, universe_size: int, seed: int) -> np.ndarray:
    """``n`` i.i.d. uniform draws from ``[0, universe_size)`` as uint64."""
    if universe_size < 1:
        raise ValueError("universe_size must be >= 1")
    if n < 0:
        raise ValueError("n must be >= 0")
    return _rng(seed).integers(0, universe_size, size=n, dtype=np.uint64)


def zipf_stream(n: int, universe_size: int, exponent: float, seed: int) -> np.ndarray:
    """``n`` i.i.d. draws where id ``i`` has weight ``(i + 1) ** -exponent``."""
    if exponent < 0:
        raise ValueError("exponent must be >= 0")
    if exponent == 0:
        return uniform_stream(n, universe_size, seed)
    if not 1 <= universe_size <= MAX_ZIPF_UNIVERSE:
        raise ValueError(f"zipf universe_size must lie in [1, {MAX_ZIPF_UNIVERSE}]")
    # log-space weights avoid underflow for large exponents
    logw = -exponent * np.log(np.arange(1, universe_size + 1, dtype=np.float64))
    w = np.exp(logw - logw.max())
    w /= w.sum()
    return _rng(seed).choice(universe_size, size=n, p=w).astype(np.uint64)


# --------------------------------------------------------------------- EDISJ


@dataclass(frozen=True, eq=False)
class EdisjInstance:
    """Players' tuple sets plus the referee's exam tuple.

    ``sets[i]`` is a ``(set_size, d)`` uint64 array with rows sorted;
    ``exam_set`` is the index of the one player whose set contains the exam
    tuple (NO labels only; for YES every set contains it), or ``None``.
    """

    n: int
    t: int
    epsilon: float
    d: int
    k: int
    label: Label
    sets: tuple
    exam_element: np.ndarray
    exam_set: int | None
    universe_size: int

    @property
    def set_size(self) -> int:
        return self.n // (self.d * self.t)

    @property
    def stream_length(self) -> int:
        return self.n + self.k * self.d


def referee_repetitions(t: int, epsilon: float) -> int:
    """``k = ceil(t / eps)``."""
    return math.ceil(Fraction(t) / as_fraction(epsilon))


def default_tuple_width(n: int, t: int, epsilon: float) -> int:
    """Single-instance super-element width ``floor(eps^2 n / t^2)``."""
    eps = as_fraction(epsilon)
    return math.floor(eps * eps * n / (t * t))


def packed_tuple_width(n: int, t: int, epsilon: float) -> Fraction:
    """Multi-level packing width ``eps^2 n / (4 t^2)`` (may be fractional)."""
    eps = as_fraction(epsilon)
    return eps * eps * n / (4 * t * t)


def _fresh_blocks(rng: np.random.Generator, count: int, n_blocks: int) -> np.ndarray:
    # distinct block indices drawn without replacement; block b owns ids [b*d, (b+1)*d)
    if count > n_blocks:
        raise ValueError(f"universe holds {n_blocks} tuples, need {count}")
    return rng.choice(n_blocks, size=count, replace=False).astype(np.uint64)


def edisj_instance(
    n: int,
    t: int,
    epsilon: float,
    d: int = 1,
    label: Label | str = Label.YES,
    seed: int = 0,
    universe_size: int | None = None,
    exam_in_set: bool | None = None,
) -> EdisjInstance:
    """Draw a valid EDISJ instance whose sets have ``n / (d t)`` tuples each.

    ``exam_in_set`` controls, for NO labels, whether the exam tuple also sits
    in one player's set (``None`` flips a seeded coin). It is ignored for YES.
    """
    label = Label(label)
    epsilon = check_epsilon(epsilon)
    eps = as_fraction(epsilon)
    if t < 2:
        raise ValueError("need t >= 2 players")
    if t * t > eps * eps * n:
        raise ValueError(f"need t <= eps*sqrt(n); t={t}, eps={epsilon}, n={n}")
    if d < 1:
        raise ValueError("tuple width d must be >= 1")
    if n % (d * t):
        raise ValueError(f"d*t = {d * t} must divide n = {n}")
    if universe_size is None:
        universe_size = n**3 + 1
    if universe_size <= n**3:
        raise ValueError(f"universe_size must exceed n^3 = {n**3}")
    if universe_size > MERSENNE_61:
        raise ValueError("universe_size must not exceed 2^61 - 1")

    rng = _rng(seed, 0xED15)
    m = n // (d * t)
    k = referee_repetitions(t, epsilon)
    if exam_in_set is None:
        exam_in_set = bool(rng.integers(0, 2))
    if label is Label.NO_WRONG_EXAM and exam_in_set and m < 2:
        raise ValueError("NO_WRONG_EXAM with the exam tuple in a set needs set_size >= 2")

    offsets = np.arange(d, dtype=np.uint64)

    def tuples(blocks):
        return blocks[:, None] * np.uint64(d) + offsets[None, :]

    n_blocks = universe_size // d
    shared = label in (Label.YES, Label.NO_WRONG_EXAM)
    per_set = m - 1 if shared else m
    blocks = _fresh_blocks(rng, t * per_set + 2, n_blocks)
    common = tuples(blocks[-2:-1])
    spare = tuples(blocks[-1:])[0]
    own = tuples(blocks[: t * per_set]).reshape(t, per_set, d)

    sets = []
    for i in range(t):
        rows = np.concatenate([own[i], common]) if shared else own[i]
        sets.append(rows)

    exam_set = None
    if label is Label.YES:
        x = common[0]
    elif exam_in_set:
        exam_set = int(rng.integers(0, t))
        # own tuples only, never the common one
        x = own[exam_set][int(rng.integers(0, per_set))]
    else:
        x = spare

    sets = tuple(s[np.argsort(s[:, 0], kind="stable")] for s in sets)
    return EdisjInstance(
        n=n, t=t, epsilon=epsilon, d=d, k=k, label=label, sets=sets,
        exam_element=x.copy(), exam_set=exam_set, universe_size=universe_size,
    )


def edisj_stream(inst: EdisjInstance) -> np.ndarray:
    """Players' sets in order, then ``k`` copies of the exam tuple."""
    body = [s.reshape(-1) for s in inst.sets]
    suffix = np.tile(inst.exam_element, inst.k)
    return np.concatenate(body + [suffix]).astype(np.uint64)


def edisj_f2_values(n: int, t: int, d: int, k: int) -> dict[str, int]:
    """Closed-form F2 of every instance shape with these parameters.

    Keys: ``yes``; ``no_disjoint_absent`` / ``no_disjoint_in_set``;
    ``no_wrong_exam_absent`` / ``no_wrong_exam_in_set``; ``max_no``.
    """
    base = n // d
    vals = {
        "yes": d * (base - t + (t + k) ** 2),
        "no_disjoint_absent": d * (base + k * k),
        "no_disjoint_in_set": d * (base - 1 + (k + 1) ** 2),
        "no_wrong_exam_absent": d * (base - t + t * t + k * k),
        "no_wrong_exam_in_set": d * (base - t - 1 + t * t + (k + 1) ** 2),
    }
    vals["max_no"] = max(v for key, v in vals.items() if key.startswith("no_"))
    return vals


def closed_form_f2(inst: EdisjInstance) -> int:
    vals = edisj_f2_values(inst.n, inst.t, inst.d, inst.k)
    if inst.label is Label.YES:
        return vals["yes"]
    where = "in_set" if inst.exam_set is not None else "absent"
    return vals[f"{inst.label.value}_{where}"]


def edisj_gap(n: int, t: int, d: int, k: int) -> int:
    """YES F2 minus the largest NO F2."""
    vals = edisj_f2_values(n, t, d, k)
    return vals["yes"] - vals["max_no"]


def validate_instance(inst: EdisjInstance) -> None:
    """Check the instance promise straight from the raw sets.

    Raises :class:`InvalidInstanceError` describing the first violation.
    """
    t, d, m = inst.t, inst.d, inst.set_size
    if len(inst.sets) != t:
        raise InvalidInstanceError(f"expected {t} sets, got {len(inst.sets)}")
    for i, s in enumerate(inst.sets):
        if s.shape != (m, d):
            raise InvalidInstanceError(f"set {i} has shape {s.shape}, expected {(m, d)}")
    x = np.asarray(inst.exam_element, dtype=np.uint64).reshape(1, d)
    rows = np.ascontiguousarray(np.concatenate([*inst.sets, x]), dtype=np.uint64)
    # one opaque token per row so tuples compare as wholes
    tokens = rows.view(np.dtype((np.void, 8 * d))).reshape(-1)
    distinct, ids = np.unique(tokens, return_inverse=True)
    ids = ids.reshape(-1)
    x_id = ids[-1]
    set_ids = ids[:-1].reshape(t, m)
    for i in range(t):
        if np.unique(set_ids[i]).size != m:
            raise InvalidInstanceError(f"set {i} repeats a tuple")
    owners = np.bincount(set_ids.reshape(-1), minlength=distinct.size)
    elements = distinct.view(np.uint64).reshape(-1)
    if np.unique(elements).size != elements.size:
        raise InvalidInstanceError("two distinct tuples share a universe element")
    if np.any((owners > 1) & (owners < t)):
        raise InvalidInstanceError("a tuple is shared by some but not all players")
    common = np.flatnonzero(owners == t)
    x_owners = int(owners[x_id])
    if inst.label is Label.YES:
        if common.size != 1 or common[0] != x_id:
            raise InvalidInstanceError("YES instance must have x as the unique common tuple")
    elif inst.label is Label.NO_DISJOINT:
        if common.size:
            raise InvalidInstanceError("NO_DISJOINT sets intersect")
        if x_owners > 1:
            raise InvalidInstanceError("exam tuple appears in more than one set")
    else:
        if common.size != 1:
            raise InvalidInstanceError("NO_WRONG_EXAM needs exactly one common tuple")
        if common[0] == x_id:
            raise InvalidInstanceError("NO_WRONG_EXAM common tuple equals the exam tuple")
        if x_owners > 1:
            raise InvalidInstanceError("exam tuple appears in more than one set")


# --------------------------------------------------------------- multi-level


@dataclass(frozen=True)
class LevelLayout:
    """Bucket geometry of one level (``t = 2**level`` active buckets)."""

    level: int
    t: int
    bucket_count: int
    bucket_length: int
    active_indices: tuple[int, ...]
    super_element_width: int
    super_elements_per_bucket: int

    def bucket_range(self, index: int) -> tuple[int, int]:
        """Half-open stream range of the 1-based bucket ``index``."""
        start = (index - 1) * self.bucket_length
        return start, start + self.bucket_length

    @property
    def active_ranges(self) -> list[tuple[int, int]]:
        return [self.bucket_range(i) for i in self.active_indices]

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "t": self.t,
            "bucket_count": self.bucket_count,
            "bucket_length": self.bucket_length,
            "active_indices": list(self.active_indices),
            "active_ranges": [list(r) for r in self.active_ranges],
            "super_element_width": self.super_element_width,
            "super_elements_per_bucket": self.super_elements_per_bucket,
        }


@dataclass(frozen=True, eq=False)
class MultiLevelLayout:
    n: int
    epsilon: float
    levels: tuple[LevelLayout, ...]
    planted_level: int | None = None
    suffix_range: tuple[int, int] | None = None
    instance: EdisjInstance | None = field(default=None, repr=False)

    def level(self, ell: int) -> LevelLayout:
        return self.levels[ell - 1]

    def to_dict(self) -> dict:
        out = {
            "schema": LAYOUT_SCHEMA,
            "n": self.n,
            "epsilon": self.epsilon,
            "levels": [lv.to_dict() for lv in self.levels],
            "planted_level": self.planted_level,
            "suffix_range": list(self.suffix_range) if self.suffix_range else None,
            "planted": None,
        }
        if self.instance is not None:
            inst = self.instance
            out["planted"] = {
                "label": inst.label.value,
                "t": inst.t,
                "d": inst.d,
                "k": inst.k,
                "exam_element": [int(v) for v in inst.exam_element],
                "exam_set": inst.exam_set,
                "closed_form_f2_active": closed_form_f2(inst),
            }
        return out


def _is_power_of_four(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0 and (n.bit_length() - 1) % 2 == 0


def _nearest_valid(n: int, epsilon: float) -> tuple[int, float]:
    n4 = 4 ** max(1, round(math.log(max(n, 1), 4)))
    inv = 2 ** max(0, round(math.log2(1 / epsilon)))
    while Fraction(n4, inv * inv) <= 16:
        n4 *= 4
    return n4, 1 / inv


def multilevel_layout(n: int, epsilon: float) -> MultiLevelLayout:
    """Geometry for levels ``1 .. log2(eps sqrt n) - 2``."""
    epsilon = check_epsilon(epsilon)
    inv = 1 / as_fraction(epsilon)
    ok = (
        _is_power_of_four(n)
        and inv.denominator == 1
        and inv.numerator & (inv.numerator - 1) == 0
        and as_fraction(epsilon) ** 2 * n > 16
    )
    if not ok:
        nn, ne = _nearest_valid(n, epsilon)
        raise ValueError(
            f"need n a power of four, 1/eps a power of two and eps > 4/sqrt(n); "
            f"got n={n}, eps={epsilon}; nearest valid is n={nn}, eps={ne}"
        )
    eps_sqrt_n = math.isqrt(n) // inv.numerator
    top = eps_sqrt_n.bit_length() - 1 - 2
    levels = []
    for ell in range(1, top + 1):
        t = 2**ell
        buckets = 2 ** (ell + 2)
        length = n // buckets
        width = packed_tuple_width(n, t, epsilon)
        assert width.denominator == 1
        width = int(width)
        levels.append(
            LevelLayout(
                level=ell,
                t=t,
                bucket_count=buckets,
                bucket_length=length,
                active_indices=tuple(range(4, buckets + 1, 4)),
                super_element_width=width,
                super_elements_per_bucket=length // width,
            )
        )
    return MultiLevelLayout(n=n, epsilon=epsilon, levels=tuple(levels))


def multilevel_stream(
    n: int,
    epsilon: float,
    seed: int,
    universe_size: int | None = None,
    plant_level: int | None = None,
    label: Label | str = Label.YES,
    exam_in_set: bool | None = None,
) -> tuple[np.ndarray, MultiLevelLayout]:
    """A uniform stream with the multi-level layout, optionally carrying a planted instance.

    Planting at level ``l`` overwrites the ``t = 2**l`` active buckets of that
    level with the players' sets and appends the referee suffix of ``k*d``
    ids, with ``k = t/eps``.
    """
    layout = multilevel_layout(n, epsilon)
    if universe_size is None:
        universe_size = n**3 + 1
    stream = uniform_stream(n, universe_size, seed)
    if plant_level is None:
        return stream, layout
    if not 1 <= plant_level <= len(layout.levels):
        raise ValueError(f"plant_level must lie in [1, {len(layout.levels)}]")
    lv = layout.level(plant_level)
    inst = edisj_instance(
        n // 4, lv.t, epsilon, d=lv.super_element_width, label=label,
        seed=int(_rng(seed, 0x91A7).integers(0, 2**63)),
        universe_size=universe_size, exam_in_set=exam_in_set,
    )
    stream = stream.copy()
    for rows, (start, stop) in zip(inst.sets, lv.active_ranges):
        stream[start:stop] = rows.reshape(-1)
    suffix = np.tile(inst.exam_element, inst.k)
    full = np.concatenate([stream, suffix]).astype(np.uint64)
    planted = MultiLevelLayout(
        n=n, epsilon=layout.epsilon, levels=layout.levels, planted_level=plant_level,
        suffix_range=(n, n + suffix.size), instance=inst,
    )
    return full, planted


# --------------------------------------------------------------------- files


def write_stream(path, stream, fmt: str | None = None) -> None:
    """Binary: u64 little-endian length then u64 LE ids. Text: one id per line."""
    path = Path(path)
    fmt = fmt or ("text" if path.suffix == ".txt" else "binary")
    arr = np.asarray(stream, dtype=np.uint64)
    if fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(struct.pack("<Q", arr.size))
            fh.write(arr.astype("<u8").tobytes())
    elif fmt == "text":
        with open(path, "w") as fh:
            for v in arr.tolist():
                fh.write(f"{v}\n")
    else:
        raise ValueError(f"unknown stream format {fmt!r}")


def read_stream(path, fmt: str | None = None) -> np.ndarray:
    path = Path(path)
    fmt = fmt or ("text" if path.suffix == ".txt" else "binary")
    if fmt == "text":
        with open(path) as fh:
            vals = [int(line) for line in fh if line.strip()]
        return np.asarray(vals, dtype=np.uint64)
    if fmt != "binary":
        raise ValueError(f"unknown stream format {fmt!r}")
    data = path.read_bytes()
    if len(data) < 8:
        raise ValueError("stream file shorter than its length prefix")
    (count,) = struct.unpack_from("<Q", data)
    if len(data) != 8 + 8 * count:
        raise ValueError(f"stream file declares {count} ids but holds {(len(data) - 8) / 8}")
    return np.frombuffer(data, dtype="<u8", offset=8).astype(np.uint64)


def write_layout(path, layout: MultiLevelLayout) -> None:
    Path(path).write_text(json.dumps(layout.to_dict(), indent=2) + "\n")


def read_layout(path) -> dict:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema") != LAYOUT_SCHEMA:
        raise ValueError(f"unexpected layout schema {doc.get('schema')!r}")
    return doc
