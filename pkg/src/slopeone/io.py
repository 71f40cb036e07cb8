"""Corpus ingestion and model persistence.

Model files are line-oriented UTF-8 text. Floats are written with ``repr``
so they reload bit-for-bit, identifiers as JSON scalars (``"196"`` or
``196``) so their type survives, and the last line carries a SHA-256 of
everything above it::

    #slopeone-model 1
    scale   1.0   5.0   1.0
    counts  items=2 plain=1 like=0 dislike=0 ratings=3
    [items]
    0       "I"
    ...
    [plain]          lo  hi  diff_sum  count   (lo < hi, interned ids)
    [like]
    [dislike]
    [ratings]        user  item-id  value
    [end]   sha256=...
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .core import Dataset, Evaluation, RatingScale
from .deviations import BipolarDeviationStore, DeviationStore, ItemDictionary, PairTable

_log = logging.getLogger(__name__)

FORMAT_TAG = "#slopeone-model"
FORMAT_VERSION = 1
CORPUS_FORMATS = ("movielens-tab", "delimited")
_SECTIONS = ("items", "plain", "like", "dislike", "ratings")


class CorpusError(ValueError):
    pass


class ModelFileError(ValueError):
    pass


class VersionMismatchError(ModelFileError):
    pass


class TruncatedModelError(ModelFileError):
    pass


class ChecksumError(ModelFileError):
    pass


@dataclass
class CorpusStats:
    lines: int = 0
    accepted: int = 0
    rejected: int = 0
    duplicates: int = 0
    skipped: int = 0
    errors: list = field(default_factory=list)


def parse_corpus(path, fmt: str, scale: RatingScale, *, delimiter: str = ",",
                 header: bool = False, strict: bool = True) -> tuple[Dataset, CorpusStats]:
    """Read ``user, item, rating`` records into a :class:`Dataset`.

    ``movielens-tab`` lines are ``user<TAB>item<TAB>rating<TAB>timestamp``;
    ``delimited`` uses ``delimiter`` and an optional header row. Identifiers
    stay strings. A repeated (user, item) pair keeps the later rating. In
    strict mode a malformed line or out-of-scale rating raises
    :class:`CorpusError`; otherwise it is counted in ``stats.rejected``.
    """
    if fmt not in CORPUS_FORMATS:
        raise CorpusError(f"unknown corpus format {fmt!r}")
    sep = "\t" if fmt == "movielens-tab" else delimiter
    stats = CorpusStats()
    data: dict[str, dict[str, float]] = {}

    def reject(lineno, msg):
        if strict:
            raise CorpusError(f"{path}:{lineno}: {msg}")
        stats.rejected += 1
        stats.errors.append((lineno, msg))

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            stats.lines += 1
            line = line.rstrip("\r\n")
            if (header and lineno == 1) or not line.strip():
                stats.skipped += 1
                continue
            fields = line.split(sep)
            if fmt == "movielens-tab" and len(fields) != 4 or len(fields) < 3:
                reject(lineno, f"malformed line {line!r}")
                continue
            user, item = fields[0].strip(), fields[1].strip()
            try:
                rating = float(fields[2])
            except ValueError:
                reject(lineno, f"malformed rating {fields[2]!r}")
                continue
            if not user or not item:
                reject(lineno, f"malformed line {line!r}")
                continue
            if not math.isfinite(rating) or not scale.contains(rating):
                reject(lineno, f"rating {fields[2].strip()} outside "
                               f"[{scale.min:g}, {scale.max:g}]")
                continue
            ratings = data.setdefault(user, {})
            if item in ratings:
                stats.duplicates += 1
            ratings[item] = rating

    if stats.duplicates:
        _log.warning("%s: %d duplicate (user, item) ratings replaced by later lines",
                     path, stats.duplicates)
    dataset = Dataset.from_dict(scale, data)
    stats.accepted = dataset.n_ratings
    return dataset, stats


def load_corpus(path, fmt: str = "movielens-tab", scale: RatingScale | None = None,
                **kwargs) -> Dataset:
    if scale is None:
        raise CorpusError("a rating scale is required")
    return parse_corpus(path, fmt, scale, **kwargs)[0]


@dataclass
class Model:
    scale: RatingScale
    store: DeviationStore
    bipolar: BipolarDeviationStore
    dataset: Dataset | None = None

    @property
    def dictionary(self) -> ItemDictionary:
        return self.store.dictionary


def _encode_id(x) -> str:
    if isinstance(x, bool) or not isinstance(x, (str, int)):
        raise TypeError(f"identifier {x!r} must be a str or int to be saved")
    return json.dumps(x)


def _table_lines(table: PairTable):
    for lo, hi, diff, count in table:
        yield f"{lo}\t{hi}\t{diff!r}\t{count}"


def save_model(path, store: DeviationStore, bipolar: BipolarDeviationStore,
               scale: RatingScale, dataset: Dataset | None = None) -> None:
    """Write both stores, the item dictionary and (optionally) the ratings.

    Storing the ratings lets a loaded model accept further rating changes
    and serve the dataset-backed schemes.
    """
    if bipolar.dictionary is not store.dictionary and bipolar.dictionary != store.dictionary:
        raise ValueError("plain and bi-polar stores use different item dictionaries")
    dictionary = store.dictionary
    ratings = []
    if dataset is not None:
        for ev in dataset:
            u = _encode_id(ev.user)
            for item, value in ev.ratings.items():
                ratings.append(f"{u}\t{dictionary.intern(item)}\t{value!r}")
    lines = [
        f"{FORMAT_TAG} {FORMAT_VERSION}",
        f"scale\t{scale.min!r}\t{scale.max!r}\t{scale.step!r}",
        f"counts\titems={len(dictionary)}\tplain={len(store.pairs)}\tlike={len(bipolar.like)}"
        f"\tdislike={len(bipolar.dislike)}\tratings={len(ratings)}",
        "[items]",
        *(f"{k}\t{_encode_id(item)}" for k, item in enumerate(dictionary)),
        "[plain]", *_table_lines(store.pairs),
        "[like]", *_table_lines(bipolar.like),
        "[dislike]", *_table_lines(bipolar.dislike),
        "[ratings]", *ratings,
    ]
    body = "".join(line + "\n" for line in lines)
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    tmp = Path(f"{path}.tmp")
    tmp.write_text(body + f"[end]\tsha256={digest}\n", encoding="utf-8")
    os.replace(tmp, path)


def load_model(path) -> Model:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if not lines or not lines[0].startswith(FORMAT_TAG):
        raise ModelFileError(f"{path}: not a model file")
    try:
        version = int(lines[0].split()[1])
    except (IndexError, ValueError):
        raise ModelFileError(f"{path}: unreadable header {lines[0]!r}") from None
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"{path}: model format version {version}, expected {FORMAT_VERSION}")

    end = next((k for k in range(len(lines) - 1, -1, -1) if lines[k].startswith("[end]")), None)
    if end is None or lines[end + 1:] not in ([], [""]):
        raise TruncatedModelError(f"{path}: missing end marker, file is truncated")
    body = "".join(line + "\n" for line in lines[:end])
    expected = lines[end].partition("sha256=")[2].strip()
    if hashlib.sha256(body.encode("utf-8")).hexdigest() != expected:
        raise ChecksumError(f"{path}: checksum mismatch")

    try:
        return _parse_model(lines[1:end])
    except (IndexError, ValueError, KeyError) as exc:
        raise ModelFileError(f"{path}: malformed model file ({exc})") from exc


def _parse_model(lines: list[str]) -> Model:
    scale_fields = lines[0].split("\t")
    if scale_fields[0] != "scale":
        raise ValueError("missing scale line")
    scale = RatingScale(*(float(x) for x in scale_fields[1:4]))
    counts_fields = lines[1].split("\t")
    if counts_fields[0] != "counts":
        raise ValueError("missing counts line")
    counts = {k: int(v) for k, v in (f.split("=") for f in counts_fields[1:])}

    sections: dict[str, list[str]] = {}
    current = None
    for line in lines[2:]:
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            sections[current] = []
        elif current is None:
            raise ValueError(f"record outside any section: {line!r}")
        else:
            sections[current].append(line)
    for name in _SECTIONS:
        if name not in sections:
            raise ValueError(f"missing section [{name}]")
        if len(sections[name]) != counts[name]:
            raise ValueError(f"section [{name}] has {len(sections[name])} records, "
                             f"header says {counts[name]}")

    dictionary = ItemDictionary()
    for k, line in enumerate(sections["items"]):
        idx, raw = line.split("\t", 1)
        if int(idx) != k or dictionary.intern(json.loads(raw)) != k:
            raise ValueError(f"item dictionary out of order at {line!r}")

    def read_table(name):
        table = PairTable()
        for line in sections[name]:
            lo, hi, diff, count = line.split("\t")
            lo, hi = int(lo), int(hi)
            if hi >= len(dictionary):
                raise ValueError(f"pair ({lo}, {hi}) refers to an unknown item")
            table.set(lo, hi, float(diff), int(count))
        return table

    store = DeviationStore(dictionary)
    store.pairs = read_table("plain")
    bipolar = BipolarDeviationStore(dictionary)
    bipolar.like = read_table("like")
    bipolar.dislike = read_table("dislike")

    dataset = None
    if sections["ratings"]:
        data: dict = {}
        for line in sections["ratings"]:
            user, idx, value = line.split("\t")
            data.setdefault(json.loads(user), {})[dictionary.item(int(idx))] = float(value)
        dataset = Dataset(scale, (Evaluation(u, r) for u, r in data.items()))
        bipolar.restore_snapshots(dataset)
    return Model(scale, store, bipolar, dataset)
