"""Command-line interface: train, predict, update, evaluate, inspect.

Exit codes: 0 success, 1 usage error, 2 data error (bad input files,
unknown users or items, insufficient data), 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .core import RatingScale
from .deviations import apply_rating_change, build
from .evaluation import SplitSpec, compare_schemes, split
from .io import CORPUS_FORMATS, load_model, parse_corpus, save_model
from .predictors import DEFAULT_RHO, ModelBundle, SchemeId, fit_item_item, predict

EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _scale(text: str) -> RatingScale:
    try:
        return RatingScale.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _scheme(text: str) -> SchemeId:
    try:
        return SchemeId.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _schemes(text: str) -> list[SchemeId]:
    return [_scheme(s.strip()) for s in text.split(",") if s.strip()]


def _resolve(token: str, known) -> object:
    """Map a command-line identifier onto a stored one (str or int ids)."""
    if token in known:
        return token
    if token.lstrip("-").isdigit() and int(token) in known:
        return int(token)
    return token


def _corpus_args(p):
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--format", default="movielens-tab", choices=CORPUS_FORMATS)
    p.add_argument("--scale", required=True, type=_scale, help="MIN:MAX:STEP, e.g. 1:5:1")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--header", action="store_true", help="delimited input has a header row")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="slopeone", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="build deviation stores from a corpus and save a model")
    _corpus_args(p)
    p.add_argument("--output", required=True, type=Path)

    p = sub.add_parser("predict", help="predict ratings for a query evaluation")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--scheme", default=SchemeId.WEIGHTED_SLOPE_ONE, type=_scheme)
    p.add_argument("--ratings", required=True, help='query ratings, "item=value,..."')
    which = p.add_mutually_exclusive_group()
    which.add_argument("--top", type=int, help="print the N highest predictions")
    which.add_argument("--items", help="comma-separated items to predict")
    p.add_argument("--rho", type=float, default=DEFAULT_RHO, help="case amplification power")

    p = sub.add_parser("update", help="apply one rating change to a saved model")
    p.add_argument("--model", required=True, type=Path)
    change = p.add_mutually_exclusive_group(required=True)
    change.add_argument("--add", metavar="USER,ITEM,VALUE")
    change.add_argument("--remove", metavar="USER,ITEM")
    change.add_argument("--set", metavar="USER,ITEM,VALUE")

    p = sub.add_parser("evaluate", help="all-but-one MAE comparison of schemes")
    _corpus_args(p)
    p.add_argument("--train-ratings", required=True, type=int)
    p.add_argument("--test-ratings", type=int, default=None,
                   help="test rating target (default: every remaining user)")
    p.add_argument("--schemes", type=_schemes, default=list(SchemeId))
    p.add_argument("--divisor", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--order", choices=("shuffle", "dataset"), default="shuffle")
    p.add_argument("--out", type=Path, help="also write the report as CSV")

    p = sub.add_parser("inspect", help="show plain, like and dislike deviations of a pair")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--pair", required=True, metavar="I,J")
    return parser


def _load_corpus(args):
    dataset, stats = parse_corpus(args.input, args.format, args.scale,
                                  delimiter=args.delimiter, header=args.header)
    if stats.duplicates:
        print(f"warning: {stats.duplicates} duplicate ratings replaced", file=sys.stderr)
    return dataset


def cmd_train(args, out):
    dataset = _load_corpus(args)
    store, bipolar = build(dataset)
    save_model(args.output, store, bipolar, dataset.scale, dataset)
    print(f"users={len(dataset)} items={len(store.dictionary)} ratings={dataset.n_ratings} "
          f"pairs={len(store.pairs)} like_pairs={len(bipolar.like)} "
          f"dislike_pairs={len(bipolar.dislike)}", file=out)


def _parse_ratings(text: str, known) -> dict:
    ratings = {}
    for part in text.split(","):
        if not part.strip():
            continue
        item, sep, value = part.partition("=")
        if not sep:
            raise UsageError(f"--ratings entry {part!r} is not item=value")
        try:
            ratings[_resolve(item.strip(), known)] = float(value)
        except ValueError:
            raise UsageError(f"--ratings value {value!r} is not a number") from None
    if not ratings:
        raise UsageError("--ratings needs at least one item=value")
    return ratings


def cmd_predict(args, out):
    model = load_model(args.model)
    known = model.dictionary
    ratings = _parse_ratings(args.ratings, known)
    for item, value in ratings.items():
        if not model.scale.contains(value):
            raise DataError(f"rating {value:g} for {item!r} outside "
                            f"[{model.scale.min:g}, {model.scale.max:g}]")
    if args.items:
        items = [_resolve(t.strip(), known) for t in args.items.split(",") if t.strip()]
    else:
        items = [i for i in known if i not in ratings]
    bundle = ModelBundle(model.scale, dataset=model.dataset, store=model.store,
                         bipolar=model.bipolar, rho=args.rho)
    if args.scheme is SchemeId.ADJUSTED_COSINE and model.dataset is not None:
        bundle.item_item = fit_item_item(model.dataset)
    prediction = predict(args.scheme, ratings, bundle, items)
    rows = prediction.top(args.top) if args.top is not None else list(prediction.entries.items())
    for item, entry in rows:
        print(f"{item}\t{entry.value:.6g}\t{entry.scheme}\tfallback={entry.fallback}", file=out)


def _change(spec: str, with_value: bool):
    parts = [p.strip() for p in spec.split(",")]
    if len(parts) != (3 if with_value else 2) or not all(parts):
        shape = "USER,ITEM,VALUE" if with_value else "USER,ITEM"
        raise UsageError(f"expected {shape}, got {spec!r}")
    if with_value:
        try:
            return parts[0], parts[1], float(parts[2])
        except ValueError:
            raise UsageError(f"rating {parts[2]!r} is not a number") from None
    return parts[0], parts[1], None


def cmd_update(args, out):
    model = load_model(args.model)
    if model.dataset is None:
        from .core import Dataset
        model.dataset = Dataset(model.scale)
    action, spec = (("add", args.add) if args.add else
                    ("remove", args.remove) if args.remove else ("update", args.set))
    user, item, value = _change(spec, action != "remove")
    user = _resolve(user, set(model.dataset.users))
    item = _resolve(item, model.dictionary)
    try:
        affected = apply_rating_change(model.store, model.bipolar, model.dataset,
                                       user, item, action, value)
    except KeyError as exc:
        raise DataError(exc.args[0]) from None
    save_model(args.model, model.store, model.bipolar, model.scale, model.dataset)
    print(f"{action} {user},{item}: affected_pairs={affected}", file=out)


def cmd_evaluate(args, out):
    dataset = _load_corpus(args)
    train, test = split(dataset, SplitSpec(args.train_ratings, args.test_ratings,
                                           args.order, args.seed))
    if not test:
        raise DataError("no evaluations left for the test set")
    if args.divisor <= 0:
        raise UsageError("--divisor must be positive")
    report = compare_schemes(args.schemes, train, test, divisor=args.divisor, seed=args.seed)
    print(report.render(), file=out)
    if args.out:
        args.out.write_text(report.to_csv(), encoding="utf-8")


def cmd_inspect(args, out):
    model = load_model(args.model)
    parts = [p.strip() for p in args.pair.split(",")]
    if len(parts) != 2:
        raise UsageError(f"--pair expects I,J, got {args.pair!r}")
    i, j = (_resolve(p, model.dictionary) for p in parts)
    dev, count = model.store.deviation(i, j)
    print(f"plain\tdev={dev!r}\tcount={count}", file=out)
    for polarity in ("like", "dislike"):
        dev, count = model.bipolar.deviation(i, j, polarity)
        print(f"{polarity}\tdev={dev!r}\tcount={count}", file=out)


COMMANDS = {"train": cmd_train, "predict": cmd_predict, "update": cmd_update,
            "evaluate": cmd_evaluate, "inspect": cmd_inspect}


def run(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = make_parser().parse_args(argv)
        COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"usage error: {exc}", file=err)
        return EXIT_USAGE
    except (DataError, OSError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=err)
        return EXIT_DATA
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except Exception as exc:
        print(f"internal error: {type(exc).__name__}: {exc}", file=err)
        return EXIT_INTERNAL
    return 0


def main():
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    sys.exit(run())


if __name__ == "__main__":
    main()
