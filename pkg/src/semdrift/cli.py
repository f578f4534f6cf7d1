"""Command-line entry point: ``semdrift <command> ...``.

Stages communicate through files (score -> cluster / cohorts ->
concreteness) and every command leaves a ``manifest.json`` recording its
configuration and the content hashes of its inputs and outputs.
"""

import argparse
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from . import __version__
from .cohorts import (
    DEFAULT_CUTS,
    cohort_curves,
    cohort_labels,
    percentile_cohorts,
    read_volatility_csv,
    volatility_table,
    write_curves_csv,
    write_volatility_csv,
)
from .concreteness import ConcretenessError, concreteness_report, read_lexicon, read_sense_map
from .io import dump_json, sha256_file, sha256_json, token_slug, write_csv
from .scoring import (
    ScoringConfig,
    auto_targets,
    read_series_csv,
    score_tokens,
    top_k_neighbors,
    write_series_csv,
)
from .series import write_profiles_csv
from .shapes import (
    ShapeClusterer,
    write_assignments_csv,
    write_distance_matrix_csv,
    write_linkage_csv,
    write_shapes_csv,
)
from .snapshots import SnapshotFormatError, TokenFilter, load_dataset
from .synthetic import evaluate_recovery, generate, load_labels, save_synthetic, specs_from_json

log = logging.getLogger("semdrift")


class CLIError(Exception):
    """Fatal error; reported on stderr with exit status 1."""


@dataclass
class RunConfig:
    command: str
    dataset: Optional[str] = None
    targets: Optional[str] = None
    k: int = 25
    pool: int = 500
    min_components: int = 2
    exclude_hashtags: bool = True
    exclude_targets: bool = True
    window: int = 5
    degree: int = 3
    smoothing_mode: str = "interp"
    clusters: Optional[int] = None
    neighbors: int = 10
    linkage: str = "average"
    cuts: list = field(default_factory=lambda: list(DEFAULT_CUTS))
    fraction: float = 0.10
    mu: Optional[float] = None
    seed: Optional[int] = None
    out: Optional[str] = None

    def settings(self):
        """Configuration minus locations; locations are covered by input hashes."""
        d = asdict(self)
        for key in ("dataset", "out"):
            d.pop(key)
        if self.targets not in (None, "auto"):
            d["targets"] = "file"
        return d

    def scoring(self):
        return ScoringConfig(self.k, self.pool, self.min_components,
                             TokenFilter(self.exclude_hashtags, self.exclude_targets))


def _hash_inputs(paths):
    out = {}
    for role, p in paths.items():
        p = Path(p)
        if p.is_dir():
            out[role] = {q.name: sha256_file(q) for q in sorted(p.iterdir()) if q.is_file()}
        else:
            out[role] = {p.name: sha256_file(p)}
    return out


def _write_manifest(out_dir, config, inputs, outputs):
    settings = config.settings()
    manifest = {
        "tool": "semdrift",
        "version": __version__,
        "command": config.command,
        "config": settings,
        "config_hash": sha256_json(settings),
        "inputs": _hash_inputs(inputs),
        "outputs": {Path(p).relative_to(out_dir).as_posix(): sha256_file(p) for p in sorted(outputs)},
    }
    return dump_json(Path(out_dir) / "manifest.json", manifest)


def _out_dir(path):
    if path is None:
        raise CLIError("--out is required")
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(path):
    if path is None:
        raise CLIError("--dataset is required")
    try:
        return load_dataset(path)
    except (SnapshotFormatError, ValueError, OSError) as exc:
        raise CLIError(f"cannot load dataset: {exc}") from exc


def _read_tokens(path):
    with open(path, encoding="utf-8") as fh:
        return [ln.strip() for ln in fh if ln.strip() and not ln.startswith("//")]


def _series_path(path):
    p = Path(path)
    return p / "series.csv" if p.is_dir() else p


def cmd_score(cfg, n_jobs=None):
    dataset = _load(cfg.dataset)
    if cfg.targets in (None, "auto"):
        targets = auto_targets(dataset)
    else:
        targets = _read_tokens(cfg.targets)
    if not targets:
        raise CLIError("no target tokens to score")
    out = _out_dir(cfg.out)
    series, errors = score_tokens(dataset, targets, cfg.scoring(), n_jobs=n_jobs)
    for tok, msg in errors.items():
        log.warning("skipping %r: %s", tok, msg)
    outputs = [write_series_csv(series, out / "series.csv")]
    per_token = out / "series"
    per_token.mkdir(exist_ok=True)
    for s in series:
        outputs.append(write_series_csv([s], per_token / f"{token_slug(s.token)}.csv"))
    outputs.append(write_csv(out / "errors.csv", ["token", "error"], sorted(errors.items())))
    inputs = {"dataset": cfg.dataset}
    if cfg.targets not in (None, "auto"):
        inputs["targets"] = cfg.targets
    _write_manifest(out, cfg, inputs, outputs)
    return {"scored": len(series), "errors": len(errors)}


def cmd_cluster(cfg, series_path, labels_path=None, n_jobs=None):
    src = _series_path(series_path)
    series = [s for s in read_series_csv(src) if s.observed()]
    if len(series) < 2:
        raise CLIError(f"need at least 2 usable series, found {len(series)}")
    if cfg.clusters is None:
        raise CLIError("--clusters is required")
    if not 1 <= cfg.clusters <= len(series):
        raise CLIError(f"--clusters {cfg.clusters} must lie in [1, {len(series)}]")
    out = _out_dir(cfg.out)
    model = ShapeClusterer(cfg.clusters, cfg.neighbors, cfg.window, cfg.degree,
                           cfg.smoothing_mode, cfg.linkage, n_jobs=n_jobs).fit(series)
    report = model.report_
    outputs = [
        write_profiles_csv(sorted(model.profiles_, key=lambda p: p.token), out / "profiles.csv"),
        write_distance_matrix_csv(model.distance_matrix_, out / "distances.csv"),
        write_assignments_csv(report, out / "assignments.csv"),
        write_linkage_csv(report, out / "linkage.csv"),
        write_shapes_csv(report, out / "shapes.csv"),
    ]
    inputs = {"series": src}
    result = {"n_clusters": report.n_clusters, "sizes": report.sizes}
    if labels_path is not None:
        labels = load_labels(labels_path)
        labels = {t: s for t, s in labels.items() if t in report.assignments}
        agreement = evaluate_recovery(labels, report.assignments)
        outputs.append(dump_json(out / "recovery.json", {"agreement": agreement, "n_labelled": len(labels)}))
        inputs["labels"] = labels_path
        result["agreement"] = agreement
    _write_manifest(out, cfg, inputs, outputs)
    return result


def _read_tags(path):
    tags = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip("\r\n").split("\t")
            if len(parts) == 2 and parts[0]:
                tags[parts[0]] = parts[1]
    return tags


def cmd_cohorts(cfg, series_path, tags_path=None):
    src = _series_path(series_path)
    series = read_series_csv(src)
    table = volatility_table(series)
    if len(table) == 0:
        raise CLIError("no series with at least 2 scores")
    out = _out_dir(cfg.out)
    cohorts = percentile_cohorts(table, cfg.cuts)
    outputs = [
        write_volatility_csv(table, cohorts, out / "volatility.csv"),
        write_csv(out / "excluded.csv", ["token", "n_points"], sorted(table.excluded.items())),
        write_curves_csv(cohort_curves(series, cohorts, cohort_labels(cfg.cuts)), out / "cohort_curves.csv"),
    ]
    inputs = {"series": src}
    if tags_path is not None:
        tags = _read_tags(tags_path)
        tagged = {t: g for t, g in tags.items() if t in table.volatility}
        outputs.append(write_curves_csv(cohort_curves(series, tagged), out / "group_curves.csv"))
        inputs["tags"] = tags_path
    _write_manifest(out, cfg, inputs, outputs)
    sizes = {}
    for c in cohorts.values():
        sizes[c] = sizes.get(c, 0) + 1
    return {"tokens": len(table), "excluded": len(table.excluded), "cohort_sizes": sizes}


def cmd_concreteness(cfg, volatility_path, senses_path, lexicon_path):
    table = read_volatility_csv(volatility_path)
    senses = read_sense_map(senses_path)
    lexicon = read_lexicon(lexicon_path)
    try:
        report = concreteness_report(table, senses, lexicon, cfg.fraction, cfg.mu)
    except ConcretenessError as exc:
        raise CLIError(f"{exc}; unmatched: {', '.join(exc.unmatched)}") from exc
    out = _out_dir(cfg.out)
    payload = report.to_dict()
    payload["population_std"] = lexicon.population_std
    outputs = [dump_json(out / "concreteness.json", payload)]
    _write_manifest(out, cfg, {"volatility": volatility_path, "senses": senses_path,
                               "lexicon": lexicon_path}, outputs)
    return payload


def cmd_neighbors(cfg, token, month=None, stream=None):
    stream = stream or sys.stdout
    dataset = _load(cfg.dataset)
    months = dataset.token_months(token) if month in (None, "all") else [month]
    if not months:
        raise CLIError(f"token {token!r} appears in no snapshot")
    config = cfg.scoring()
    stream.write("month\trank\tneighbor\tsimilarity\n")
    for m in months:
        try:
            nn = top_k_neighbors(dataset[m], token, config)
        except KeyError as exc:
            raise CLIError(str(exc.args[0])) from exc
        for rank, (tok, sim) in enumerate(nn.neighbors, start=1):
            stream.write(f"{m}\t{rank}\t{tok}\t{sim:.6f}\n")
    return months


def cmd_synth(cfg, spec_path):
    specs, req = specs_from_json(spec_path)
    if not specs:
        raise CLIError("spec file lists no planted tokens")
    seed = cfg.seed if cfg.seed is not None else req.get("seed", 0)
    try:
        synth = generate(specs, req.get("months", 60), req["vocab_size"], req["dim"], seed,
                         k=req.get("k", 25), cluster_noise=req.get("cluster_noise", 0.5))
    except KeyError as exc:
        raise CLIError(f"spec file is missing {exc.args[0]!r}") from exc
    except ValueError as exc:
        raise CLIError(str(exc)) from exc
    save_synthetic(synth, _out_dir(cfg.out))
    return {"tokens": len(specs), "months": len(synth.dataset)}


def _cuts(text):
    try:
        return [float(c) for c in text.split(",") if c.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid cut list {text!r}") from None


def _add_scoring(p):
    p.add_argument("--k", type=int, default=25, help="neighbours per second-order vector")
    p.add_argument("--pool", type=int, default=500, help="candidate pool ranked before filtering")
    p.add_argument("--min-components", type=int, default=2)
    p.add_argument("--keep-hashtags", action="store_true", help="allow hashtags as neighbours")
    p.add_argument("--keep-targets", action="store_true", help="allow emoji as neighbours")


def _add_smoothing(p):
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--smoothing-mode", choices=("interp", "mirror"), default="interp")


def build_parser():
    parser = argparse.ArgumentParser(prog="semdrift", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", parents=[common], help="change series for target tokens")
    p.add_argument("--dataset", required=True)
    p.add_argument("--targets", default="auto", help="token list file, or 'auto' for all emoji")
    _add_scoring(p)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("cluster", parents=[common], help="cluster change series by trajectory shape")
    p.add_argument("--series", required=True, help="score output directory or series.csv")
    p.add_argument("--clusters", type=int, required=True)
    p.add_argument("--neighbors", type=int, default=10, help="most similar shapes per token")
    p.add_argument("--linkage", default="average")
    _add_smoothing(p)
    p.add_argument("--labels", help="labels.json from 'synth' to report recovery agreement")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("cohorts", parents=[common], help="volatility table, percentile cohorts and curves")
    p.add_argument("--series", required=True)
    p.add_argument("--cuts", type=_cuts, default=list(DEFAULT_CUTS))
    p.add_argument("--tags", help="token<TAB>group file for per-group curves")
    p.add_argument("--out", required=True)

    p = sub.add_parser("concreteness", parents=[common], help="t-test of concreteness for the most volatile tokens")
    p.add_argument("--volatility", required=True, help="volatility.csv from 'cohorts'")
    p.add_argument("--senses", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--fraction", type=float, default=0.10)
    p.add_argument("--mu", type=float, help="override the lexicon population mean")
    p.add_argument("--out", required=True)

    p = sub.add_parser("neighbors", parents=[common], help="ranked nearest neighbours of a token per month")
    p.add_argument("--dataset", required=True)
    p.add_argument("--token", required=True)
    p.add_argument("--month", default="all")
    _add_scoring(p)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset with planted drift")
    p.add_argument("--spec", required=True, help="JSON generation request")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    return parser


def _config(args):
    cfg = RunConfig(command=args.command)
    for name in ("dataset", "targets", "k", "pool", "min_components", "window", "degree",
                 "smoothing_mode", "clusters", "neighbors", "linkage", "cuts", "fraction",
                 "mu", "seed", "out"):
        if hasattr(args, name):
            setattr(cfg, name, getattr(args, name))
    if hasattr(args, "keep_hashtags"):
        cfg.exclude_hashtags = not args.keep_hashtags
        cfg.exclude_targets = not args.keep_targets
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    cfg = _config(args)
    try:
        if args.command == "score":
            result = cmd_score(cfg, n_jobs=args.jobs)
        elif args.command == "cluster":
            result = cmd_cluster(cfg, args.series, args.labels, n_jobs=args.jobs)
        elif args.command == "cohorts":
            result = cmd_cohorts(cfg, args.series, args.tags)
        elif args.command == "concreteness":
            result = cmd_concreteness(cfg, args.volatility, args.senses, args.lexicon)
        elif args.command == "neighbors":
            cmd_neighbors(cfg, args.token, args.month)
            return 0
        else:
            result = cmd_synth(cfg, args.spec)
    except CLIError as exc:
        print(f"semdrift {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, OSError) as exc:
        print(f"semdrift {args.command}: error: {exc}", file=sys.stderr)
        return 1
    log.info("%s: %s", args.command, result)
    return 0


if __name__ == "__main__":
    sys.exit(main())
