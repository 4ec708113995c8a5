"""Command-line entry points.

Exit codes: 0 success, 1 usage error, 2 data error, 3 I/O or artifact error.
Every option can also be set through an environment variable named
``CLICKSUGGEST_<COMMAND>_<OPTION>`` (e.g. ``CLICKSUGGEST_BUILD_DIM=50``).
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from .embeddings import CbowConfig
from .errors import ArtifactError, DataError
from .graph import DEFAULT_K
from .suggest import DEFAULT_M

log = logging.getLogger("clicksuggest")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_IO = 0, 1, 2, 3


def _rules(stopwords_en, stopwords_zh):
    from .text import NormalizationRules

    return NormalizationRules.from_files(stopwords_en, stopwords_zh)


def _stopword_options(fn):
    fn = click.option("--stopwords-zh", type=click.Path(exists=True, dir_okay=False),
                      help="CJK stop-word file (one token per line).")(fn)
    fn = click.option("--stopwords-en", type=click.Path(exists=True, dir_okay=False),
                      help="Latin-script stop-word file (one token per line).")(fn)
    return fn


@click.group()
@click.option("-v", "--verbose", count=True, help="More diagnostics on stderr.")
def cli(verbose):
    """Query suggestion from click-through logs."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


@cli.command()
@click.option("--log", "log_path", envvar="CLICKSUGGEST_INGEST_LOG", required=True, type=click.Path(dir_okay=False), help="Raw click log (TSV).")
@click.option("--pairs", "pairs_path", envvar="CLICKSUGGEST_INGEST_PAIRS", required=True, type=click.Path(dir_okay=False),
              help="Output pair file.")
@click.option("--on-malformed", type=click.Choice(["skip", "abort"]), default="skip", show_default=True)
@click.option("--columns", default="0,1,2", show_default=True, help="Column indices of query,title,clicked.")
@_stopword_options
def ingest(log_path, pairs_path, on_malformed, columns, stopwords_en, stopwords_zh):
    """Parse a click log, normalize text and aggregate query-document pairs."""
    from .ingest import LogFormat, ParseReport, aggregate_pairs, compute_stats, parse_log, write_pairs

    try:
        qc, tc, cc = (int(c) for c in columns.split(","))
    except ValueError:
        raise click.UsageError("--columns needs three comma-separated integers") from None
    fmt = LogFormat(query_col=qc, title_col=tc, clicked_col=cc, n_columns=max(qc, tc, cc) + 1,
                    on_malformed="raise" if on_malformed == "abort" else "skip")
    report = ParseReport()
    with open(log_path, encoding="utf-8") as fh:
        pairs = aggregate_pairs(parse_log(fh, fmt, report), _rules(stopwords_en, stopwords_zh))
    with open(pairs_path, "w", encoding="utf-8") as out:
        write_pairs(pairs, out)
    stats = compute_stats(pairs)
    click.echo(f"lines read:         {report.lines_read}")
    click.echo(f"malformed skipped:  {report.skip_count}")
    click.echo(f"empty dropped:      {pairs.dropped}")
    click.echo(f"unique pairs:       {stats.unique_pairs} ({stats.clicked_unique_pairs} clicked)")
    click.echo(f"unique queries:     {stats.unique_queries} "
               f"({stats.long_tail_queries} long-tail, {stats.click_absent_queries} click-absent)")
    click.echo(f"stat\tskipped_lines\t{report.skip_count}")
    click.echo(f"stat\tdropped_records\t{pairs.dropped}")
    for line in stats.as_lines():
        click.echo(line)


@cli.command()
@click.option("--pairs", "pairs_path", envvar="CLICKSUGGEST_BUILD_PAIRS", required=True, type=click.Path(dir_okay=False))
@click.option("--artifacts", required=True, type=click.Path(file_okay=False))
@click.option("--config", "config_path", envvar="CLICKSUGGEST_BUILD_CONFIG", type=click.Path(exists=True, dir_okay=False),
              help="CBOW settings as key=value lines; flags override.")
@click.option("--dim", type=int)
@click.option("--window", type=int)
@click.option("--negatives", type=int)
@click.option("--epochs", type=int)
@click.option("--seed", type=int)
@click.option("--min-count", type=int)
@click.option("--workers", type=int)
@click.option("--m", "m", type=click.IntRange(min=1), default=DEFAULT_M, show_default=True)
@click.option("--k", "k", type=click.IntRange(min=1), default=DEFAULT_K, show_default=True)
@_stopword_options
def build(pairs_path, artifacts, config_path, m, k, stopwords_en, stopwords_zh, **cbow_flags):
    """Build graph, embeddings, centroid index and suggestion table."""
    from .embeddings import build_centroid_index, train_cbow
    from .graph import build_graph
    from .ingest import read_pairs, training_corpus
    from .store import precompute_suggestions, save_engine, sha256_file
    from .suggest import Engine

    base = CbowConfig.from_file(config_path).to_dict() if config_path else {}
    base.update({k_: v for k_, v in cbow_flags.items() if v is not None})
    try:
        config = CbowConfig.from_dict(base)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None

    def stage(name, fn, *args):
        log.info("stage %s", name)
        try:
            return fn(*args)
        except DataError as exc:
            raise DataError(f"stage {name}: {exc}") from exc

    with open(pairs_path, encoding="utf-8") as fh:
        pairs = stage("read-pairs", read_pairs, fh)
    graph = stage("graph", build_graph, pairs)
    model = stage("train", train_cbow, training_corpus(pairs), config)
    index = stage("centroids", build_centroid_index, model, graph.queries)
    absent = tuple(sorted(q for q, c in pairs.query_clicks().items() if c == 0))
    engine = Engine(graph, model, index, _rules(stopwords_en, stopwords_zh), absent_queries=absent)
    table = stage("precompute", precompute_suggestions, engine, None, m, k)
    save_engine(engine, artifacts, table, source_digest=sha256_file(pairs_path), m=m, k=k, cbow_config=config)
    click.echo(f"built {artifacts}: {len(graph)} graph queries, {len(graph.docs)} documents, "
               f"{graph.n_edges} edges, vocabulary {len(model)}, {len(absent)} click-absent queries")


def _load(artifacts):
    from .store import load_engine

    return load_engine(artifacts)


@cli.command("suggest")
@click.option("--artifacts", required=True, type=click.Path(file_okay=False))
@click.option("--k", "k", type=click.IntRange(min=1), default=DEFAULT_K, show_default=True)
@click.option("--m", "m", type=click.IntRange(min=1), default=DEFAULT_M, show_default=True)
@click.option("--format", "fmt", envvar="CLICKSUGGEST_SUGGEST_FORMAT", type=click.Choice(["text", "records"]), default="text", show_default=True)
@click.option("--enrich-long-tail", is_flag=True,
              help="Fill short lists of long-tail clicked queries with embedding-bridge items.")
@click.argument("query", nargs=-1, required=True)
def suggest_cmd(artifacts, k, m, fmt, enrich_long_tail, query):
    """Print suggestions for QUERY."""
    from .service import format_records, format_text
    from .suggest import suggest

    engine = _load(artifacts)
    result = suggest(" ".join(query), engine, m=m, k=k, enrich_long_tail=enrich_long_tail)
    click.echo(format_records(result) if fmt == "records" else format_text(result), nl=False)


@cli.command()
@click.option("--artifacts", required=True, type=click.Path(file_okay=False))
@click.option("--bind", default="127.0.0.1:8080", show_default=True, help="host:port")
@click.option("--k", "k", type=click.IntRange(min=1), default=DEFAULT_K, show_default=True)
@click.option("--m", "m", type=click.IntRange(min=1), default=DEFAULT_M, show_default=True)
@click.option("--request-log/--no-request-log", default=False)
def serve(artifacts, bind, k, m, request_log):
    """Serve GET /suggest and GET /healthz over HTTP."""
    from .service import ServeConfig, make_server

    try:
        config = ServeConfig.from_bind(bind, artifacts=artifacts, k=k, m=m, request_log=request_log)
    except ValueError as exc:
        raise click.UsageError(f"bad --bind: {exc}") from None
    server = make_server(config)
    click.echo(f"serving on http://{server.server_address[0]}:{server.server_address[1]}", err=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


@cli.group("eval")
def eval_group():
    """Human-annotation evaluation helpers."""


@eval_group.command("sample")
@click.option("--artifacts", required=True, type=click.Path(file_okay=False))
@click.option("--n", "n", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
def eval_sample(artifacts, n, seed, out_dir):
    """Write annotation worksheets for sampled click-existing and click-absent queries."""
    from .evaluation import render_worksheet, sample_eval_queries

    engine = _load(artifacts)
    sample = sample_eval_queries(engine.graph.queries, engine.absent_queries, n, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, queries in (("existing", sample.existing), ("absent", sample.absent)):
        entries = [(q, [s for s, _ in engine.table[q].items]) for q in queries]
        (out / f"worksheet_{name}.tsv").write_text(render_worksheet(entries, seed), encoding="utf-8")
        click.echo(f"{name}: {len(queries)} queries -> {out / f'worksheet_{name}.tsv'}")
    for name, missing in sample.shortfall.items():
        click.echo(f"warning: {name} class short by {missing} queries", err=True)


@eval_group.command("score")
@click.option("--existing", "existing_files", multiple=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--absent", "absent_files", multiple=True, type=click.Path(exists=True, dir_okay=False))
def eval_score(existing_files, absent_files):
    """Summarize filled worksheets: mean score and correlation percentage per class."""
    from .evaluation import aggregate, read_annotations
    from .suggest import Kind

    if not existing_files and not absent_files:
        raise click.UsageError("give at least one --existing or --absent file")
    for kind, files in ((Kind.EXISTING, existing_files), (Kind.ABSENT, absent_files)):
        if not files:
            continue
        records = []
        for path in files:
            with open(path, encoding="utf-8") as fh:
                records.extend(read_annotations(fh, path))
        for line in aggregate(records, kind).as_lines():
            click.echo(line)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="clicksuggest", standalone_mode=False, auto_envvar_prefix="CLICKSUGGEST")
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except (click.UsageError, click.Abort) as exc:
        if isinstance(exc, click.UsageError):
            exc.show()
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except DataError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA
    except (ArtifactError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
