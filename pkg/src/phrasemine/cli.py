"""Command-line pipeline driver.

Subcommands cover the whole flow: annotate a corpus into silver labels, dump
one sentence's impact matrix as CSV, export seq2seq training files, ground
decoded generator output back to spans, merge prediction files, and evaluate
both tasks. Corpus I/O is streaming; outputs are written atomically and each
gets a ``<output>.config.json`` echo of the effective configuration.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 backend or
transport error.
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from . import __version__
from .backends import CachingBackend, EncoderBackend, ReferenceBackend, RemoteBackend
from .config import read_config_file
from .corpus import (
    PhraseSet,
    corpus_sentence_index,
    iter_corpus,
    read_gold_labels,
    read_phrase_sets,
    write_phrase_sets,
)
from .errors import BackendError, ConfigError, DataError
from .evaluation import (
    CorpusStats,
    aggregate_candidates,
    eval_documents,
    eval_sentences,
    tfidf_rank,
)
from .filtering import FilterConfig, load_stopwords
from .generation import (
    ParseStats,
    export_train_records,
    merge_phrase_sets,
    parse_generated,
    read_generated_records,
    write_train_records,
)
from .ioutil import atomic_writer, write_config_echo
from .mining import build_impact_matrix, matrix_to_csv, mine_phrases

PROGRESS_EVERY = 200


def _progress(count: int, what: str) -> None:
    if count % PROGRESS_EVERY == 0:
        click.echo(f"progress: {count} {what}", err=True)


def _apply_config(ctx: click.Context, _param: click.Parameter, value: str | None):
    if not value:
        return None
    flat = read_config_file(value)
    ctx.default_map = {name: dict(flat) for name in ctx.command.commands}  # type: ignore[union-attr]
    return value


@click.group(name="phrasemine")
@click.version_option(__version__)
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    is_eager=True,
    expose_value=False,
    callback=_apply_config,
    help="Key=value config file; flags override its entries.",
)
def cli() -> None:
    """Mine, bridge, and evaluate multi-word quality phrases."""


def backend_options(fn):
    opts = [
        click.option(
            "--backend",
            "backend_kind",
            type=click.Choice(["reference", "remote"]),
            default="reference",
            show_default=True,
            help="Encoder backend: deterministic reference or remote HTTP service.",
        ),
        click.option(
            "--url",
            envvar="PHRASEMINE_BACKEND_URL",
            default=None,
            help="Remote backend base URL (also PHRASEMINE_BACKEND_URL).",
        ),
        click.option(
            "--seed",
            type=click.IntRange(min=0),
            envvar="PHRASEMINE_SEED",
            default=0,
            show_default=True,
            help="Reference backend seed (also PHRASEMINE_SEED).",
        ),
        click.option(
            "--dim",
            type=click.IntRange(min=1),
            default=32,
            show_default=True,
            help="Reference backend vector width.",
        ),
        click.option(
            "--layer",
            type=int,
            default=None,
            help="Hidden layer requested from a remote backend (default: its last).",
        ),
        click.option(
            "--cache-size",
            type=click.IntRange(min=0),
            default=100_000,
            show_default=True,
            help="Encode-request LRU entries; 0 disables caching.",
        ),
        click.option("--timeout", type=float, default=30.0, show_default=True),
        click.option("--retries", type=click.IntRange(min=0), default=2, show_default=True),
        click.option("--batch-size", type=click.IntRange(min=1), default=64, show_default=True),
        click.option("--max-inflight", type=click.IntRange(min=1), default=4, show_default=True),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def filter_options(fn):
    fn = click.option(
        "--stopwords",
        "stopwords_path",
        type=click.Path(exists=True, dir_okay=False),
        default=None,
        help="Stopword file, one word per line (default: bundled list).",
    )(fn)
    fn = click.option(
        "--no-pos-filter",
        is_flag=True,
        help="Disable the noun-phrase POS pattern (degraded mode).",
    )(fn)
    return fn


def make_backend(
    backend_kind: str,
    url: str | None,
    seed: int,
    dim: int,
    layer: int | None,
    cache_size: int,
    timeout: float,
    retries: int,
    batch_size: int,
    max_inflight: int,
) -> EncoderBackend:
    if backend_kind == "remote":
        if not url:
            raise click.UsageError("--backend remote requires --url (or PHRASEMINE_BACKEND_URL)")
        backend: EncoderBackend = RemoteBackend(
            url,
            timeout=timeout,
            retries=retries,
            layer=layer,
            batch_size=batch_size,
            max_inflight=max_inflight,
        )
    else:
        backend = ReferenceBackend(seed=seed, dim=dim)
    if cache_size > 0:
        backend = CachingBackend(backend, max_entries=cache_size)
    return backend


def make_filter_config(stopwords_path: str | None, no_pos_filter: bool) -> FilterConfig:
    if no_pos_filter:
        click.echo(
            "warning: POS filtering disabled; emitted spans are only "
            "stopword-trimmed multi-word chunks",
            err=True,
        )
    return FilterConfig(
        stopwords=load_stopwords(stopwords_path),
        pos_filtering=not no_pos_filter,
    )


def _echo_config(output: str, command: str, params: dict) -> None:
    resolved = {"command": command, "version": __version__}
    resolved.update({k: (str(v) if isinstance(v, Path) else v) for k, v in params.items()})
    write_config_echo(output, resolved)


@cli.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "output_path", default="-", show_default=True, help="Silver-label JSONL ('-' for stdout).")
@click.option("--q", type=click.FloatRange(0, 100, min_open=True), default=40.0, show_default=True, help="Adjacent-pair percentile used as the per-sentence join threshold.")
@click.option("--metric", type=click.Choice(["euclidean", "cosine_distance"]), default="euclidean", show_default=True)
@click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True, help="Worker threads over sentences.")
@backend_options
@filter_options
def annotate(
    corpus_path: str,
    output_path: str,
    q: float,
    metric: str,
    jobs: int,
    stopwords_path: str | None,
    no_pos_filter: bool,
    **backend_kw,
) -> None:
    """Mine silver labels: impact matrices, segmentation, filtering."""
    backend = make_backend(**backend_kw)
    config = make_filter_config(stopwords_path, no_pos_filter)
    sentences = 0
    phrases = 0

    def work(sent):
        return mine_phrases(sent, backend, config, q=q, metric=metric)

    rejects: list[tuple[int, str]] = []
    with atomic_writer(output_path) as out:
        pool = ThreadPoolExecutor(max_workers=jobs) if jobs > 1 else None
        try:
            for doc in iter_corpus(corpus_path, rejects=rejects):
                results = pool.map(work, doc.sentences) if pool else map(work, doc.sentences)
                for ps in results:
                    write_phrase_sets(out, [ps])
                    sentences += 1
                    phrases += len(ps)
                    _progress(sentences, "sentences")
        finally:
            if pool:
                pool.shutdown()
    click.echo(
        f"annotate: {sentences} sentences, {phrases} phrases, "
        f"{len(rejects)} rejected documents",
        err=True,
    )
    _echo_config(
        output_path,
        "annotate",
        {
            "corpus": corpus_path,
            "q": q,
            "metric": metric,
            "jobs": jobs,
            "stopwords": stopwords_path,
            "pos_filtering": not no_pos_filter,
            **backend_kw,
        },
    )


@cli.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--sentence-id", required=True)
@click.option("--output", "output_path", default="-", show_default=True, help="CSV destination ('-' for stdout).")
@click.option("--metric", type=click.Choice(["euclidean", "cosine_distance"]), default="euclidean", show_default=True)
@backend_options
def impact(
    corpus_path: str,
    sentence_id: str,
    output_path: str,
    metric: str,
    **backend_kw,
) -> None:
    """Dump one sentence's word impact matrix as CSV (header: word surfaces)."""
    backend = make_backend(**backend_kw)
    target = None
    for doc in iter_corpus(corpus_path):
        for sent in doc.sentences:
            if sent.id == sentence_id:
                target = sent
                break
        if target:
            break
    if target is None:
        raise DataError(f"sentence id {sentence_id!r} not found in {corpus_path}")
    matrix = build_impact_matrix(target, backend, metric)
    with atomic_writer(output_path) as out:
        out.write(matrix_to_csv(target, matrix))
    _echo_config(
        output_path,
        "impact",
        {"corpus": corpus_path, "sentence_id": sentence_id, "metric": metric, **backend_kw},
    )


@cli.command("export-train")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--silver", "silver_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "output_path", default="-", show_default=True)
def export_train(corpus_path: str, silver_path: str, output_path: str) -> None:
    """Turn silver labels into seq2seq training records (source/target JSONL)."""
    silver = read_phrase_sets(silver_path)
    count = 0
    with atomic_writer(output_path) as out:
        records = export_train_records(silver, iter_corpus(corpus_path))
        count = write_train_records(out, records)
    click.echo(f"export-train: {count} records", err=True)
    _echo_config(output_path, "export-train", {"corpus": corpus_path, "silver": silver_path})


@cli.command("import-generated")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--generated", "generated_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "output_path", default="-", show_default=True)
@click.option("--max-phrases", type=click.IntRange(min=1), default=16, show_default=True, help="Cap on parsed phrases per sentence.")
@filter_options
def import_generated(
    corpus_path: str,
    generated_path: str,
    output_path: str,
    max_phrases: int,
    stopwords_path: str | None,
    no_pos_filter: bool,
) -> None:
    """Ground decoded generator targets back to token spans and filter them."""
    config = make_filter_config(stopwords_path, no_pos_filter)
    sentences = corpus_sentence_index(iter_corpus(corpus_path))
    stats = ParseStats()
    count = 0
    with atomic_writer(output_path) as out:
        for rec in read_generated_records(generated_path):
            sent = sentences.get(rec.sentence_id)
            if sent is None:
                raise DataError(
                    f"generated record references unknown sentence id {rec.sentence_id!r}"
                )
            ps = parse_generated(rec, sent, config, max_phrases=max_phrases, stats=stats)
            write_phrase_sets(out, [ps])
            count += 1
            _progress(count, "records")
    click.echo(
        f"import-generated: {count} records, {stats.grounded} grounded, "
        f"{stats.hallucinated} hallucinated targets dropped",
        err=True,
    )
    _echo_config(
        output_path,
        "import-generated",
        {
            "corpus": corpus_path,
            "generated": generated_path,
            "max_phrases": max_phrases,
            "stopwords": stopwords_path,
            "pos_filtering": not no_pos_filter,
        },
    )


@cli.command()
@click.option("--left", "left_path", required=True, type=click.Path(exists=True, dir_okay=False), help="First predictions file (e.g. silver labels).")
@click.option("--right", "right_path", required=True, type=click.Path(exists=True, dir_okay=False), help="Second predictions file (e.g. grounded generations).")
@click.option("--output", "output_path", default="-", show_default=True)
def merge(left_path: str, right_path: str, output_path: str) -> None:
    """Union two prediction files by (start, end); overlaps are kept."""
    left = read_phrase_sets(left_path)
    right = read_phrase_sets(right_path)
    count = 0
    with atomic_writer(output_path) as out:
        for sid in sorted(set(left) | set(right)):
            if sid in left and sid in right:
                merged = merge_phrase_sets(left[sid], right[sid])
            else:
                only = left[sid] if sid in left else right[sid]
                merged = PhraseSet(sid, only.spans, "merged")
            write_phrase_sets(out, [merged])
            count += 1
    click.echo(f"merge: {count} sentences", err=True)
    _echo_config(output_path, "merge", {"left": left_path, "right": right_path})


def _print_table(rows: list[tuple[str, str]]) -> None:
    width = max(len(name) for name, _ in rows)
    for name, value in rows:
        click.echo(f"{name.ljust(width)}  {value}", err=True)


@cli.command("eval-sentence")
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "output_path", default="-", show_default=True, help="JSON report destination.")
@click.option("--match", type=click.Choice(["span", "surface"]), default="span", show_default=True)
@click.option("--per-sentence", is_flag=True, help="Include per-sentence counts in the report.")
@click.option("--csv", "csv_path", default=None, type=click.Path(dir_okay=False), help="Also write a CSV summary.")
def eval_sentence(
    pred_path: str,
    gold_path: str,
    output_path: str,
    match: str,
    per_sentence: bool,
    csv_path: str | None,
) -> None:
    """Micro precision/recall/F1 of span predictions against gold labels."""
    pred = read_phrase_sets(pred_path)
    gold = read_gold_labels(gold_path)
    report = eval_sentences(pred, gold, match=match, per_sentence=per_sentence)
    with atomic_writer(output_path) as out:
        json.dump(report.to_dict(), out, ensure_ascii=False, indent=2)
        out.write("\n")
    _print_table(
        [
            ("precision", f"{report.precision:.4f}"),
            ("recall", f"{report.recall:.4f}"),
            ("f1", f"{report.f1:.4f}"),
            ("tp/fp/fn", f"{report.tp}/{report.fp}/{report.fn}"),
        ]
    )
    if csv_path:
        with atomic_writer(csv_path) as out:
            out.write("tp,fp,fn,precision,recall,f1\n")
            out.write(
                f"{report.tp},{report.fp},{report.fn},"
                f"{report.precision!r},{report.recall!r},{report.f1!r}\n"
            )
    _echo_config(
        output_path,
        "eval-sentence",
        {"pred": pred_path, "gold": gold_path, "match": match},
    )


@cli.command("eval-doc")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False), help="Corpus with gold_keyphrases per document.")
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True, dir_okay=False), help="Per-sentence predictions JSONL.")
@click.option("--output", "output_path", default="-", show_default=True, help="JSON report destination.")
@click.option("--k", type=click.IntRange(min=1), default=10, show_default=True, help="Rank cutoff.")
@click.option("--csv", "csv_path", default=None, type=click.Path(dir_okay=False), help="Also write per-document CSV rows.")
def eval_doc(
    corpus_path: str,
    pred_path: str,
    output_path: str,
    k: int,
    csv_path: str | None,
) -> None:
    """Aggregate, TF-IDF-rank, and score top-k keyphrases per document."""
    preds = read_phrase_sets(pred_path)
    stats = CorpusStats()
    for doc in iter_corpus(corpus_path):
        candidates = aggregate_candidates(doc, preds)
        stats.add_document(c.surface for c in candidates)
    if stats.n_documents == 0:
        raise DataError(f"corpus {corpus_path} contains no valid documents")
    ranked: dict[str, list[str]] = {}
    gold: dict[str, list[str]] = {}
    for doc in iter_corpus(corpus_path):
        candidates = aggregate_candidates(doc, preds)
        ranked[doc.id] = [s for s, _ in tfidf_rank(doc, candidates, stats, k=k)]
        gold[doc.id] = list(doc.gold_keyphrases)
    report = eval_documents(ranked, gold)
    with atomic_writer(output_path) as out:
        json.dump(report.to_dict(), out, ensure_ascii=False, indent=2)
        out.write("\n")
    _print_table(
        [
            (f"f1@{k}", f"{report.f1_at_10:.4f}"),
            ("documents scored", str(len(report.per_document))),
        ]
    )
    if csv_path:
        with atomic_writer(csv_path) as out:
            out.write("doc_id,precision,recall,f1,top\n")
            for row in report.per_document:
                top = " | ".join(row["top"]).replace('"', "'")
                out.write(
                    f"{row['doc_id']},{row['precision']!r},{row['recall']!r},"
                    f"{row['f1']!r},\"{top}\"\n"
                )
    _echo_config(
        output_path,
        "eval-doc",
        {"corpus": corpus_path, "pred": pred_path, "k": k},
    )


def main(argv: list[str] | None = None) -> int:
    """Run the CLI and map exceptions to exit codes."""
    try:
        cli.main(args=argv, prog_name="phrasemine", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return 1
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    except BackendError as exc:
        click.echo(f"backend error: {exc}", err=True)
        return 3
    return 0


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
