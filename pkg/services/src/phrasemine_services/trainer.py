"""Fine-tune an encoder-decoder model on exported train records and decode
test sentences into generated-record files.

Train records come from `phrasemine export-train`; generated records go back
through `phrasemine import-generated`. Validation reuses the primary CLI end
to end (ground the decoded strings, ground the held-out targets, score with
eval-sentence), so there is exactly one evaluation implementation.

The train/validation split is fixed at 8:2, seeded and deterministic. The
checkpoint with the best validation F1 is kept (ties keep the later, i.e.
more trained, checkpoint); without a corpus to validate against, the final
checkpoint is kept.
"""

from __future__ import annotations

import json
import logging
import random
import subprocess
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import click
import torch
from transformers import AutoModelForSeq2SeqLM, AutoTokenizer

logger = logging.getLogger(__name__)

VAL_RATIO = 0.2  # fixed split protocol


@dataclass
class TrainerConfig:
    base_model: str
    epochs: int = 50
    batch_size: int = 8
    warmup_steps: int = 1000
    learning_rate: float = 3e-5
    beam_size: int = 6
    max_target_len: int = 64
    max_source_len: int = 128
    seed: int = 13
    eval_every: int = 1
    device: str = "cpu"


@dataclass
class TrainRecord:
    sentence_id: str
    source: str
    target: str


def load_train_records(path: str | Path) -> list[TrainRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fp:
        for line_no, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                records.append(TrainRecord(obj["sentence_id"], obj["source"], obj["target"]))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{line_no}: bad train record: {exc}") from exc
    if not records:
        raise ValueError(f"{path} contains no train records")
    return records


def split_records(records: list[TrainRecord], seed: int) -> tuple[list[TrainRecord], list[TrainRecord]]:
    shuffled = records[:]
    random.Random(seed).shuffle(shuffled)
    n_val = round(len(shuffled) * VAL_RATIO)
    return shuffled[n_val:], shuffled[:n_val]


def iter_corpus_sentences(path: str | Path):
    """Yield (sentence_id, text) from a corpus JSONL file."""
    with open(path, "r", encoding="utf-8") as fp:
        for line_no, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                for sent in doc["sentences"]:
                    yield sent["id"], sent["text"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{line_no}: bad corpus record: {exc}") from exc


def _lr_lambda(total_steps: int, warmup: int):
    def factor(step: int) -> float:
        if warmup > 0 and step < warmup:
            return (step + 1) / warmup
        if total_steps <= warmup:
            return 1.0
        return max(0.0, (total_steps - step) / (total_steps - warmup))

    return factor


def _decode_batch(model, tokenizer, sources, config: TrainerConfig) -> list[str]:
    enc = tokenizer(
        sources,
        return_tensors="pt",
        padding=True,
        truncation=True,
        max_length=config.max_source_len,
    ).to(config.device)
    with torch.no_grad():
        generated = model.generate(
            input_ids=enc.input_ids,
            attention_mask=enc.attention_mask,
            num_beams=config.beam_size,
            max_length=config.max_target_len,
        )
    return [tokenizer.decode(g, skip_special_tokens=True) for g in generated]


def decode_sentences(model, tokenizer, sentences, config: TrainerConfig):
    """Decode (id, text) pairs; a failing sentence degrades to an empty
    target with a warning instead of aborting the batch."""
    model.eval()
    out = []
    batch: list[tuple[str, str]] = []

    def flush():
        if not batch:
            return
        try:
            decoded = _decode_batch(model, tokenizer, [s for _, s in batch], config)
        except Exception:
            decoded = []
            for sid, text in batch:
                try:
                    decoded.append(_decode_batch(model, tokenizer, [text], config)[0])
                except Exception as exc:
                    logger.warning("decode failed for sentence %s: %s", sid, exc)
                    decoded.append("")
        out.extend((sid, text_out) for (sid, _), text_out in zip(batch, decoded))
        batch.clear()

    for sid, text in sentences:
        batch.append((sid, text))
        if len(batch) >= config.batch_size:
            flush()
    flush()
    return out


def write_generated(path: str | Path, decoded) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fp:
        for sid, text in decoded:
            fp.write(json.dumps({"sentence_id": sid, "target_text": text}, ensure_ascii=False) + "\n")
            count += 1
    return count


def _primary(*args: str) -> None:
    proc = subprocess.run(
        [sys.executable, "-m", "phrasemine", *args], capture_output=True, text=True
    )
    if proc.returncode != 0:
        raise RuntimeError(
            f"phrasemine {' '.join(args[:1])} failed ({proc.returncode}): {proc.stderr[-500:]}"
        )


def validation_f1(model, tokenizer, val_records, corpus: str, config: TrainerConfig) -> float:
    """Score decoded validation outputs against the grounded held-out targets
    using the primary CLI (import-generated + eval-sentence)."""
    with tempfile.TemporaryDirectory(prefix="pm-val-") as tmp:
        tmp_path = Path(tmp)
        decoded = decode_sentences(
            model, tokenizer, [(r.sentence_id, r.source) for r in val_records], config
        )
        write_generated(tmp_path / "decoded.jsonl", decoded)
        write_generated(
            tmp_path / "targets.jsonl", [(r.sentence_id, r.target) for r in val_records]
        )
        _primary(
            "import-generated", "--corpus", corpus,
            "--generated", str(tmp_path / "decoded.jsonl"),
            "--output", str(tmp_path / "pred.jsonl"),
        )
        _primary(
            "import-generated", "--corpus", corpus,
            "--generated", str(tmp_path / "targets.jsonl"),
            "--output", str(tmp_path / "gold.jsonl"),
        )
        _primary(
            "eval-sentence", "--pred", str(tmp_path / "pred.jsonl"),
            "--gold", str(tmp_path / "gold.jsonl"),
            "--output", str(tmp_path / "report.json"),
        )
        report = json.loads((tmp_path / "report.json").read_text())
        return float(report["f1"])


def _save(model, tokenizer, path: Path) -> None:
    path.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(path)
    tokenizer.save_pretrained(path)


def train(
    train_file: str | Path,
    out_dir: str | Path,
    config: TrainerConfig,
    *,
    corpus: str | None = None,
    resume: str | None = None,
) -> dict:
    """Teacher-forced fine-tuning with linear warmup and decay; returns the
    metrics dict that is also written to <out_dir>/metrics.json."""
    records = load_train_records(train_file)
    train_recs, val_recs = split_records(records, config.seed)
    if not train_recs:
        raise ValueError("training split is empty")

    torch.manual_seed(config.seed)
    source = resume if resume else config.base_model
    tokenizer = AutoTokenizer.from_pretrained(source)
    model = AutoModelForSeq2SeqLM.from_pretrained(source).to(config.device)

    steps_per_epoch = (len(train_recs) + config.batch_size - 1) // config.batch_size
    total_steps = steps_per_epoch * config.epochs
    optimizer = torch.optim.AdamW(model.parameters(), lr=config.learning_rate)
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer, _lr_lambda(total_steps, config.warmup_steps)
    )

    out_dir = Path(out_dir)
    metrics: dict = {
        "epoch_losses": [],
        "val_f1": {},
        "best_epoch": None,
        "best_val_f1": None,
        "trained_on": len(train_recs),
        "validated_on": len(val_recs),
    }
    best_f1 = float("-inf")
    pad_id = tokenizer.pad_token_id

    for epoch in range(config.epochs):
        model.train()
        order = train_recs[:]
        random.Random(config.seed * 100_003 + epoch).shuffle(order)
        running = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            enc = tokenizer(
                [r.source for r in batch],
                return_tensors="pt",
                padding=True,
                truncation=True,
                max_length=config.max_source_len,
            ).to(config.device)
            labels = tokenizer(
                [r.target for r in batch],
                return_tensors="pt",
                padding=True,
                truncation=True,
                max_length=config.max_target_len,
            ).input_ids.to(config.device)
            labels[labels == pad_id] = -100
            loss = model(
                input_ids=enc.input_ids, attention_mask=enc.attention_mask, labels=labels
            ).loss
            loss.backward()
            optimizer.step()
            scheduler.step()
            optimizer.zero_grad()
            running += loss.detach().item() * len(batch)
        epoch_loss = running / len(order)
        metrics["epoch_losses"].append(epoch_loss)
        logger.info("epoch %d loss %.5f", epoch, epoch_loss)

        should_eval = (
            corpus is not None
            and val_recs
            and ((epoch + 1) % config.eval_every == 0 or epoch + 1 == config.epochs)
        )
        if should_eval:
            f1 = validation_f1(model, tokenizer, val_recs, corpus, config)
            metrics["val_f1"][str(epoch)] = f1
            logger.info("epoch %d validation f1 %.4f", epoch, f1)
            if f1 >= best_f1:  # ties keep the later checkpoint
                best_f1 = f1
                metrics["best_epoch"] = epoch
                metrics["best_val_f1"] = f1
                _save(model, tokenizer, out_dir / "best")

    _save(model, tokenizer, out_dir / "last")
    if metrics["best_epoch"] is None:
        metrics["best_epoch"] = config.epochs - 1
        _save(model, tokenizer, out_dir / "best")
    (out_dir / "metrics.json").write_text(json.dumps(metrics, indent=2) + "\n")
    return metrics


def generate(
    checkpoint: str | Path,
    corpus: str | Path,
    out_file: str | Path,
    config: TrainerConfig,
) -> int:
    tokenizer = AutoTokenizer.from_pretrained(checkpoint)
    model = AutoModelForSeq2SeqLM.from_pretrained(checkpoint).to(config.device)
    decoded = decode_sentences(model, tokenizer, iter_corpus_sentences(corpus), config)
    return write_generated(out_file, decoded)


# --- CLI ---------------------------------------------------------------------

def _config_options(fn):
    opts = [
        click.option("--epochs", type=int, default=50, show_default=True),
        click.option("--batch-size", type=int, default=8, show_default=True),
        click.option("--warmup-steps", type=int, default=1000, show_default=True),
        click.option("--learning-rate", type=float, default=3e-5, show_default=True),
        click.option("--beam-size", type=int, default=6, show_default=True),
        click.option("--max-target-len", type=int, default=64, show_default=True),
        click.option("--max-source-len", type=int, default=128, show_default=True),
        click.option("--seed", type=int, default=13, show_default=True),
        click.option("--eval-every", type=int, default=1, show_default=True),
        click.option("--device", default="cpu", show_default=True),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


@click.group()
def cli() -> None:
    """Seq2seq phrase generator: fine-tune and decode."""


@cli.command("train")
@click.option("--train-file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--base-model", default="facebook/bart-large", show_default=True)
@click.option("--resume", type=click.Path(file_okay=False), default=None, help="Continue from a checkpoint directory.")
@click.option("--corpus", type=click.Path(exists=True, dir_okay=False), default=None, help="Corpus JSONL for validation grounding; omit to skip validation.")
@_config_options
def train_cmd(train_file, out_dir, base_model, resume, corpus, **kw):
    """Fine-tune on exported train records."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    config = TrainerConfig(base_model=base_model, **{k: v for k, v in kw.items()})
    metrics = train(train_file, out_dir, config, corpus=corpus, resume=resume)
    click.echo(json.dumps({k: metrics[k] for k in ("best_epoch", "best_val_f1", "trained_on", "validated_on")}))


@cli.command("generate")
@click.option("--checkpoint", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "out_file", required=True, type=click.Path(dir_okay=False))
@_config_options
def generate_cmd(checkpoint, corpus, out_file, **kw):
    """Decode every corpus sentence into a generated-record JSONL file."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    config = TrainerConfig(base_model=checkpoint, **{k: v for k, v in kw.items()})
    count = generate(checkpoint, corpus, out_file, config)
    click.echo(f"generated {count} records")


@cli.command("make-tiny")
@click.option("--train-file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=13, show_default=True)
def make_tiny_cmd(train_file, out_dir, seed):
    """Write a small random seq2seq checkpoint covering a train file's vocabulary."""
    from .tiny import build_tiny_seq2seq

    path = build_tiny_seq2seq(out_dir, train_file, seed=seed)
    click.echo(f"tiny seq2seq checkpoint written to {path}")


def entrypoint() -> None:
    cli()


if __name__ == "__main__":
    entrypoint()
