"""HTTP service exposing a masked language model's hidden states.

Routes (all POST, JSON):

    /descriptor    -> {"name", "dim", "mask_piece", "max_pieces"}
    /tokenize      {"words": [str]} -> {"pieces": [[str]]}
    /encode        {"pieces", "masked", "want", "layer"?}
                   -> {"dim", "vectors": {"<piece index>": [float]}}
    /encode_batch  {"requests": [...]} -> {"results": [...]}  (order kept)

Clients send bare piece sequences; the server frames them with the model's
special tokens internally and maps indices back, replaces masked positions
with the mask token id, and reads hidden states at the requested layer
(0 = embeddings, n = after layer n; default is the last). The server is
stateless per request; the model runs in eval mode under a lock, so identical
requests return identical bytes.

HTTP 400 = malformed request, 413 = too many pieces, 500 = model failure.
"""

from __future__ import annotations

import threading
from pathlib import Path

import click
import torch
import uvicorn
from fastapi import FastAPI, HTTPException
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field
from transformers import AutoModel, AutoTokenizer


class TokenizeBody(BaseModel):
    words: list[str]


class EncodeBody(BaseModel):
    pieces: list[str]
    masked: list[int] = Field(default_factory=list)
    want: list[int]
    layer: int | None = None


class BatchBody(BaseModel):
    requests: list[EncodeBody]


class ModelRuntime:
    """Owns the model and tokenizer; serializes forward passes."""

    def __init__(
        self,
        model_path: str,
        *,
        device: str = "cpu",
        default_layer: int | None = None,
        max_batch: int = 32,
        add_prefix_space: bool = False,
    ):
        self.name = str(model_path)
        self.tokenizer = AutoTokenizer.from_pretrained(model_path)
        if self.tokenizer.mask_token_id is None:
            raise ValueError(f"model {model_path} has no mask token")
        self.model = AutoModel.from_pretrained(model_path).to(device).eval()
        self.device = device
        self.max_batch = max(1, max_batch)
        self.add_prefix_space = add_prefix_space
        config = self.model.config
        self.dim = config.hidden_size
        self.num_layers = config.num_hidden_layers
        self.default_layer = self.num_layers if default_layer is None else default_layer
        self._cls = self.tokenizer.cls_token_id
        self._sep = self.tokenizer.sep_token_id
        self._offset = 1 if self._cls is not None else 0
        specials = (1 if self._cls is not None else 0) + (1 if self._sep is not None else 0)
        self.max_pieces = min(config.max_position_embeddings - specials, 512)
        self._lock = threading.Lock()

    def descriptor(self) -> dict:
        return {
            "name": self.name,
            "dim": self.dim,
            "mask_piece": self.tokenizer.mask_token,
            "max_pieces": self.max_pieces,
        }

    def tokenize(self, words: list[str]) -> list[list[str]]:
        out = []
        for word in words:
            if not word:
                raise HTTPException(400, "cannot tokenize an empty word")
            text = " " + word if self.add_prefix_space else word
            pieces = self.tokenizer.tokenize(text)
            out.append(pieces if pieces else [self.tokenizer.unk_token])
        return out

    def _resolve_layer(self, layer: int | None) -> int:
        resolved = self.default_layer if layer is None else layer
        if not (0 <= resolved <= self.num_layers):
            raise HTTPException(
                400, f"layer {resolved} out of range [0, {self.num_layers}]"
            )
        return resolved

    def _validate(self, body: EncodeBody) -> None:
        n = len(body.pieces)
        if n == 0 or not body.want:
            raise HTTPException(400, "need at least one piece and one wanted index")
        if n > self.max_pieces:
            raise HTTPException(413, f"{n} pieces exceeds limit {self.max_pieces}")
        if any(not (0 <= i < n) for i in body.masked):
            raise HTTPException(400, "masked index out of range")
        if any(not (0 <= i < n) for i in body.want):
            raise HTTPException(400, "want index out of range")

    def encode_many(self, bodies: list[EncodeBody]) -> list[dict]:
        for body in bodies:
            self._validate(body)
        layers = [self._resolve_layer(body.layer) for body in bodies]
        results: list[dict] = []
        for start in range(0, len(bodies), self.max_batch):
            chunk = bodies[start : start + self.max_batch]
            chunk_layers = layers[start : start + self.max_batch]
            results.extend(self._forward_chunk(chunk, chunk_layers))
        return results

    def _forward_chunk(self, bodies: list[EncodeBody], layers: list[int]) -> list[dict]:
        mask_id = self.tokenizer.mask_token_id
        pad_id = self.tokenizer.pad_token_id or 0
        rows = []
        for body in bodies:
            ids = self.tokenizer.convert_tokens_to_ids(body.pieces)
            masked = set(body.masked)
            ids = [mask_id if i in masked else tid for i, tid in enumerate(ids)]
            if self._cls is not None:
                ids = [self._cls] + ids
            if self._sep is not None:
                ids = ids + [self._sep]
            rows.append(ids)
        width = max(len(r) for r in rows)
        input_ids = torch.full((len(rows), width), pad_id, dtype=torch.long)
        attention = torch.zeros((len(rows), width), dtype=torch.long)
        for i, row in enumerate(rows):
            input_ids[i, : len(row)] = torch.tensor(row, dtype=torch.long)
            attention[i, : len(row)] = 1
        try:
            with self._lock, torch.no_grad():
                output = self.model(
                    input_ids=input_ids.to(self.device),
                    attention_mask=attention.to(self.device),
                    output_hidden_states=True,
                )
        except Exception as exc:  # surfaced as a model failure
            raise HTTPException(500, f"model forward failed: {exc}") from exc
        hidden = output.hidden_states
        results = []
        for i, (body, layer) in enumerate(zip(bodies, layers)):
            states = hidden[layer][i]
            vectors = {
                str(idx): [float(x) for x in states[self._offset + idx]]
                for idx in sorted(set(body.want))
            }
            results.append({"dim": self.dim, "vectors": vectors})
        return results


def create_app(runtime: ModelRuntime) -> FastAPI:
    app = FastAPI(title="phrasemine encoder service")

    @app.exception_handler(RequestValidationError)
    async def malformed(_request, exc):  # wire contract says 400, not 422
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.post("/descriptor")
    def descriptor() -> dict:
        return runtime.descriptor()

    @app.post("/tokenize")
    def tokenize(body: TokenizeBody) -> dict:
        return {"pieces": runtime.tokenize(body.words)}

    @app.post("/encode")
    def encode(body: EncodeBody) -> dict:
        return runtime.encode_many([body])[0]

    @app.post("/encode_batch")
    def encode_batch(body: BatchBody) -> dict:
        return {"results": runtime.encode_many(body.requests)}

    return app


@click.group()
def cli() -> None:
    """Masked-LM encoder service."""


@cli.command()
@click.option("--model", "model_path", required=True, help="Model id or checkpoint directory.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8230, show_default=True)
@click.option("--device", default="cpu", show_default=True)
@click.option("--layer", type=int, default=None, help="Default hidden layer (default: last).")
@click.option("--max-batch", type=int, default=32, show_default=True)
@click.option("--add-prefix-space", is_flag=True, help="Prepend a space before tokenizing words (byte-level BPE vocabularies).")
def serve(model_path, host, port, device, layer, max_batch, add_prefix_space) -> None:
    """Load the model and serve the encoder wire protocol."""
    runtime = ModelRuntime(
        model_path,
        device=device,
        default_layer=layer,
        max_batch=max_batch,
        add_prefix_space=add_prefix_space,
    )
    uvicorn.run(create_app(runtime), host=host, port=port, log_level="info")


@cli.command("make-tiny")
@click.option("--output", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=7, show_default=True)
def make_tiny(out_dir, seed) -> None:
    """Write a small randomly initialized checkpoint for offline testing."""
    from .tiny import build_tiny_masked_lm

    path = build_tiny_masked_lm(out_dir, seed=seed)
    click.echo(f"tiny masked LM written to {path}")


def entrypoint() -> None:
    cli()


if __name__ == "__main__":
    entrypoint()
