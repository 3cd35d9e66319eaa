"""Encoder-decoder finetuning behind the external trainer file protocol.

The shim is deliberately independent of the pipeline package: it only reads
train_job.json, the referenced JSONL data files, and predict input files, and
it only writes the artifact directory, artifact.json, and predict outputs.

Every task is treated as text-to-text. When the job's base model id resolves
to a local directory it is loaded from there; any other id falls back to a
tiny randomly initialized byte-level T5 so the protocol stays exercisable
offline (weights download is out of scope here).
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

import torch
from transformers import (
    AutoModelForSeq2SeqLM,
    AutoTokenizer,
    ByT5Tokenizer,
    T5Config,
    T5ForConditionalGeneration,
)

TINY_VOCAB = 384  # 256 bytes + 3 specials + 125 sentinel ids


@dataclass(frozen=True)
class ShimConfig:
    base_model_id: str = "tiny-random-byt5"
    device: str = "cpu"
    max_source_length: int = 512
    max_target_length: int = 128

    def __post_init__(self) -> None:
        if self.max_source_length < 1 or self.max_target_length < 1:
            raise ValueError("lengths must be positive")

    @classmethod
    def from_env(cls, base_model_id: str) -> "ShimConfig":
        return cls(
            base_model_id=base_model_id,
            device=os.environ.get("SHIM_DEVICE", "cpu"),
            max_source_length=int(os.environ.get("SHIM_MAX_SOURCE_LEN", "512")),
            max_target_length=int(os.environ.get("SHIM_MAX_TARGET_LEN", "128")),
        )


def read_pairs(path: Path) -> list[tuple[str, str]]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            pairs.append((record.get("input", ""), record.get("output", "")))
    return pairs


def resolve_device(hint: str) -> torch.device:
    if hint.startswith("cuda") and torch.cuda.is_available():
        return torch.device(hint)
    return torch.device("cpu")


def load_base_model(config: ShimConfig, seed: int):
    """Local directory when the id points at one, tiny random model otherwise."""
    base = Path(config.base_model_id)
    if base.is_dir():
        tokenizer = AutoTokenizer.from_pretrained(str(base))
        model = AutoModelForSeq2SeqLM.from_pretrained(str(base))
        return tokenizer, model
    torch.manual_seed(seed)
    tokenizer = ByT5Tokenizer()
    model_config = T5Config(
        vocab_size=TINY_VOCAB, d_model=64, d_ff=128, d_kv=16,
        num_layers=2, num_heads=4, dropout_rate=0.0,
        decoder_start_token_id=0, pad_token_id=0, eos_token_id=1,
    )
    return tokenizer, T5ForConditionalGeneration(model_config)


def _artifact_id(job: dict) -> str:
    record = dict(job)
    for key in ("train_path", "val_path"):
        if record.get(key):
            record[key] = Path(record[key]).name
    digest = hashlib.sha256(json.dumps(record, sort_keys=True).encode()).hexdigest()[:12]
    return f"artifact-{digest}"


def run_train(job_path: Path) -> Path:
    """Finetune per the job manifest; returns the artifact.json path."""
    job = json.loads(job_path.read_text(encoding="utf-8"))
    hp = job.get("hyperparameters", {})
    learning_rate = float(hp.get("learning_rate", 5e-5))
    epochs = int(hp.get("epochs", 3))
    batch_size = int(hp.get("batch_size", 16))
    seed = int(job.get("seed", 0))
    config = ShimConfig.from_env(job.get("base_model_id", "tiny-random-byt5"))

    pairs = read_pairs(Path(job["train_path"]))
    if not pairs:
        raise ValueError("train set is empty")

    device = resolve_device(config.device)
    tokenizer, model = load_base_model(config, seed)
    model.to(device)
    torch.manual_seed(seed)

    sources = [source for source, _ in pairs]
    targets = [target for _, target in pairs]
    encoded = tokenizer(sources, padding=True, truncation=True,
                        max_length=config.max_source_length, return_tensors="pt")
    labels_enc = tokenizer(targets, padding=True, truncation=True,
                           max_length=config.max_target_length, return_tensors="pt")
    labels = labels_enc.input_ids.clone()
    labels[labels == tokenizer.pad_token_id] = -100

    truncated = sum(
        1 for source in sources
        if len(tokenizer(source).input_ids) > config.max_source_length
    ) + sum(
        1 for target in targets
        if len(tokenizer(target).input_ids) > config.max_target_length
    )

    optimizer = torch.optim.AdamW(model.parameters(), lr=learning_rate)
    model.train()
    loss_curve = []
    # batch order stays fixed across epochs so a zero learning rate provably
    # produces a flat curve
    for epoch in range(epochs):
        total_loss = 0.0
        batches = 0
        for start in range(0, len(pairs), batch_size):
            stop = start + batch_size
            output = model(
                input_ids=encoded.input_ids[start:stop].to(device),
                attention_mask=encoded.attention_mask[start:stop].to(device),
                labels=labels[start:stop].to(device),
            )
            output.loss.backward()
            optimizer.step()
            optimizer.zero_grad()
            total_loss += output.loss.item()
            batches += 1
        loss_curve.append({"epoch": epoch, "avg_loss": total_loss / batches,
                           "batches": batches})

    artifact_dir = job_path.parent / "artifact"
    artifact_dir.mkdir(exist_ok=True)
    model.save_pretrained(str(artifact_dir))
    tokenizer.save_pretrained(str(artifact_dir))
    (artifact_dir / "shim_config.json").write_text(json.dumps({
        "max_source_length": config.max_source_length,
        "max_target_length": config.max_target_length,
        "base_model_id": config.base_model_id,
        "seed": seed,
    }, indent=2) + "\n", encoding="utf-8")
    log_path = artifact_dir / "loss_curve.jsonl"
    with open(log_path, "w", encoding="utf-8") as fh:
        for entry in loss_curve:
            fh.write(json.dumps(entry) + "\n")
        fh.write(json.dumps({"truncated_examples": truncated,
                             "train_examples": len(pairs)}) + "\n")

    artifact_json = job_path.parent / "artifact.json"
    artifact_json.write_text(json.dumps({
        "status": "ok",
        "artifact_id": _artifact_id(job),
        "artifact_path": str(artifact_dir),
        "log_path": str(log_path),
        "backend_kind": "external",
        "storage_path": str(artifact_dir),
        "predict_concurrency": 1,
    }, indent=2) + "\n", encoding="utf-8")
    return artifact_json


def run_predict(artifact_dir: Path, inputs_path: Path, outputs_path: Path) -> None:
    """Greedy decoding over the input lines; one output object per line."""
    shim_config = json.loads((artifact_dir / "shim_config.json").read_text())
    tokenizer = AutoTokenizer.from_pretrained(str(artifact_dir))
    model = AutoModelForSeq2SeqLM.from_pretrained(str(artifact_dir))
    model.eval()

    inputs = []
    with open(inputs_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            inputs.append(record["input"] if isinstance(record, dict) else str(record))

    outputs = []
    batch_size = 16
    with torch.no_grad():
        for start in range(0, len(inputs), batch_size):
            chunk = inputs[start:start + batch_size]
            encoded = tokenizer(chunk, padding=True, truncation=True,
                                max_length=shim_config["max_source_length"],
                                return_tensors="pt")
            generated = model.generate(
                input_ids=encoded.input_ids,
                attention_mask=encoded.attention_mask,
                max_new_tokens=shim_config["max_target_length"],
                num_beams=1, do_sample=False,
            )
            outputs.extend(tokenizer.batch_decode(generated, skip_special_tokens=True))

    with open(outputs_path, "w", encoding="utf-8", newline="\n") as fh:
        for text in outputs:
            fh.write(json.dumps({"output": text}, ensure_ascii=False) + "\n")
