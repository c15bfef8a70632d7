"""Checkpoint persistence: plain-text manifest plus one raw file per tensor.

Tensor files hold an 8-byte little-endian value count followed by the values
as little-endian float32, row-major. The manifest records the probe sentence
and its emission bytes as computed from the stored (rounded) parameters, so
a reload must reproduce them bit for bit.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from .crf import CrfParams, N_LABELS, N_STATES
from .data import SENTINEL, UNK, EmbeddingTable, Vocab
from .encoder import DirectionParams
from .errors import CheckpointError, UsageError
from .model import SegmenterModel, prepare_lexicon
from .tensor import Tensor, param

FORMAT = "latseg-ckpt-v1"
MANIFEST = "manifest.txt"
TENSOR_SUFFIX = ".f32"


def _write_tensor(path: Path, data: np.ndarray) -> None:
    flat = np.ascontiguousarray(data, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(np.uint64(flat.size).astype("<u8").tobytes())
        fh.write(flat.tobytes())


def _read_tensor(path: Path, shape: tuple[int, ...], dtype) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(8)
        if len(head) != 8:
            raise CheckpointError(f"{path}: truncated tensor file")
        count = int(np.frombuffer(head, dtype="<u8")[0])
        body = np.frombuffer(fh.read(), dtype="<f4")
    expected = int(np.prod(shape)) if shape else 1
    if count != body.size or count != expected:
        raise CheckpointError(
            f"{path}: expected {expected} values, header says {count}, file has {body.size}"
        )
    return body.reshape(shape).astype(dtype)


def _write_vocab(path: Path, vocab: Vocab) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sym in vocab.symbols():
            fh.write(sym + "\n")


def _read_vocab(path: Path, expected_size: int) -> Vocab:
    with open(path, encoding="utf-8") as fh:
        symbols = [line.rstrip("\n") for line in fh]
    if len(symbols) < 2 or symbols[0] != UNK or symbols[1] != SENTINEL:
        raise CheckpointError(f"{path}: missing reserved vocabulary entries")
    vocab = Vocab.from_symbols(symbols[2:])
    if len(vocab) != expected_size:
        raise CheckpointError(
            f"{path}: manifest declares {expected_size} symbols, file has {len(vocab)}"
        )
    return vocab


def _manifest_lines(model: SegmenterModel, dtype_name: str) -> list[str]:
    lines = [
        f"format={FORMAT}",
        f"mode={model.mode}",
        f"hidden={model.hidden}",
        f"unigram_dim={model.unigram_table.dim}",
        f"bigram_dim={model.bigram_table.dim}",
        f"lexicon_dim={model.lexicon_table.dim if model.lexicon_table else 0}",
        f"char_dropout={model.char_dropout}",
        f"lattice_dropout={model.lattice_dropout}",
        f"max_word_len={model.max_word_len or 0}",
        f"dtype={dtype_name}",
        f"unigram_vocab_size={len(model.unigram_table.vocab)}",
        f"bigram_vocab_size={len(model.bigram_table.vocab)}",
        f"lexicon_vocab_size={len(model.lexicon_table.vocab) if model.lexicon_table else 0}",
    ]
    for p in model.parameters():
        shape = "x".join(str(d) for d in p.data.shape)
        lines.append(f"tensor={p.name}:{shape}")
    return lines


def save_checkpoint(model: SegmenterModel, out_dir, probe_chars: str) -> None:
    """Write vocabularies, tensors, and a manifest with a verification probe."""
    if not probe_chars:
        raise UsageError("checkpoint probe sentence must be non-empty")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dtype_name = np.dtype(model.unigram_table.rows.data.dtype).name

    _write_vocab(out / "unigram.vocab", model.unigram_table.vocab)
    _write_vocab(out / "bigram.vocab", model.bigram_table.vocab)
    if model.lexicon_table is not None:
        _write_vocab(out / "lexicon.vocab", model.lexicon_table.vocab)
    for p in model.parameters():
        _write_tensor(out / f"{p.name}{TENSOR_SUFFIX}", p.data)

    lines = _manifest_lines(model, dtype_name)
    (out / MANIFEST).write_text("\n".join(lines) + "\n", encoding="utf-8")

    # The probe is computed from the reloaded (float32-rounded) parameters:
    # exactly what any future load will reconstruct.
    reloaded = load_checkpoint(out, verify=False)
    probe = reloaded.emission_matrix(tuple(probe_chars)).astype("<f4")
    lines.append(f"probe_chars={probe_chars}")
    lines.append(f"probe_emissions={probe.tobytes().hex()}")
    (out / MANIFEST).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_manifest(path: Path) -> tuple[dict[str, str], list[tuple[str, tuple[int, ...]]]]:
    values: dict[str, str] = {}
    tensors: list[tuple[str, tuple[int, ...]]] = []
    for raw in path.read_text(encoding="utf-8").splitlines():
        if not raw:
            continue
        key, _, val = raw.partition("=")
        if key == "tensor":
            name, _, shape = val.partition(":")
            tensors.append((name, tuple(int(d) for d in shape.split("x"))))
        else:
            values[key] = val
    return values, tensors


def load_checkpoint(ckpt_dir, verify: bool = True) -> SegmenterModel:
    """Rebuild a model from disk; optionally verify the manifest probe."""
    ckpt = Path(ckpt_dir)
    manifest = ckpt / MANIFEST
    if not manifest.is_file():
        raise CheckpointError(f"{ckpt}: no {MANIFEST}")
    values, tensor_list = _parse_manifest(manifest)
    if values.get("format") != FORMAT:
        raise CheckpointError(f"{ckpt}: unsupported format {values.get('format')!r}")

    listed = {name for name, _ in tensor_list}
    present = {f.name[: -len(TENSOR_SUFFIX)] for f in ckpt.glob(f"*{TENSOR_SUFFIX}")}
    if listed != present:
        raise CheckpointError(
            f"{ckpt}: manifest tensors {sorted(listed)} do not match files {sorted(present)}"
        )

    dtype = np.dtype(values["dtype"])
    arrays: dict[str, Tensor] = {}
    for name, shape in tensor_list:
        arrays[name] = param(_read_tensor(ckpt / f"{name}{TENSOR_SUFFIX}", shape, dtype), name)

    mode = values["mode"]
    hidden = int(values["hidden"])
    u_dim, b_dim, l_dim = (int(values[k]) for k in ("unigram_dim", "bigram_dim", "lexicon_dim"))
    uvocab = _read_vocab(ckpt / "unigram.vocab", int(values["unigram_vocab_size"]))
    bvocab = _read_vocab(ckpt / "bigram.vocab", int(values["bigram_vocab_size"]))
    unigram_table = EmbeddingTable(uvocab, arrays["unigram_embeddings"], u_dim)
    bigram_table = EmbeddingTable(bvocab, arrays["bigram_embeddings"], b_dim)

    lexicon_table = trie = None
    if mode != "baseline":
        lvocab = _read_vocab(ckpt / "lexicon.vocab", int(values["lexicon_vocab_size"]))
        trie, rebuilt = prepare_lexicon(lvocab.symbols()[2:])
        if rebuilt.symbols() != lvocab.symbols():
            raise CheckpointError(f"{ckpt}: lexicon vocabulary is not trie-consistent")
        lexicon_table = EmbeddingTable(lvocab, arrays["lexicon_embeddings"], l_dim)

    def direction(name: str) -> DirectionParams:
        p = DirectionParams(
            hidden=hidden,
            gates_w=arrays[f"{name}_gates_w"],
            gates_b=arrays[f"{name}_gates_b"],
        )
        if mode != "baseline":
            p.shortcut_w = arrays[f"{name}_shortcut_w"]
            p.shortcut_b = arrays[f"{name}_shortcut_b"]
            p.match_gate_w = arrays[f"{name}_match_gate_w"]
            p.match_gate_b = arrays[f"{name}_match_gate_b"]
        return p

    crf_params = CrfParams(
        emit_w=arrays["crf_emit_w"],
        emit_b=arrays["crf_emit_b"],
        transitions=arrays["crf_transitions"],
    )
    if crf_params.emit_w.data.shape != (N_LABELS, 2 * hidden) or crf_params.transitions.data.shape != (
        N_STATES,
        N_STATES,
    ):
        raise CheckpointError(f"{ckpt}: CRF tensor shapes do not match hidden={hidden}")

    max_len = int(values.get("max_word_len", "0")) or None
    model = SegmenterModel(
        mode,
        unigram_table,
        bigram_table,
        direction("fwd"),
        direction("bwd"),
        crf_params,
        lexicon_table=lexicon_table,
        trie=trie,
        char_dropout=float(values["char_dropout"]),
        lattice_dropout=float(values["lattice_dropout"]),
        max_word_len=max_len,
    )

    if verify and "probe_emissions" in values:
        probe = model.emission_matrix(tuple(values.get("probe_chars", ""))).astype("<f4")
        if probe.tobytes().hex() != values["probe_emissions"]:
            raise CheckpointError(f"{ckpt}: probe forward pass does not match manifest")
    return model


def save_train_words(words: Sequence[str], ckpt_dir) -> None:
    path = Path(ckpt_dir) / "train_words.txt"
    with open(path, "w", encoding="utf-8") as fh:
        for w in sorted(words):
            fh.write(w + "\n")


def load_train_words(ckpt_dir) -> set[str]:
    path = Path(ckpt_dir) / "train_words.txt"
    if not path.is_file():
        return set()
    with open(path, encoding="utf-8") as fh:
        return {line.rstrip("\n") for line in fh if line.rstrip("\n")}
