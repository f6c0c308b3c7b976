"""One-shot exporter: conv weights of a torchvision model into a tensor archive.

Archive layout (shared interface with the analysis package): 8-byte
little-endian header length, UTF-8 JSON header mapping tensor name to
{"dtype": "F32", "shape", "data_offsets"} plus a "__metadata__" object with
"layer_order" (conv module names in forward order) and "model_id"; then the
raw float32 payload, row-major little-endian. Only square 4-axis
[out, in, k, k] convolution weights are exported -- no biases, no
normalization parameters.
"""
from __future__ import annotations

import argparse
import json
import struct
import sys
from pathlib import Path

import numpy as np

SUPPORTED_MODELS = ("alexnet", "resnet50", "vgg16")


class ExportError(Exception):
    pass


def load_model(model_id: str, pretrained: bool = True):
    if model_id not in SUPPORTED_MODELS:
        raise ExportError(
            f"unknown model id {model_id!r}; supported: {', '.join(SUPPORTED_MODELS)}"
        )
    from torchvision import models

    builder = getattr(models, model_id)
    try:
        return builder(weights="IMAGENET1K_V1" if pretrained else None)
    except Exception as exc:  # checkpoint download/read failure
        raise ExportError(f"could not load weights for {model_id!r}: {exc}") from exc


def collect_conv_weights(model) -> list[tuple[str, np.ndarray]]:
    """(module name, [out, in, k, k] float32 weights) for every square Conv2d,
    in registration (forward) order."""
    import torch.nn as nn

    entries = []
    for name, module in model.named_modules():
        if not isinstance(module, nn.Conv2d):
            continue
        weights = module.weight.detach().cpu().numpy()
        if weights.ndim == 4 and weights.shape[2] == weights.shape[3]:
            entries.append((name, np.ascontiguousarray(weights, dtype="<f4")))
    return entries


def write_tensor_archive(path, entries: list[tuple[str, np.ndarray]], model_id: str) -> None:
    header: dict = {
        "__metadata__": {"layer_order": [name for name, _ in entries], "model_id": model_id}
    }
    blobs = []
    offset = 0
    for name, weights in entries:
        blob = weights.tobytes()
        header[f"{name}.weight"] = {
            "dtype": "F32",
            "shape": list(weights.shape),
            "data_offsets": [offset, offset + len(blob)],
        }
        offset += len(blob)
        blobs.append(blob)
    payload = json.dumps(header, separators=(",", ":"), ensure_ascii=True).encode("utf-8")
    Path(path).write_bytes(struct.pack("<Q", len(payload)) + payload + b"".join(blobs))


def export_model(model, model_id: str, out_path) -> int:
    entries = collect_conv_weights(model)
    if not entries:
        raise ExportError(f"model {model_id!r} has no square 2D convolution weights")
    write_tensor_archive(out_path, entries, model_id)
    return len(entries)


def export(model_id: str, out_path, pretrained: bool = True) -> int:
    return export_model(load_model(model_id, pretrained), model_id, out_path)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="convexport")
    sub = parser.add_subparsers(dest="command", required=True)
    exp = sub.add_parser("export", help="write a model's conv weights into a tensor archive")
    exp.add_argument("model_id", help=f"one of: {', '.join(SUPPORTED_MODELS)}")
    exp.add_argument("out_path", type=Path)
    exp.add_argument(
        "--random-init",
        action="store_true",
        help="export freshly initialized weights instead of the pretrained checkpoint",
    )
    ns = parser.parse_args(argv)

    if ns.model_id not in SUPPORTED_MODELS:
        print(
            f"error: unknown model id {ns.model_id!r}; supported: {', '.join(SUPPORTED_MODELS)}",
            file=sys.stderr,
        )
        return 2
    try:
        count = export(ns.model_id, ns.out_path, pretrained=not ns.random_init)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {count} conv weight tensors to {ns.out_path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
