#!/usr/bin/env python3
"""Convert a PyTorch MAE/ViT state dict into an imloc checkpoint directory.

Usage: convert_mae_weights.py mae_pretrain_vit_base.pth out_dir

Every tensor is written as raw little-endian float32; names are kept, so
`imloc train --pretrained out_dir` picks up patch_embed.*, pos_embed,
blocks.* and norm.* and reports the rest (cls_token, decoder_*) as unused.
"""

import argparse
import json
import pathlib

import numpy as np
import torch


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("weights", type=pathlib.Path)
    ap.add_argument("out", type=pathlib.Path)
    args = ap.parse_args()

    state = torch.load(args.weights, map_location="cpu")
    if isinstance(state, dict) and "model" in state:
        state = state["model"]

    (args.out / "tensors").mkdir(parents=True, exist_ok=True)
    index = []
    for name, value in state.items():
        if not torch.is_tensor(value) or not value.is_floating_point():
            continue
        arr = value.detach().to(torch.float32).contiguous().numpy().astype("<f4")
        rel = f"tensors/{name}.f32"
        arr.tofile(args.out / rel)
        index.append({"name": name, "shape": list(arr.shape), "file": rel, "dtype": "float32"})

    meta = {"format": "imloc-checkpoint", "version": 1, "source": str(args.weights), "tensors": index}
    (args.out / "metadata.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(f"wrote {len(index)} tensors to {args.out}")


if __name__ == "__main__":
    main()
