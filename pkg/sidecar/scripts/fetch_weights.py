#!/usr/bin/env python3
"""Fetch backbone weights for the sidecar.

The repo ships no weights. This script downloads the torchvision DenseNet-121
ImageNet checkpoint and saves it as a plain state-dict file the sidecar can
load. If you have the fine-tuned gaming-quality checkpoint, pass it through
--from-checkpoint instead; it must be a DenseNet-121 state dict.

Usage:
    python scripts/fetch_weights.py --out weights/densenet121.pt
    python scripts/fetch_weights.py --out weights/ndnetgaming.pt \
        --from-checkpoint /path/to/finetuned.pt
"""

import argparse
import os

import torch
from torchvision.models import DenseNet121_Weights, densenet121


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="output state-dict path")
    parser.add_argument(
        "--from-checkpoint",
        default=None,
        help="use an existing DenseNet-121 state dict instead of downloading",
    )
    args = parser.parse_args()

    if args.from_checkpoint:
        state = torch.load(args.from_checkpoint, map_location="cpu", weights_only=True)
        net = densenet121(weights=None)
        net.load_state_dict(state)  # validate architecture before re-saving
    else:
        net = densenet121(weights=DenseNet121_Weights.IMAGENET1K_V1)
        state = net.state_dict()

    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    torch.save(state, args.out)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
