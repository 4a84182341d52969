#!/usr/bin/env python3
# Copyright 2026 The usfl Authors
# SPDX-License-Identifier: Apache-2.0
"""Generate the bundled ResNet-18 / CIFAR-10 partition profile.

Each of the 18 partition units carries its geometry; FLOPs are counted as
2*K*K*Cin*Cout*H*W for convolutions, K*K*out for max-pooling, in-elements for
average pooling and 2*in*out for the classifier. Backward is 2x forward.
Activations are fp32.
"""
import json
import sys

INPUT = (3, 32, 32)
BYTES = 4


def conv(name, k, cin, cout, hw, stride=1):
    return dict(name=name, kind="conv", kernel=k, in_channels=cin,
                out_channels=cout, out_height=hw, out_width=hw, stride=stride)


def units():
    u = [conv("stem.conv", 3, 3, 64, 32),
         dict(name="stem.maxpool", kind="maxpool", kernel=2, in_channels=64,
              out_channels=64, out_height=16, out_width=16, stride=2),
         conv("stage1.down", 3, 64, 128, 8, 2),
         conv("stage2.down", 3, 128, 256, 4, 2)]
    u += [conv(f"stage2.conv{i}", 3, 256, 256, 4) for i in range(1, 5)]
    u.append(conv("stage3.down", 3, 256, 512, 2, 2))
    u.append(conv("stage4.down", 3, 512, 512, 1, 2))
    u += [conv(f"stage4.conv{i}", 3, 512, 512, 1) for i in range(1, 7)]
    u.append(dict(name="head.avgpool", kind="avgpool", kernel=1, in_channels=512,
                  out_channels=512, out_height=1, out_width=1, stride=1))
    u.append(dict(name="head.fc", kind="fc", kernel=1, in_channels=512,
                  out_channels=10, out_height=1, out_width=1, stride=1))
    assert len(u) == 18
    return u


def forward_flops(g):
    out = g["out_channels"] * g["out_height"] * g["out_width"]
    if g["kind"] == "conv":
        return 2 * g["kernel"] ** 2 * g["in_channels"] * out
    if g["kind"] == "maxpool":
        return g["kernel"] ** 2 * out
    if g["kind"] == "avgpool":
        return g["in_channels"]
    return 2 * g["in_channels"] * g["out_channels"]


SCORES = [0.22, 0.35, 0.52, 0.61, 0.60, 0.63, 0.66, 0.69, 0.74,
          0.78, 0.81, 0.84, 0.87, 0.90, 0.92, 0.95, 0.97, 1.00]


def main():
    layers = []
    prev_bytes = INPUT[0] * INPUT[1] * INPUT[2] * BYTES
    for i, g in enumerate(units(), start=1):
        ff = forward_flops(g)
        out_bytes = g["out_channels"] * g["out_height"] * g["out_width"] * BYTES
        geometry = {k: g[k] for k in ("kind", "kernel", "in_channels", "out_channels",
                                      "out_height", "out_width", "stride")}
        layers.append(dict(index=i, name=g["name"], flops_forward=ff,
                           flops_backward=2 * ff, output_bytes_forward=out_bytes,
                           grad_bytes_backward=prev_bytes,
                           semantic_score=SCORES[i - 1], geometry=geometry))
        prev_bytes = out_bytes
    profile = dict(
        schema_version=1,
        name="resnet18-cifar10",
        description="ResNet-18-width partition chain for 32x32x3 CIFAR-10 input, "
                    "fp32 activations, per-sample FLOPs and bytes",
        input_bytes=INPUT[0] * INPUT[1] * INPUT[2] * BYTES,
        total_layers=len(layers),
        layers=layers,
        sae=dict(encode_flops=2.0e6, decode_flops=2.0e6,
                 encoded_bytes_at={"1": 16384, "2": 16384, "3": 16384, "4": 12288}),
        allowed_split_pairs=[[1, 6], [1, 7], [1, 8], [1, 9], [2, 7], [2, 8],
                             [2, 9], [3, 8], [3, 9], [4, 9]],
        default_split=[4, 9],
    )
    json.dump(profile, sys.stdout, indent=2)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
