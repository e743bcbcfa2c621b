#!/usr/bin/env python3
"""Export the three CNN backbones to ONNX for the feature extractor.

Writes `mobilenet.onnx`, `resnet50.onnx`, and `efficientnetb3.onnx` into
--out-dir, each truncated to its last convolutional feature map (no global
pooling, no classifier head), which is exactly the surface `blockage
extract` consumes:

    mobilenet        224x224 in -> 1024 x 7 x 7   (50176 features)
    resnet50         224x224 in -> 2048 x 7 x 7   (100352 features)
    efficientnetb3   300x300 in -> 1536 x 10 x 10 (153600 features)

Also writes `resnet50_pooled.onnx`, a deliberately wrong export (global
average pooling left in, 2048-wide output) for exercising the loader's
width validation.

Weights default to random initialization so the export is hermetic; pass
--pretrained to pull torchvision's trained weights if the environment has
access to them.
"""

import argparse
import warnings
from pathlib import Path

import torch
from torch import nn
import torchvision.models as tvm

try:
    import onnx  # noqa: F401  (used implicitly by torch.onnx's final merge step)
except ImportError:
    # The TorchScript exporter serializes the model itself; the `onnx`
    # wheel is only consulted to merge in custom onnxscript functions,
    # of which these exports have none. Skip that step when the wheel
    # is unavailable so the script works in hermetic environments.
    from torch.onnx._internal.torchscript_exporter import onnx_proto_utils

    onnx_proto_utils._add_onnxscript_fn = lambda model_bytes, custom_opsets: model_bytes


class MobileNetV1Features(nn.Module):
    """MobileNet (v1) feature stack: depthwise-separable convolutions down
    to a 1024-channel 7x7 map at 224x224 input."""

    def __init__(self):
        super().__init__()

        def conv_bn(cin, cout, stride):
            return nn.Sequential(
                nn.Conv2d(cin, cout, 3, stride, 1, bias=False),
                nn.BatchNorm2d(cout),
                nn.ReLU(inplace=True),
            )

        def conv_dw(cin, cout, stride):
            return nn.Sequential(
                nn.Conv2d(cin, cin, 3, stride, 1, groups=cin, bias=False),
                nn.BatchNorm2d(cin),
                nn.ReLU(inplace=True),
                nn.Conv2d(cin, cout, 1, 1, 0, bias=False),
                nn.BatchNorm2d(cout),
                nn.ReLU(inplace=True),
            )

        self.features = nn.Sequential(
            conv_bn(3, 32, 2),
            conv_dw(32, 64, 1),
            conv_dw(64, 128, 2),
            conv_dw(128, 128, 1),
            conv_dw(128, 256, 2),
            conv_dw(256, 256, 1),
            conv_dw(256, 512, 2),
            *[conv_dw(512, 512, 1) for _ in range(5)],
            conv_dw(512, 1024, 2),
            conv_dw(1024, 1024, 1),
        )

    def forward(self, x):
        return self.features(x)


def resnet50_features(pretrained: bool) -> nn.Module:
    weights = tvm.ResNet50_Weights.DEFAULT if pretrained else None
    model = tvm.resnet50(weights=weights)
    # Keep everything up to and including layer4; drop avgpool + fc.
    return nn.Sequential(*list(model.children())[:-2])


def efficientnetb3_features(pretrained: bool) -> nn.Module:
    weights = tvm.EfficientNet_B3_Weights.DEFAULT if pretrained else None
    return tvm.efficientnet_b3(weights=weights).features


def export(model: nn.Module, side: int, path: Path) -> tuple[int, ...]:
    model.eval()
    dummy = torch.zeros(1, 3, side, side)
    with torch.no_grad():
        shape = tuple(model(dummy).shape)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        torch.onnx.export(
            model,
            dummy,
            str(path),
            input_names=["input"],
            output_names=["features"],
            opset_version=13,
            dynamo=False,
        )
    return shape


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", type=Path, default=Path("models"))
    parser.add_argument("--pretrained", action="store_true",
                        help="use torchvision's trained weights (needs download access)")
    args = parser.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)

    torch.manual_seed(0)
    plan = [
        ("mobilenet.onnx", MobileNetV1Features(), 224),
        ("resnet50.onnx", resnet50_features(args.pretrained), 224),
        ("efficientnetb3.onnx", efficientnetb3_features(args.pretrained), 300),
        (
            "resnet50_pooled.onnx",
            nn.Sequential(
                resnet50_features(args.pretrained),
                nn.AdaptiveAvgPool2d(1),
                nn.Flatten(),
            ),
            224,
        ),
    ]
    for name, model, side in plan:
        path = args.out_dir / name
        shape = export(model, side, path)
        flat = 1
        for d in shape[1:]:
            flat *= d
        print(f"{path}  input {side}x{side}  output {shape}  ({flat} per image)")


if __name__ == "__main__":
    main()
