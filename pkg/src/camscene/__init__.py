"""Camera scene classification toolchain.

From-scratch NHWC inference runtime for the two MobileNet-based 30-category
scene classifiers, a binary model format (CSDM), a post-training INT8
quantizer, an accuracy/benchmark harness and a CLI.
"""

from .csdm import inspect, load_model, save_model
from .evalbench import (BenchReport, EvalReport, LabeledDataset, benchmark,
                        evaluate, load_dataset, split_dataset, topk_accuracy)
from .graph import (Model, ScenePrediction, build_mobilenet_v1_classifier,
                    build_mobilenet_v2_classifier, infer,
                    random_parameter_bundle, validate)
from .image import RawImage, decode_image, load_image, preprocess, resize_bilinear
from .labels import CATEGORIES, LABELS, NUM_CATEGORIES, SLUGS
from .ops import (ActivationKind, BatchNormParams, ConvSpec, Padding,
                  apply_activation, conv2d, depthwise_conv2d, fold_batchnorm,
                  fully_connected, global_avg_pool, inverted_residual)
from .quantize import CalibrationStats, calibrate, quantize_model
from .tensor import QuantParams, Shape, Tensor, dequantize_tensor, quantize_tensor

__version__ = "0.1.0"
