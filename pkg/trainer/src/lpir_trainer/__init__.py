"""Adversarial training harness for learned lossy private retrieval."""

from .data import gaussian_benchmark, load_raw_f64
from .export import export_queries, export_scheme_point, scheme_point_row
from .quantized import (
    QuantizedAnswer,
    quantize_answer_backward,
    quantize_answer_forward,
    quantize_levels,
)
from .train import TrainedScheme, TrainerConfig, train

__version__ = "0.1.0"
