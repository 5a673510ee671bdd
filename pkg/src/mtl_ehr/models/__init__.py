"""Embedder, shared encoders, task decoders and the bundle that joins them."""
from .bundle import ModelBundle
from .config import KINDS, POOLINGS, PRESETS, EncoderConfig, preset
from .encoders import Embedder, GRUEncoder, LinearConcatEncoder, TransformerEncoder, build_encoder, masked_pool
from .heads import DenseHead, SequenceDecoder, build_head, pad_sequences
from .layers import GRULayer, LayerNorm, Linear, LSTMCell, Module, init_rng

__all__ = [
    "DenseHead", "Embedder", "EncoderConfig", "GRUEncoder", "GRULayer", "KINDS", "LSTMCell",
    "LayerNorm", "Linear", "LinearConcatEncoder", "ModelBundle", "Module", "POOLINGS", "PRESETS",
    "SequenceDecoder", "TransformerEncoder", "build_encoder", "build_head", "init_rng",
    "masked_pool", "pad_sequences", "preset",
]
