"""
Multiply-accumulate accounting, per sample.

Counting rules: a convolution costs H_out · W_out · C_out · kh · kw · C_in (at the
resolution before pooling), a dense layer inputs · outputs per position, attention
4 · S · D² for the Q, K, V and output projections plus 2 · S² · D for scores and
context. Pooling, normalization, activations, reshapes and softmax count as zero.
"""

from dataclasses import dataclass, replace
from typing import Any

from emoformer.errors import ArgumentError
from emoformer.model.config import EmoFormerConfig, SequenceMode
from emoformer.model.layers import TransformerEncoder
from emoformer.model.network import EmoFormer, build

REFERENCE_MACS = 35_041_444


@dataclass(frozen=True)
class MacReport:
    per_layer: tuple[tuple[str, int], ...]
    total: int

    def __post_init__(self):
        if self.total != sum(count for _, count in self.per_layer):
            raise ArgumentError('MAC report total differs from the sum of its layers')

    @classmethod
    def from_layers(cls, per_layer: list[tuple[str, int]]) -> 'MacReport':
        return cls(per_layer=tuple(per_layer), total=sum(count for _, count in per_layer))

    def comparison(self, reference: int = REFERENCE_MACS) -> dict[str, Any]:
        return {
            'reference': reference,
            'difference': self.total - reference,
            'ratio': round(self.total / reference, 6),
            'agrees': self.total == reference,
        }

    def to_dict(self) -> dict[str, Any]:
        return {
            'per_layer': [{'layer': name, 'macs': count} for name, count in self.per_layer],
            'total': self.total,
            'comparison': self.comparison(),
        }


def count_macs(model: EmoFormer) -> MacReport:
    per_layer = []
    rows = model.shape_table()
    layers = {layer.name: layer for layer in model.layers}
    layers[model.head.name] = model.head

    for row in rows:
        layer = layers.get(row.layer)
        if layer is None:
            per_layer.append((row.layer, 0))
        elif isinstance(layer, TransformerEncoder):
            sequence = row.input_shape[0]
            per_layer.append((f'{layer.name}.attention', layer.attention_macs(sequence)))
            per_layer.append((f'{layer.name}.feed_forward', layer.feed_forward_macs(sequence)))
        else:
            per_layer.append((layer.name, layer.macs(row.input_shape)))
    return MacReport.from_layers(per_layer)


def mac_reports_by_sequence_mode(config: EmoFormerConfig) -> dict[str, MacReport]:
    """MAC reports of the same configuration built once per sequence mode."""
    return {
        mode.value: count_macs(build(replace(config, sequence_mode=mode))) for mode in SequenceMode
    }
