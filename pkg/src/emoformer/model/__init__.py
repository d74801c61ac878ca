from emoformer.model.config import MAX_CLASSES, XVECTOR_DIM, EmoFormerConfig, SequenceMode
from emoformer.model.macs import REFERENCE_MACS, MacReport, count_macs, mac_reports_by_sequence_mode
from emoformer.model.network import CONV_STACK, MODEL_DIM, EmoFormer, ShapeRow, build
from emoformer.model.weights import load_model, load_weights, save_weights
