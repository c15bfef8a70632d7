"""latseg: lexicon-augmented lattice LSTM toolkit for Chinese word segmentation."""

__version__ = "0.1.0"

from .data import LabeledSentence, Vocab, from_bmes, to_bmes
from .model import SegmenterModel

__all__ = ["LabeledSentence", "SegmenterModel", "Vocab", "from_bmes", "to_bmes", "__version__"]
