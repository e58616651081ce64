"""Neural Chinese word segmentation: SAN-CRF, BiLSTM-CRF, and lexicon-based
type-supervised domain adaptation, on a small float64 autodiff engine."""

__version__ = "0.1.0"
