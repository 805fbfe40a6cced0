"""Cross-modal reconstruction between electrocardiogram and phonocardiogram."""

__version__ = "0.1.0"
