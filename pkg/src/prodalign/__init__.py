"""Product/query embedding alignment pipeline with desk-scale training and evaluation."""

__version__ = "0.1.0"
