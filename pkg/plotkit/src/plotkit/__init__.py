"""Renders privacy-accuracy figure families from persisted result CSVs:
accuracy over eps, attack AUC over eps, the trade-off ratio over eps, mean
ROC curves, and the accuracy-vs-AUC scatter. Reads result directories
produced by the dpmi experiment runner; never imports it."""

__version__ = "0.1.0"
