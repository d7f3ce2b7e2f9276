"""Hybrid dialect-to-standard speech recognition toolkit.

The pipeline learns dialect-to-standard word mappings from parallel text,
turns them into a translation-bearing pronunciation lexicon with a graphone
G2P model, decodes phone posteriors against a Kneser-Ney n-gram LM (with
clitic and compound handling) and re-ranks the n-best output with a small
LSTM language model.
"""

__version__ = "0.1.0"
