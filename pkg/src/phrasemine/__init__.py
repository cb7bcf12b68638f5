"""Unsupervised multi-word phrase mining toolkit.

Pipeline: probe an encoder for pairwise word impacts, segment each sentence
at a per-sentence percentile of its adjacent-pair scores, filter candidates
through stopword and noun-phrase rules, bridge the surviving silver labels
to a seq2seq trainer and back, and evaluate sentence-level tagging (micro
P/R/F1) plus document-level keyphrase extraction (TF-IDF, macro F1@10).
"""

__version__ = "0.1.0"
