"""
Evaluation metrics: corpus BLEU, forward/backward consistency and the
copy-constraint analysis.
"""

from evaluation.bleu import BleuReport, corpus_bleu, csw_split_bleu
from evaluation.consistency import consistency_score
from evaluation.copy_analysis import CopyReport, copy_constraint_report, corpus_copy_report
