"""Quantifying community norms from comment corpora.

Normness scales come from pairwise win-rates, community preference from a
vote predictor, and the two meet in binned return-potential curves.
"""

__version__ = "0.1.0"
