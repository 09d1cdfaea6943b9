"""Multi-factor momentum backtesting lab.

Cleaning pipeline, vectorized indicators, ranking/sentiment strategy
layers, a deterministic backtester, and the five-metric evaluation and
EDA toolkit, orchestrated by the ``momentum-lab`` CLI.
"""

__version__ = "0.1.0"
