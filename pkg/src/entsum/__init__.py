"""Maximum-entropy data summaries for approximate counting queries.

Build a compact probabilistic model of a single table (a factorized partition
polynomial plus fitted per-statistic weights), then answer counting and
group-by queries from the model alone.
"""

__version__ = "0.1.0"
