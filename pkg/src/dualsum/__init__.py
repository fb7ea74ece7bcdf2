"""Extract-then-abstract summarization: WordNet sentence ranking, a dual-attention
pointer-generator with coverage, and ROUGE scoring."""

__version__ = "0.1.0"
