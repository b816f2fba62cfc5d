"""Markov-chain sampled stochastic gradient methods and chain-time tools."""

__version__ = "0.1.0"
