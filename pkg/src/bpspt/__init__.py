"""Bouncy particle sampler with finite and infinite-swap parallel tempering."""

__version__ = "0.1.0"
