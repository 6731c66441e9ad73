"""Voting-advice matching engine and adversarial robustness testbed."""

__version__ = "0.1.0"
