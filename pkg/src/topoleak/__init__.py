"""Desk-scale decentralized federated learning simulator and topology inference attacks."""

__version__ = "0.1.0"
