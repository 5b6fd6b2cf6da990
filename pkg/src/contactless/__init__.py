"""Contactless-purchasing workflow verification, SIR analytics and
store-day contact simulation."""

__version__ = "0.1.0"
