"""Candidate microservice decompositions of a monolith from code embeddings and access traces."""

__version__ = "0.1.0"
