"""Subprocess speaker-embedding adapter: WAV in, embedding JSON on stdout."""

from .models import MODELS, AdapterConfig, build, extract

__version__ = "0.1.0"
