"""Desk-scale laboratory for latent-variable conversational models:
a reverse-mode autodiff core, four response-generation models, and a
training/evaluation harness."""

__version__ = "0.1.0"

from .config import RunConfig  # noqa: F401
from .errors import LatentChatError  # noqa: F401
