"""textembed: batch sentence-encoder tool producing binary embedding files."""

from .encoders import DEFAULT_MODEL, Encoder, EncoderLoadError, load_encoder
from .fcem import write_embeddings
from .jobs import EmbedJob, JobSummary, embed_corpus

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_MODEL",
    "EmbedJob",
    "Encoder",
    "EncoderLoadError",
    "JobSummary",
    "embed_corpus",
    "load_encoder",
    "write_embeddings",
]
