"""Encoder bridge between vision-language checkpoints and S3EM files."""

from .encoders import ClipEncoder, EncoderError, HashEncoder, make_encoder
from .jobs import (
    BridgeError,
    BridgeJob,
    EmptyManifestError,
    encode_images,
    encode_texts,
    llm_fill,
    make_episodes,
)
from .s3em import S3emError, read_s3em, write_s3em

__version__ = "0.1.0"
