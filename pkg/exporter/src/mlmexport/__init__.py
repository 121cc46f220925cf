"""Frozen-embedding exporter: runs a pretrained masked language model over
sentence + prompt template and dumps word-level hidden states plus the six
mask-slot vectors in the PTGE0001 binary store format."""

__version__ = "0.1.0"
