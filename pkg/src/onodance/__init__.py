"""onodance: skeletal dance motion generation conditioned on sound-symbolic
words, with training, inference, rendering/export and evaluation."""

__version__ = "0.1.0"
