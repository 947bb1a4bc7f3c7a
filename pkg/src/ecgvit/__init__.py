"""Vision-transformer heart-disease classification from 12-lead ECG report images."""

__version__ = "0.1.0"
