"""Configuration, file formats, console output and the synthetic model."""

from .config import Config, RunConfig
from .output_formatter import GradcheckRow, OutputFormatter

__all__ = ["Config", "GradcheckRow", "OutputFormatter", "RunConfig"]
