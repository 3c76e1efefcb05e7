"""
Command-line surface: `python -m src.cli <command> ...`.
"""

from __future__ import annotations

from .evaluation import EvalRow, compare_command, eval_command, psnr
from .main import cli, main

__all__ = ["EvalRow", "cli", "compare_command", "eval_command", "main", "psnr"]
