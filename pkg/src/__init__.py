from __future__ import annotations

__all__ = ["__version__"]

# Bump together with docs/file_formats.md when a file layout changes.
__version__ = "0.1.0"
