"""Scripts package initialization"""

__all__ = []
