"""Tools package for the rootseg MCP server."""

from .segmentation_tools import register_tools

__all__ = ['register_tools']
