"""emberlab: desk-scale prescribed-fire emulation laboratory."""

__version__ = "0.1.0"
