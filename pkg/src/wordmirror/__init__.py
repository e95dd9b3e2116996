"""Binary word-attribute transfer by reflection in embedding space."""

__version__ = "0.1.0"
