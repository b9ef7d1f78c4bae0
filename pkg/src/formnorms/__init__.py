"""formnorms: web form discovery, annotation, and PI-collection analytics."""

__version__ = "0.1.0"
