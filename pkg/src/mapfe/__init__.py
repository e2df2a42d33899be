"""Mixed finite elements for magneto-active polymers at finite strain."""

__version__ = "0.1.0"
