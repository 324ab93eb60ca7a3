"""Value-function knowledge storage in a growing self-organizing map, and
SOM-guided exploration for transfer between navigation tasks."""

__version__ = "0.1.0"
