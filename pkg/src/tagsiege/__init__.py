"""tagsiege: black-box joint topology/text attacks on text-attributed graphs."""

__version__ = "0.1.0"
