"""Joint condition-based maintenance and spare-parts planning under
distributionally robust chance constraints."""

__version__ = "0.1.0"
