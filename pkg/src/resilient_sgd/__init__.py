"""Byzantine-resilient two-time-scale local SGD with comparative elimination."""

__version__ = "0.1.0"
