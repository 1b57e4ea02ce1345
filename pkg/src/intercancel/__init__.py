"""Inter-cancellation durations of limit-order flow: distributions, memory and multifractality."""

__version__ = "0.1.0"
