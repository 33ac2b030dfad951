"""The dmp dialect, decomposition strategies and the decomposition passes."""
