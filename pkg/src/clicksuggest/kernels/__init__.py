"""Hot loops, each with a numba and a numpy implementation.

The active backend is chosen in :mod:`clicksuggest._accel`.
"""
