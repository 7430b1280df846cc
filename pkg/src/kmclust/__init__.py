"""k-machine simulator with facility location, p-median and p-center solvers."""
__version__ = "0.1.0"
