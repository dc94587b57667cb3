"""Structure-aware flow generation and warping for human body reshaping.

Subpackages import lazily where it matters: the pixel kernels and priors are
pure numpy/numba, the generator and losses pull in torch, and the service
pulls in FastAPI. ``import bodyflow`` alone stays cheap.
"""

__version__ = "0.1.0"
