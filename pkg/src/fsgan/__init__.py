"""Federated multi-generator GAN training with pseudo-label clustering.

Per site, a bank of generators and a shared discriminator/classifier
trunk play the local synthesis game; a coordinator averages parameters
across sites each round (scheme c1 syncs generators too, c2 only the
trunk). The classifier's argmax over generators doubles as an
unsupervised clustering of real records.
"""

from ._kernels import backend_name

__version__ = "0.1.0"

__all__ = ["backend_name", "__version__"]
