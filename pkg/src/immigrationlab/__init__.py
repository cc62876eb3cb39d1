"""Simulation and verification of random processes with immigration at random times.

Y(t) = sum_k X_{k+1}(t - T_k) is built from an arrival model (``arrivals``) and
a response model (``responses``); ``shotnoise`` produces Monte-Carlo ensembles
of the scaled vector Y(u_i t) / sqrt(c t^rho v(t)), ``limitgauss`` computes its
Gaussian limit covariance, and ``verify`` compares the two and checks the
hypotheses of the limit theorem.
"""

__version__ = "0.1.0"
