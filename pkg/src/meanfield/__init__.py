"""Interacting-particle simulators, limit solvers and probability metrics.

Subpackages by role:

* ``core``        shared state/measure types, counter-based RNG streams
* ``elastic``     elastic Maxwell collision gas (event-driven jump process)
* ``thermostat``  inelastic collision gas coupled to a Brownian thermal bath
* ``mckean``      drift-diffusion particle SDE and its deterministic
                  position-velocity specialization
* ``limits``      reference solutions of the limiting one-particle equations
* ``metrics``     Wasserstein / Fourier / Sobolev / TV distances and the
                  empirical-sampling-error estimator
* ``harness``     observable products, fluctuation measurements, rate fits
* ``cli``         batch driver emitting deterministic CSV
"""

__version__ = "0.1.0"
