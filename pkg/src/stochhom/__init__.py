"""Numerical companion to stochastic homogenisation of high-contrast media.

Modules
-------
medium     lattice random media, realisations and rasterisation
shapes     Dirichlet spectra of reference inclusions
grid_fem   Q1 finite elements on uniform grids
eigen      certified generalised symmetric eigensolvers
homog      homogenised stiff matrix and macroscopic eigenvalues
zhikov     Zhikov function, bands, gaps and the limit spectrum
study      convergence experiments and reports
cli        command-line entry point
"""

__version__ = "0.1.0"
