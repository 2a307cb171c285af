"""Exact steady-state transport observables for quantum wire junctions.

The junction is a star graph of ``n`` leads meeting at a point-like vertex;
each lead ends in a thermal reservoir.  Subpackages:

* :mod:`.scattering`: vertex scattering matrices and gauge dressing
* :mod:`.reservoirs`: occupation numbers
* :mod:`.numerics`: adaptive quadrature, polylogarithm, exponential integral
* :mod:`.schrodinger` and :mod:`.dirac`: observables
* :mod:`.config` and :mod:`.cli`: configuration files and the command line
"""

__version__ = "0.1.0"
