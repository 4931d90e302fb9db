"""Exact calculus of virtual idempotents: pairs of idempotent matrices over
pluggable coefficient rings, their conjugator constructions, stabilization
homotopies, numeric functional calculus, and Fredholm index machinery.

Submodules are imported explicitly, e.g. ``from vgrass import grass, mat``.
"""

__version__ = "0.1.0"
