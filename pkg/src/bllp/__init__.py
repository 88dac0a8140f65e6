"""Bounded polarized linear logic toolkit.

Resource-polynomial arithmetic, polarized formulas, λμ-terms with weak,
head and machine reduction, a checker for annotated type derivations, a
sequent-calculus kernel with weights and cut elimination, and a
Krivine-style abstract machine.
"""

__version__ = "0.1.0"
