"""
Numerical core: matrix algebra, semigroup machinery, mixing processes,
the partial-sum limit harness and random-integral sampling.
"""
