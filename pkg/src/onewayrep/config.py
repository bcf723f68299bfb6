"""Numeric tolerances shared across modules.

``EXACT`` is used for checks that hold by exact algebra, ``ACCUM`` for
quantities built from longer chains of products. Both can be overridden
at runtime (the CLI exposes ``--tol``).
"""

EXACT = 1e-12
ACCUM = 1e-10
DEFAULT_SEED = 20180315


def set_tolerances(exact=None, accum=None):
    global EXACT, ACCUM
    if exact is not None:
        EXACT = float(exact)
    if accum is not None:
        ACCUM = float(accum)
