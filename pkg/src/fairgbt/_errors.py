"""
Exceptions raised by fairgbt

Exports
-------
FairGBTError, DataError, NumericalError
"""


class FairGBTError(Exception):
    """Base class of all fairgbt errors"""


class DataError(FairGBTError, ValueError):
    """
    The input data violates a precondition: a header mismatch, an empty
    sensitive group, a single-class label vector, mismatched lengths, ...
    """


class NumericalError(FairGBTError, ArithmeticError):
    """
    A numerical procedure failed: singular kernel matrix after the maximal
    jitter, a tree node with zero cover, ...
    """
