"""Dense real polynomials with exact coefficient-level parity checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Polynomial:
    """Real polynomial sum_i c[i] * x**i, constant term first.

    Evaluation uses Horner's scheme and accepts scalars or numpy arrays.
    Parity predicates test for exact zeros, so evenness/oddness is a property
    of the representation, not a numerical tolerance.
    """

    coefficients: tuple[float, ...] = field(default=(0.0,))

    def __init__(self, coefficients=(0.0,)):
        coeffs = tuple(float(c) for c in coefficients) or (0.0,)
        object.__setattr__(self, "coefficients", coeffs)

    def __call__(self, x):
        acc = np.zeros_like(x, dtype=float) if isinstance(x, np.ndarray) else 0.0
        for c in reversed(self.coefficients):
            acc = acc * x + c
        return acc

    @property
    def degree(self) -> int:
        """Index of the last non-zero coefficient; -1 for the zero polynomial."""
        for i in range(len(self.coefficients) - 1, -1, -1):
            if self.coefficients[i] != 0.0:
                return i
        return -1

    def derivative(self) -> "Polynomial":
        if len(self.coefficients) == 1:
            return Polynomial((0.0,))
        return Polynomial(tuple(i * c for i, c in enumerate(self.coefficients) if i > 0))

    def antiderivative(self) -> "Polynomial":
        """Term-wise antiderivative with zero constant of integration."""
        return Polynomial((0.0,) + tuple(c / (i + 1) for i, c in enumerate(self.coefficients)))

    def is_even(self) -> bool:
        return all(c == 0.0 for c in self.coefficients[1::2])

    def is_odd(self) -> bool:
        return all(c == 0.0 for c in self.coefficients[0::2])

    def __repr__(self) -> str:
        return f"Polynomial({list(self.coefficients)})"
