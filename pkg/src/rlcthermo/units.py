"""Physical constants used throughout the package."""

from __future__ import annotations

from dataclasses import dataclass

from scipy import constants as _c


@dataclass(frozen=True)
class Units:
    """Boltzmann and reduced Planck constants.

    SI values are the default; :data:`NATURAL` sets both to one so that
    temperatures are energies and dimensionless ratios can be typed directly.
    """

    kb: float = _c.k
    hbar: float = _c.hbar
    name: str = "si"


SI = Units()
NATURAL = Units(kb=1.0, hbar=1.0, name="natural")
