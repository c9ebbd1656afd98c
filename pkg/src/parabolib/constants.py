"""Physical constants, SI units (CODATA 2018, exact where redefined in 2019)."""

import math

# vacuum permittivity [F/m]
EPSILON_0 = 8.8541878128e-12
# speed of light in vacuum [m/s], exact
C_LIGHT = 299792458.0
# elementary charge [C], exact
E_CHARGE = 1.602176634e-19
# Planck constant [J s], exact
H_PLANCK = 6.62607015e-34
# reduced Planck constant h/(2 pi) [J s], 1.0545718e-34
HBAR = H_PLANCK / (2.0 * math.pi)

# product hbar*c [J m], used by the sphere-plane Casimir estimate: 3.1615268e-26
HBAR_C = HBAR * C_LIGHT

# conductance quantum G0 = 2 e^2 / h [S] and its inverse R0 [ohm]: 12906.404
CONDUCTANCE_QUANTUM = 2.0 * E_CHARGE**2 / H_PLANCK
QPC_RESISTANCE = 1.0 / CONDUCTANCE_QUANTUM
