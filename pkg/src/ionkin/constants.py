"""Physical constants (SI, CODATA via scipy) and unit conversions used throughout."""

from scipy import constants as _c

EV = _c.electron_volt          # J per eV
H = _c.h                       # J s
HBAR = _c.hbar                 # J s
C = _c.c                       # m / s
EPS0 = _c.epsilon_0            # F / m
E_CHARGE = _c.elementary_charge
M_E = _c.electron_mass

FS = 1e-15
W_CM2_TO_W_M2 = 1e4

N_SPECIES = 9                  # Ne .. Ne8+
