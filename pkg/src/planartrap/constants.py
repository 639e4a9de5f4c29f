"""Physical constants and unit conversions used across the package.

Everything internal is SI; eV and e/amu appear only at presentation
boundaries.
"""
from scipy import constants as _sc

ELEMENTARY_CHARGE = _sc.e            # C
ATOMIC_MASS = _sc.atomic_mass        # kg
EV = _sc.electron_volt               # J

# 1 C/kg expressed in elementary charges per nucleon mass (~1.0364e-8)
C_PER_KG_TO_E_PER_AMU = ATOMIC_MASS / ELEMENTARY_CHARGE

# dynamic viscosity of air at room temperature, kg m^-1 s^-1
AIR_VISCOSITY = 1.83e-5
# mean-free-path law for air: lambda = LAMBDA_REF * (PRESSURE_REF / p)
AIR_MEAN_FREE_PATH_REF = 67.3e-9     # m, at PRESSURE_REF
AIR_PRESSURE_REF = 1e5               # Pa
AIR_DENSITY = 1.2                    # kg/m^3, used only for the Reynolds advisory


def joules_to_ev(energy):
    return energy / EV


def c_per_kg_to_e_per_amu(qm):
    return qm * C_PER_KG_TO_E_PER_AMU


def e_per_amu_to_c_per_kg(qm):
    return qm / C_PER_KG_TO_E_PER_AMU
