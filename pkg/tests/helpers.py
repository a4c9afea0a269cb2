"""Constants and independent oracles shared by the tests."""

import math

import numpy as np

from bectomo.su2 import AngularMomentumGeometry, rotation_oracle, BeamSplitterSetting

REF_N = 49
REF_POLAR = 0.54
REF_AZIMUTH = 0.13
REF_K = 180
REF_TAU = 2000
THETA = math.pi / 8


def oracle_forward_block(n, theta, r):
    """T^{(r)} built element by element from the matrix-exponential rotation."""
    g = AngularMomentumGeometry(n)
    d = rotation_oracle(g, BeamSplitterSetting(theta, 0.0))
    t = np.zeros((n + 1, n + 1 - r), dtype=complex)
    for m in range(n + 1):
        for i in range(n + 1 - r):
            t[m, i] = np.conj(d[i + r, m]) * d[i, m]
    return t




# criterion number -> (passed, detail); filled by test_acceptance, printed by conftest
ACCEPTANCE_RESULTS = {}


def record_acceptance(number, title, passed, detail):
    ACCEPTANCE_RESULTS[number] = (title, bool(passed), detail)
    print(f"\nACCEPTANCE {number} {'PASS' if passed else 'FAIL'}: {title}: {detail}")
