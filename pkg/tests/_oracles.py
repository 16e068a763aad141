"""Independent reference computations shared by the unit and acceptance tests."""

import numpy as np
from scipy import integrate


def m_tau_quad(t, mu, tau):
    """(1/2pi) int_R e^{it eta} / p(eta) d eta by QUADPACK; p(-eta) = conj p(eta) folds it onto (0, inf)."""
    def inv(eta):
        return 1.0 / (eta * eta + 2j * tau * eta - tau * tau + mu * mu)
    if t == 0:
        return integrate.quad(lambda e: inv(e).real, 0, np.inf, epsabs=1e-13, limit=400)[0] / np.pi
    w = abs(t)
    c = integrate.quad(lambda e: inv(e).real, 0, np.inf, weight="cos", wvar=w, epsabs=1e-13, limlst=200)[0]
    s = integrate.quad(lambda e: inv(e).imag, 0, np.inf, weight="sin", wvar=w, epsabs=1e-13, limlst=200)[0]
    return (c - np.sign(t) * s) / np.pi
