"""Small model builders shared by the test modules"""
import numpy as np

from modaljump import hilbert, models


def random_state(spec, rng):
    psi = rng.normal(size=spec.dim) + 1j * rng.normal(size=spec.dim)
    return psi / np.linalg.norm(psi)


def make_model(rabi=5.0, couplings=(1.0,), detunings=(0.0,), cutoff=6, basis='spectral',
               approximation='exact'):
    spec = hilbert.build_space(len(couplings), cutoff)
    params = models.ModelParams(rabi=rabi, couplings=couplings, detunings=detunings)
    return models.build_model(spec, params, basis_kind=basis, approximation=approximation)
