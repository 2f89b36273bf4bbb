import numpy as np
import pytest

from pccal.basis import build_basis
from pccal.bpdn import BpdnConfig, cross_validate_delta
from pccal.ensemble import DesignEnsemble
from pccal.harness import evaluate_synthetic, smooth_model
from pccal.parameters import ParameterSpace, ParameterSpec
from pccal.quadrature import build_smolyak


@pytest.fixture(scope="session")
def basis55():
    return build_basis(5, 5)


@pytest.fixture(scope="session")
def grid55():
    return build_smolyak(5, 5)


@pytest.fixture(scope="session")
def table1_space():
    """The five-parameter box used throughout the docs and examples."""
    return ParameterSpace([
        ParameterSpec("Ri_c", 0.1, 1.0, 0.3),
        ParameterSpec("Ri_g", 0.1, 1.0, 0.7),
        ParameterSpec("phi_m", 3.60, 331.06, 16.0),
        ParameterSpec("phi_s", 7.77, 67.02, 16.0),
        ParameterSpec("c_star", 5.0, 15.0, 10.0),
    ])


@pytest.fixture(scope="session")
def noisy_ensemble_903(grid55):
    """The frozen noisy smooth benchmark evaluated on the level-5 grid."""
    model = smooth_model()
    values = evaluate_synthetic(model, grid55.nodes)
    return DesignEnsemble(nodes=grid55.nodes, values=values, weights=grid55.weights)


@pytest.fixture(scope="session")
def cv_fit_903(basis55, noisy_ensemble_903):
    """Cross-validated BPDN fit of the frozen benchmark (shared: ~8 s)."""
    return cross_validate_delta(basis55, noisy_ensemble_903, BpdnConfig(seed=11))


@pytest.fixture(scope="session")
def subset_cv_fits(basis55, grid55):
    """Cross-validated fits on the level-2/3/4 nested subsets (shared: ~50 s)."""
    from pccal.quadrature import subset_levels

    model = smooth_model()
    fits = {}
    for level in (2, 3, 4):
        sub = subset_levels(grid55, level)
        ens = DesignEnsemble(nodes=sub.nodes,
                             values=evaluate_synthetic(model, sub.nodes),
                             weights=sub.weights)
        fits[level] = cross_validate_delta(basis55, ens, BpdnConfig(seed=11))
    return fits
