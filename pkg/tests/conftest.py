import sys
from pathlib import Path

import pytest

from diffusion_ld import models

sys.path.insert(0, str(Path(__file__).parent))

EXAMPLES = {
    "gaussian_llr": models.GaussianLLR(1.0, 1.0),
    "bernoulli_llr": models.BernoulliLLR(0.49, 0.51),
    "laplace_llr": models.LaplaceLLR(0.3, 1.0),
    "gaussian_mixture_raw": models.GaussianMixtureRaw(0.05, 1.0, 1.0, 0.3),
}


@pytest.fixture(params=sorted(EXAMPLES))
def any_model(request):
    return EXAMPLES[request.param]


@pytest.fixture(params=[0, 1])
def hyp(request):
    return request.param
