import numpy as np
import pytest
from hypothesis import settings

from modfront.config import Config

settings.register_profile("ci", max_examples=50, deadline=None)
settings.load_profile("ci")


def small_config(**overrides) -> Config:
    """A scaled-down front-end that keeps finite-difference checks fast."""
    base = dict(
        sample_rate=2000, n_filters=6, tf_kernel_len=32, tf_stride=3, f_min=20.0, f_max=1000.0,
        n_mod=4, mod_kernel_len=16, mod_stride=5, mod_f_lo=0.0, mod_f_hi=300.0,
        pool_kernel=16, pool_stride=8, fast_conv=False, head_init_scale=0.5,
    )
    base.update(overrides)
    return Config(**base)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
