import numpy as np
import pytest

from bqcf.potential import Morse, MorseParams


@pytest.fixture(scope="session")
def morse():
    return Morse(MorseParams(D_e=3.0, alpha=3.0, r_e=1.0))


def loglog_slope(xs, ys):
    xs = np.log(np.asarray(xs, dtype=float))
    ys = np.log(np.asarray(ys, dtype=float))
    return float(np.polyfit(xs, ys, 1)[0])
