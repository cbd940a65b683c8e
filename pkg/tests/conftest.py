import numpy as np
import pytest

from spsim.bloch import AtomModel, PulseTrain
from spsim.detection import DetectorParams
from spsim.jump import LevelScheme
from spsim.sequence import PipelineHandles, SequenceConfig, run_hbt_pipeline

GAMMA = 1.0 / 26e-9
PI_RABI = np.pi / 4e-9


@pytest.fixture(scope="session")
def atom():
    return AtomModel()


@pytest.fixture(scope="session")
def pi_train():
    return PulseTrain()


@pytest.fixture(scope="session")
def quiet_train():
    return PulseTrain(intensity_noise_rel_sigma=0.0)


@pytest.fixture(scope="session")
def scheme():
    return LevelScheme()


@pytest.fixture(scope="session")
def medium_run(atom):
    """Shared 2000-sequence pipeline run at the default (paper) configuration."""
    handles = PipelineHandles.build(atom, PulseTrain(), LevelScheme(),
                                    DetectorParams(), efficiency=0.006)
    cfg = SequenceConfig()
    result = run_hbt_pipeline(cfg, handles, n_sequences=2000, master_seed=99)
    return cfg, handles, result


@pytest.fixture(scope="session")
def mc_million(atom):
    """One million stepped single-pulse trajectories (counts, times, runtime)."""
    import time

    from spsim.jump import sample_pulse_counts
    t0 = time.time()
    counts, times = sample_pulse_counts(atom, PI_RABI, 4e-9, 1_000_000,
                                        seed=424242, return_times=True)
    return counts, times, time.time() - t0
