import math

import pytest

from qsdphase.config import Mode, RunConfig, Tolerances, load_config, parse_config_text
from qsdphase.core import CouplingKind
from qsdphase.ensemble import ConfigurationError
from qsdphase.noise import GeneratorKind

GOOD = """
[run]
mode = ensemble
thetas = 0, pi/2 ; pi

[model]
coupling = dephasing
omega = 1
lambda = 0.5
theta = 1

[bath]
Gamma = 1
gamma = 7
Omega = 1

[grid]
t_final = 2*pi
n_steps = 1000

[ensemble]
n_traj = 500
root_seed = 0xFFFFFFFFFFFFFFFF
generator = covariance_factor

[tolerances]
n_sigma = 4
"""


def test_parse_good_config():
    text = GOOD.replace("0, pi/2 ; pi", "0, 0.5*pi ; pi")
    cfg = parse_config_text(text)
    assert cfg.mode is Mode.ENSEMBLE
    assert cfg.coupling is CouplingKind.DEPHASING
    assert cfg.lam == 0.5 and cfg.gamma == 7.0 and cfg.Gamma == 1.0 and cfg.Omega == 1.0
    assert cfg.thetas == (0.0, 0.5 * math.pi, math.pi)
    assert cfg.grid().n_steps == 1000
    assert abs(cfg.t_final - 2 * math.pi) < 1e-15
    assert cfg.root_seed == 2 ** 64 - 1
    assert cfg.generator is GeneratorKind.COVARIANCE_FACTOR
    assert cfg.tolerances.n_sigma == 4.0 and cfg.tolerances.solid_angle == Tolerances().solid_angle


@pytest.mark.parametrize("text,needle", [
    ("[model]\nomega = 1\nfoo = 2\n", "<config>:3: unknown key 'foo' in [model]"),
    ("[modle]\nomega = 1\n", "<config>:1: unknown section [modle]"),
    ("[bath]\nGAMMA = 1\n", "unknown key 'GAMMA'"),
    ("[model]\nomega = fast\n", "<config>:2: bad value for model.omega"),
    ("[ensemble]\nn_traj = 0\n", "n_traj must be >= 1"),
    ("[ensemble]\nroot_seed = -1\n", "root_seed"),
    ("[grid]\ndt = 0.1\nn_steps = 10\n", "either grid.dt or grid.n_steps"),
    ("[model]\ntheta = 4\n", "theta"),
    ("[bath]\ngamma = 0\n", "gamma"),
    ("[run]\nmode = movie\n", "bad value for run.mode"),
    ("no section header\n", "<config>"),
])
def test_rejections(text, needle):
    with pytest.raises(ConfigurationError) as info:
        parse_config_text(text)
    assert needle in str(info.value)


def test_missing_file():
    with pytest.raises(ConfigurationError, match="cannot read config"):
        load_config("/nonexistent/run.ini")


def test_defaults_and_overrides():
    cfg = RunConfig()
    assert cfg.n_traj == RunConfig(mode=Mode.VALIDATE).n_traj == 20000
    assert len(cfg.theta_grid()) == 9
    assert cfg.with_overrides(n_traj=None, dt=0.01).dt == 0.01
    echo = cfg.echo()
    assert echo["n_steps"] == cfg.grid().n_steps and echo["mode"] == "ensemble"
    with pytest.raises(ConfigurationError):
        cfg.with_overrides(workers=0)
