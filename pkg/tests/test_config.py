import numpy as np
import pytest

from mollow_cqed.config import (
    ABLATION_VARIANTS,
    ConfigError,
    GridConfig,
    config_from_dict,
    load_config,
    parse_sweep,
)
from mollow_cqed.presets import PRESETS, preset

BASE = dict(protocol="linewidth_sweep", sweep={"omega": [15, 30]})


def test_minimal_config_defaults():
    cfg = config_from_dict(BASE)
    assert cfg.name == "linewidth_sweep"
    assert cfg.params.kappa == 36.0
    assert cfg.sweep.kind == "omega" and cfg.sweep.values == (15.0, 30.0)
    assert cfg.variants == ("default",)
    assert cfg.fock is None and cfg.workers == 1


@pytest.mark.parametrize(
    "raw",
    [
        dict(BASE, colour="red"),
        dict(BASE, params={"kapa": 3}),
        dict(BASE, grid={"t_max": 3, "dt": 0.1}),
        dict(BASE, sweep={"omega": [1], "J": [1]}),
        dict(BASE, sweep={"omega": {"start": 1, "stop": 2, "num": 3, "step": 1}}),
        dict(BASE, calibration={"nosie": 0.1}),
    ],
)
def test_unknown_keys_rejected(raw):
    with pytest.raises(ConfigError, match="unknown|exactly one"):
        config_from_dict(raw)


@pytest.mark.parametrize(
    "raw",
    [
        {"sweep": {"omega": [1]}},
        {"protocol": "spectrum"},
        dict(BASE, protocol="fig3"),
        dict(BASE, sweep={"omega": []}),
        dict(BASE, sweep={"omega": [-1]}),
        dict(BASE, fock=1),
        dict(BASE, fock="many"),
        dict(BASE, workers=0),
        dict(BASE, params={"kappa": -1}),
        dict(BASE, grid={"omega_min": -1, "omega_max": 1}),
        dict(BASE, variants=["bogus"]),
        [1, 2],
    ],
)
def test_invalid_configs(raw):
    with pytest.raises(ConfigError):
        config_from_dict(raw)


def test_range_sweep():
    ax = parse_sweep({"J": {"start": 0, "stop": 2, "num": 5}})
    assert ax.kind == "J"
    np.testing.assert_allclose(ax.values, [0, 0.5, 1, 1.5, 2])
    assert parse_sweep({"omega": 42}).values == (42.0,)


def test_ablation_variants():
    cfg = config_from_dict(dict(BASE, protocol="ablation"))
    assert cfg.variants == tuple(ABLATION_VARIANTS)
    assert cfg.variant_params("coherent_only").gamma_d == 0
    assert cfg.variant_params("coherent_only").gamma_ph_asp == 0
    assert cfg.variant_params("dephasing_only").gamma_d == 1.0
    assert cfg.variant_params("full") == cfg.params


def test_grid():
    g = GridConfig(omega_min=-1, omega_max=1, omega_step=0.5)
    np.testing.assert_allclose(g.omega(), [-1, -0.5, 0, 0.5, 1])
    assert GridConfig().omega() is None


def test_yaml_round_trip(tmp_path):
    f = tmp_path / "c.yaml"
    f.write_text(
        "name: t\nprotocol: linewidth_sweep\nparams: {delta_c: 85, frame: displaced}\n"
        "sweep: {omega: {start: 15, stop: 70, num: 12}}\nfock: auto\n"
    )
    cfg = load_config(f)
    assert cfg.params.delta_c == 85 and cfg.fock == "auto" and len(cfg.sweep.values) == 12
    d = cfg.to_dict()
    assert d["sweep"]["kind"] == "omega" and d["output_dir"] == "runs/t"


def test_bad_yaml(tmp_path):
    f = tmp_path / "c.yaml"
    f.write_text("protocol: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(f)


def test_presets_valid():
    for name in PRESETS:
        cfg = preset(name)
        assert cfg.name == name
        assert cfg.params.frame == "displaced"
        assert len(cfg.sweep.values) >= 12
    assert preset("fig3c").params.delta_cx == 85
    assert preset("fig4a").variants == tuple(ABLATION_VARIANTS)
    with pytest.raises(KeyError):
        preset("fig9")
