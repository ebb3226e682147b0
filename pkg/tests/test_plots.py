import shutil

from mollow_cqed.config import config_from_dict
from mollow_cqed.plots import plot_run
from mollow_cqed.sweep import run


def test_plots_are_functions_of_the_csv(tmp_path):
    cfg = config_from_dict(dict(
        name="p", protocol="spectrum", params=dict(delta_c=42.0, frame="displaced", fock_dim=6),
        sweep={"omega": [20, 50]}, output_dir=str(tmp_path / "a"),
    ))
    res = run(cfg)
    made = {k: v for k, v in res.paths.items() if k.startswith("plot_")}
    assert set(made) == {"plot_linewidth", "plot_ratio", "plot_spectra"}
    other = tmp_path / "b"
    other.mkdir()
    for name in ("records.csv", "spectra.csv"):
        shutil.copy(tmp_path / "a" / name, other / name)
    again = plot_run(other)
    for key, path in made.items():
        assert again[key].read_bytes() == path.read_bytes()
