import pytest

from hyperrag.config import load_config
from hyperrag.exceptions import ConfigError


def test_defaults():
    cfg = load_config()
    assert (cfg.search.tau0, cfg.search.n_max, cfg.search.min_per_hop, cfg.search.decay) == (0.5, 5, 50, 0.1)
    assert (cfg.search.density_lo, cfg.search.density_up) == (2.35, 5.0)
    assert (cfg.beam.width, cfg.beam.depth) == (3, 3)
    assert (cfg.train.batch_size, cfg.train.learning_rate, cfg.train.max_epochs, cfg.train.patience) == (32, 1e-4, 50, 10)
    assert cfg.budget.total_tokens == 4000 and cfg.seed == 0


def test_precedence_flag_over_file(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("seed = 3\n[search]\ntau0 = 0.4\n[beam]\nwidth = 5\n")
    cfg = load_config(p, {"beam.width": 2, "seed": None})
    assert cfg.search.tau0 == 0.4 and cfg.beam.width == 2 and cfg.seed == 3


@pytest.mark.parametrize("text", ["bogus = 1\n", "[search]\nnope = 1\n", "[nosection]\n", "search = 3\n", "x = [\n"])
def test_rejects_bad_files(tmp_path, text):
    p = tmp_path / "c.toml"
    p.write_text(text)
    with pytest.raises(ConfigError):
        load_config(p)


def test_rejects_unknown_override_and_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(None, {"search.nope": 1})
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.toml")
