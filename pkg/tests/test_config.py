import pytest

from pqt import ConfigError, PqtConfig


def test_defaults():
    cfg = PqtConfig(dim=128)
    assert (cfg.p_tree, cfg.k1, cfg.k2, cfg.w, cfg.p_line) == (2, 16, 8, 4, 32)
    assert (cfg.candidate_budget, cfg.rerank_exact, cfg.train_iters) == (4096, 64, 25)
    assert cfg.part_dim == 64 and cfg.fine_dim == 4 and cfg.fine_per_part == 16
    assert cfg.n_bins == 128 ** 2


@pytest.mark.parametrize("kw", [
    dict(dim=10, p_tree=3, p_line=3),
    dict(dim=12, p_tree=2, p_line=3),
    dict(dim=12, p_tree=2, p_line=8),
    dict(dim=8, p_tree=2, p_line=4, k1=2, w=3),
    dict(dim=8, p_tree=2, p_line=4, k1=0),
    dict(dim=8, p_tree=2, p_line=4, rerank_exact=-1),
    dict(dim=8, p_tree=2, p_line=4, k2=1.5),
])
def test_invalid(kw):
    with pytest.raises(ConfigError):
        PqtConfig(**kw)


def test_replace_and_dict():
    cfg = PqtConfig(dim=8, p_tree=2, p_line=4, k1=4, w=2)
    assert cfg.replace(w=4).w == 4
    with pytest.raises(ConfigError):
        cfg.replace(w=5)
    assert cfg.to_dict()["k1"] == 4
