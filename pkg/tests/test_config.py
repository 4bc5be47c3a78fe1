import pytest

from idlaforest.config import parse_config_text, require_keys
from idlaforest.errors import ConfigError


def test_scalars():
    cfg = parse_config_text(
        'a = 3\nb = -2.5\nc = true\nd = false\ns = "hello"\nh = 0xFF\n'
        'e = 1e-3\n')
    assert cfg == {"a": 3, "b": -2.5, "c": True, "d": False, "s": "hello",
                   "h": 255, "e": 1e-3}


def test_arrays():
    cfg = parse_config_text('g = [10, 20, 40]\nf = [0.5, 1.5]\nn = []\n'
                            'm = [[0, 5], [0, 50]]\n')
    assert cfg["g"] == [10, 20, 40]
    assert cfg["f"] == [0.5, 1.5]
    assert cfg["n"] == []
    assert cfg["m"] == [[0, 5], [0, 50]]


def test_comments_and_blank_lines():
    cfg = parse_config_text('# header\n\na = 1  # trailing\n  \nb = "x # y"\n')
    assert cfg == {"a": 1, "b": "x # y"}


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError):
        parse_config_text("a = 1\na = 2\n")


def test_malformed_lines_rejected():
    for bad in ("just words", "a = ", 'a = "unterminated', "a = [1, 2",
                "-bad key- = 1", "a = 1 2"):
        with pytest.raises(ConfigError):
            parse_config_text(bad + "\n")


def test_require_keys():
    cfg = {"n": 1, "seeds": 2}
    require_keys(cfg, {"n", "seeds", "K"}, ("n",))
    with pytest.raises(ConfigError):
        require_keys(cfg, {"n"}, ())  # "seeds" unknown
    with pytest.raises(ConfigError):
        require_keys(cfg, {"n", "seeds", "K"}, ("K",))  # "K" missing
