import numpy as np
import pytest

from pairvb.core.data import IdMap, read_pair_stream
from pairvb.core.model import Hyperparams, init_state
from pairvb.core.errors import CheckpointError
from pairvb.engines.checkpoint import MAGIC, VERSION, load_checkpoint, save_checkpoint
from pairvb.engines.sweep import sweep


def _ids(state):
    users = IdMap(f"user-{i}" for i in range(state.n_users))
    items = IdMap(f"item #{j}" for j in range(state.n_items))
    return users, items


@pytest.fixture
def saved(tmp_path, make_state):
    state = sweep(make_state(70, n_users=9, n_items=7, k=4))
    users, items = _ids(state)
    path = save_checkpoint(state, users, items, tmp_path / "model.ckpt")
    return state, users, items, path


def test_round_trip_is_bit_exact(saved):
    state, users, items, path = saved
    loaded, users2, items2 = load_checkpoint(path)

    assert users2 == users
    assert items2 == items
    assert loaded.hyper == state.hyper
    assert loaded.xi_star == state.xi_star
    assert loaded.n_censored == state.n_censored
    assert (loaded.counts.matrix != state.counts.matrix).nnz == 0

    for side in ("users", "items"):
        a, b = getattr(loaded, side), getattr(state, side)
        for name in ("mu", "prec", "bias_mean", "bias_prec"):
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))

    np.testing.assert_array_equal(loaded.dir_pi.alpha, state.dir_pi.alpha)
    np.testing.assert_array_equal(loaded.dir_psi.alpha, state.dir_psi.alpha)
    np.testing.assert_array_equal(loaded.cat.s, state.cat.s)
    np.testing.assert_array_equal(loaded.cat.t, state.cat.t)


def test_saving_twice_gives_identical_bytes(saved, tmp_path):
    state, users, items, path = saved
    again = save_checkpoint(state, users, items, tmp_path / "again.ckpt")
    assert again.read_bytes() == path.read_bytes()


def test_reloaded_state_saves_identically(saved, tmp_path):
    _, _, _, path = saved
    loaded, users, items = load_checkpoint(path)
    copy = save_checkpoint(loaded, users, items, tmp_path / "copy.ckpt")
    assert copy.read_bytes() == path.read_bytes()


def test_header_layout(saved):
    _, _, _, path = saved
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == f"{MAGIC} {VERSION}"
    assert lines[1] == "[header]"
    assert lines[-1] == "[end]"


def _rewrite(path, edit):
    lines = path.read_text(encoding="utf-8").splitlines()
    path.write_text("\n".join(edit(lines)) + "\n", encoding="utf-8")


def test_version_mismatch(saved):
    _, _, _, path = saved
    _rewrite(path, lambda lines: [f"{MAGIC} {VERSION + 1}", *lines[1:]])
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(path)


def test_bad_magic(saved):
    _, _, _, path = saved
    _rewrite(path, lambda lines: ["NOT-A-CKPT 1", *lines[1:]])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_truncated_file_names_the_section(saved):
    _, _, _, path = saved
    _rewrite(path, lambda lines: lines[: lines.index("[t]") + 1])
    with pytest.raises(CheckpointError, match=r"\[t\]"):
        load_checkpoint(path)


def test_truncated_factor_block(saved):
    _, _, _, path = saved
    _rewrite(path, lambda lines: lines[: lines.index("[item_factors]") + 2])
    with pytest.raises(CheckpointError, match=r"item_factors"):
        load_checkpoint(path)


def test_count_mismatch_is_rejected(saved):
    _, _, _, path = saved

    def bump_total(lines):
        return [f"D {int(l.split()[1]) + 1}" if l.startswith("D ") else l for l in lines]

    _rewrite(path, bump_total)
    with pytest.raises(CheckpointError, match="D="):
        load_checkpoint(path)


def test_id_maps_must_match(make_state, tmp_path):
    state = make_state(71)
    users, _ = _ids(state)
    with pytest.raises(CheckpointError):
        save_checkpoint(state, users, IdMap(["only"]), tmp_path / "x.ckpt")


# str.splitlines treats all of these as line breaks; text-mode files do not
_SEPARATORS = "\x0b\x0c\x1c\x1d\x1e\x85\u2028\u2029"


def test_keys_with_unicode_separators_round_trip(tmp_path):
    stream = tmp_path / "odd.tsv"
    lines = [f"user{c}{n}\titem\x85a" for n, c in enumerate(_SEPARATORS)]
    lines.append(f"user{_SEPARATORS[0]}0\titem\u2029b")
    stream.write_text("\n".join(lines) + "\n", encoding="utf-8")

    counts, users, items = read_pair_stream(stream)
    assert len(users) == len(_SEPARATORS)
    assert items.keys() == ["item\x85a", "item\u2029b"]

    state = sweep(init_state(counts, Hyperparams(k=2), seed=0))
    path = save_checkpoint(state, users, items, tmp_path / "odd.ckpt")
    loaded, users2, items2 = load_checkpoint(path)

    assert users2.keys() == users.keys()
    assert items2.keys() == items.keys()
    np.testing.assert_array_equal(loaded.users.mu, state.users.mu)
    again = save_checkpoint(loaded, users2, items2, tmp_path / "again.ckpt")
    assert again.read_bytes() == path.read_bytes()


def test_newline_in_key_is_rejected(make_state, tmp_path):
    state = make_state(72, n_users=2, n_items=2)
    users = IdMap(["a", "b\nc"])
    items = IdMap(["x", "y"])
    with pytest.raises(CheckpointError, match="newline"):
        save_checkpoint(state, users, items, tmp_path / "x.ckpt")
