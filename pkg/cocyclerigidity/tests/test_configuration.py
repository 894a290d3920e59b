from pathlib import Path

import numpy as np
import pytest

from cocyclerigidity.configuration.configuration import parse_config
from cocyclerigidity.configuration.constants import MeasureKind
from cocyclerigidity.symbolic.sft_core import SymbolicPoint
from cocyclerigidity.utilities.exceptions import ParseError

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

BASE = """version = 1

[sft]
alphabet_size = 2
transitions = [[1, 1], [1, 1]]
tau = 1.0

[generator]
window = [0, 0]

[generator.table]
"1" = { rotation = 1.0 }
"2" = [[2.0, 0.0], [0.0, 0.5]]
"""


def parse_error(text: str) -> ParseError:
    with pytest.raises(ParseError) as info:
        parse_config(text)
    return info.value


def test_parse_defaults():
    config = parse_config(BASE)
    assert config.sft.alphabet_size == 2
    assert config.generator.window == (0, 0)
    assert np.allclose(config.generator.table[(2,)], np.diag([2.0, 0.5]))
    assert config.measure_kind is MeasureKind.PARRY
    assert config.measure is not None
    assert config.run.theta == 0.5
    assert config.run.eps == pytest.approx(0.05)
    assert config.run.N == (1, 2, 3, 4)
    assert config.field is None and config.transfer is None and config.generator_b is None


def test_theta_default_follows_tau():
    config = parse_config(BASE.replace("tau = 1.0", "tau = 0.5"))
    assert config.run.theta == 0.25
    assert config.run.eps == pytest.approx(0.025)
    config = parse_config(BASE + "\n[run]\ntheta = 0.3\n")
    assert config.run.eps == pytest.approx(0.03)


CONJUGATED_ENTRY = """
[generator.table."1"]
rotation = 1.0
conjugator = [[1.0, 0.3], [0.0, 1.0]]
"""


def test_conjugator_entries():
    text = BASE.replace('"1" = { rotation = 1.0 }\n', '') + CONJUGATED_ENTRY
    config = parse_config(text)
    M = config.generator.table[(1,)]
    S = np.array([[1.0, 0.3], [0.0, 1.0]])
    R = np.array([[np.cos(1.0), -np.sin(1.0)], [np.sin(1.0), np.cos(1.0)]])
    assert np.allclose(M, S @ R @ np.linalg.inv(S))
    assert np.linalg.det(M) == pytest.approx(1.0)
    assert np.trace(M) == pytest.approx(2 * np.cos(1.0))
    assert np.allclose(config.generator.table[(2,)], np.diag([2.0, 0.5]))


def test_bad_conjugator_entry_points_at_its_header():
    text = BASE.replace('"1" = { rotation = 1.0 }\n', '') + CONJUGATED_ENTRY.replace("rotation", "angle")
    error = parse_error(text)
    assert error.key == 'generator.table.1'
    assert "'rotation' or 'diagonal'" in error.reason
    assert error.line == 14


def test_missing_window_word():
    error = parse_error(BASE.replace('"2" = [[2.0, 0.0], [0.0, 0.5]]\n', ''))
    assert error.key == 'generator.table'
    assert 'missing window-words 2' in error.reason
    assert error.line == 11


def test_invalid_window_word():
    error = parse_error(BASE + '"3" = [[1.0, 0.0], [0.0, 1.0]]\n')
    assert error.key == 'generator.table'
    assert error.line == 14


def test_version_and_sections():
    assert parse_error(BASE.replace("version = 1", "version = 2")).key == 'version'
    error = parse_error(BASE + "\n[extra]\nvalue = 1\n")
    assert error.key == 'extra'
    assert error.line == 15


def test_transition_row_length():
    error = parse_error(BASE.replace("[[1, 1], [1, 1]]", "[[1, 1], [1]]"))
    assert error.key == 'sft.transitions[1]'
    assert error.line == 5


def test_run_validation():
    assert parse_error(BASE + "\n[run]\nbogus = 1\n").key == 'run.bogus'
    assert parse_error(BASE + "\n[run]\nN = [0]\n").key == 'run.N'
    assert parse_error(BASE + "\n[run]\nseed = -1\n").key == 'run.seed'
    assert parse_error(BASE + "\n[run]\ntheta = -0.1\n").key == 'run.theta'


def test_points():
    golden = BASE.replace("[[1, 1], [1, 1]]", "[[1, 1], [1, 0]]")
    config = parse_config(golden + "\n[run]\npoints = [{ periodic = [1, 2] }, { left = [1], core = [2], right = [1] }]\n")
    assert config.run.points[0] == SymbolicPoint.periodic((1, 2))
    assert config.run.points[1] == SymbolicPoint.build((1,), (2,), (1,))
    error = parse_error(golden + "\n[run]\npoints = [{ periodic = [2] }]\n")
    assert error.key == 'run.points[0]'


def test_measure_sections():
    two_cycle = BASE.replace("[[1, 1], [1, 1]]", "[[0, 1], [1, 0]]")
    config = parse_config(two_cycle)
    assert config.measure is None

    explicit = BASE + '\n[measure]\nkind = "explicit"\nstochastic = [[0.5, 0.5], [0.25, 0.75]]\n'
    config = parse_config(explicit)
    assert config.measure_kind is MeasureKind.EXPLICIT
    assert config.measure is not None
    assert parse_error(BASE + '\n[measure]\nkind = "uniform"\n').key == 'measure.kind'


def test_malformed_toml():
    error = parse_error(BASE + "\n[run\n")
    assert error.key == ''


def test_field_and_transfer_sections():
    text = BASE + """
[field]
window = [0, 0]

[field.table]
"1" = [[2.0, 0.0], [0.0, 2.0]]
"2" = [[4.0, 0.0], [0.0, 1.0]]

[transfer]
window = [0, 0]

[transfer.table]
"1" = [[1.0, 0.0], [0.0, 1.0]]
"2" = [[1.0, 0.0], [0.0, 1.0]]
"""
    config = parse_config(text)
    assert np.allclose(config.field.table[(1,)].form, np.eye(2))
    assert np.allclose(config.field.table[(2,)].form, np.diag([2.0, 0.5]))
    assert config.transfer.window == (0, 0)

    error = parse_error(text.replace('"2" = [[4.0, 0.0], [0.0, 1.0]]', '"2" = [[1.0, 0.0], [0.0, -1.0]]'))
    assert error.key == 'field.table.2'


def test_overrides_and_resolved():
    config = parse_config(BASE)
    assert config.with_overrides() is config
    changed = config.with_overrides(seed=5, threads=2, tolerance=1e-6)
    assert (changed.run.seed, changed.run.threads, changed.run.tolerance) == (5, 2, 1e-6)
    assert config.run.seed == 0

    resolved = changed.resolved()
    assert resolved['run']['seed'] == 5
    assert resolved['run']['theta'] == 0.5
    assert resolved['sft']['transitions'] == [[1, 1], [1, 1]]


def test_shipped_configs_parse():
    paths = sorted(CONFIG_DIR.glob("*.toml"))
    assert len(paths) >= 5
    for path in paths:
        config = parse_config(path.read_text(encoding='utf-8'))
        assert config.generator.dimension == 2
