"""Experiment files.

An experiment is a TOML document with a ``version = 1`` header and the
sections [sft], [generator], [measure] and [run]; [field], [transfer] and
[generator_b] are optional and feed the ``verify`` command. Window-words are
written as space-separated symbols, e.g. ``"1 2" = [[1, 0], [0, 1]]``.
Generator entries are a matrix, ``{rotation = angle}`` or ``{diagonal = [...]}``.
A rotation conjugated by S (the matrix S R S^-1) is written as a sub-table,
since toml rejects nested arrays inside inline tables::

    [generator.table."1"]
    rotation = 1.0
    conjugator = [[1.0, 0.3], [0.0, 1.0]]
"""
import re
from dataclasses import dataclass, field as dataclass_field, replace
from typing import Any, Optional

import numpy as np
import toml
from loguru import logger

from cocyclerigidity.cocycles.analysis import ConformalField, TransferField
from cocyclerigidity.cocycles.builtin import rotation
from cocyclerigidity.cocycles.cocycle import LocallyConstantGenerator, WindowWord
from cocyclerigidity.cocycles.conformal_geom import ConformalStructure
from cocyclerigidity.configuration.constants import (
    CONFIG_FORMAT_VERSION,
    DEFAULT_LOOP_PERIOD,
    MeasureKind,
)
from cocyclerigidity.symbolic.markov_measure import MarkovMeasure, parry_measure
from cocyclerigidity.symbolic.sft_core import Sft, SymbolicPoint
from cocyclerigidity.utilities.exceptions import CocycleRigidityError, ParseError

RUN_CONFIG_DEFAULTS = {
    'tolerance': 1e-10,
    'seed': 0,
    'threads': 1,
    'N': [1, 2, 3, 4],
    'theta': None,  # tau / 2
    'eps': None,  # theta / 10
    'm_list': [4, 8, 16, 32],
    'period_max': 8,
    'loop_period_max': DEFAULT_LOOP_PERIOD,
    'n_max': 256,
    'samples': 100,
    'trials': 100,
    'auto_block_length': False,
    'points': [],
}

SECTIONS = {'sft', 'generator', 'measure', 'run', 'field', 'transfer', 'generator_b'}


@dataclass(frozen=True)
class RunConfig:
    tolerance: float
    seed: int
    threads: int
    N: tuple[int, ...]
    theta: float
    eps: float
    m_list: tuple[int, ...]
    period_max: int
    loop_period_max: int
    n_max: int
    samples: int
    trials: int
    auto_block_length: bool
    points: tuple[SymbolicPoint, ...] = ()

    def to_dict(self) -> dict:
        return {
            'tolerance': self.tolerance, 'seed': self.seed, 'threads': self.threads, 'N': list(self.N),
            'theta': self.theta, 'eps': self.eps, 'm_list': list(self.m_list),
            'period_max': self.period_max, 'loop_period_max': self.loop_period_max, 'n_max': self.n_max,
            'samples': self.samples, 'trials': self.trials, 'auto_block_length': self.auto_block_length,
            'points': [point_to_dict(p) for p in self.points],
        }


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    sft: Sft
    generator: LocallyConstantGenerator
    measure_kind: MeasureKind
    measure: Optional[MarkovMeasure]
    run: RunConfig
    field: Optional[ConformalField] = None
    transfer: Optional[TransferField] = None
    generator_b: Optional[LocallyConstantGenerator] = None
    document: dict = dataclass_field(default_factory=dict)

    def with_overrides(self, seed: Optional[int] = None, threads: Optional[int] = None,
                       tolerance: Optional[float] = None) -> 'ExperimentConfig':
        """Command line values replace the file's [run] entries"""
        changes = {k: v for k, v in (('seed', seed), ('threads', threads), ('tolerance', tolerance)) if v is not None}
        if not changes:
            return self
        logger.debug(f"Run overrides from the command line: {changes}")
        return replace(self, run=replace(self.run, **changes))

    def resolved(self) -> dict:
        """The full configuration as used, for echoing into reports"""
        document = {key: value for key, value in self.document.items() if key != 'run'}
        document['run'] = self.run.to_dict()
        document['sft'] = {
            'alphabet_size': self.sft.alphabet_size,
            'transitions': [list(row) for row in self.sft.transitions],
            'tau': self.sft.tau,
        }
        return document


def point_to_dict(p: SymbolicPoint) -> dict:
    return {'left': list(p.left_cycle), 'core': list(p.core), 'right': list(p.right_cycle), 'start': p.start}


def word_key(word: WindowWord) -> str:
    return ' '.join(map(str, word))


# -- parsing ----------------------------------------------------------------

class _Source:
    """Line lookup for diagnostics; toml itself does not keep positions"""

    def __init__(self, text: str):
        self.lines = text.splitlines()

    def section(self, name: str) -> Optional[int]:
        pattern = re.compile(rf"^\s*\[\s*{re.escape(name)}\s*\]")
        return next((i + 1 for i, line in enumerate(self.lines) if pattern.match(line)), None)

    def line(self, section: str, key: str) -> Optional[int]:
        sub_table = self.section(f'{section}."{key}"') or self.section(f"{section}.{key}")
        if sub_table is not None:
            return sub_table
        start = self.section(section) or 1
        pattern = re.compile(rf"^\s*\"?{re.escape(key)}\"?\s*=")
        for i in range(start - 1, len(self.lines)):
            if i >= start and re.match(r"^\s*\[[^\[]", self.lines[i]) and not self.lines[i].strip().startswith(f"[{section}."):
                break
            if pattern.match(self.lines[i]):
                return i + 1
        return self.section(section)


def _require(table: dict, key: str, section: str, src: _Source) -> Any:
    if key not in table:
        raise ParseError(src.section(section), f"{section}.{key}", "missing required key")
    return table[key]


def _parse_word(key: str, section: str, src: _Source) -> WindowWord:
    try:
        return tuple(int(s) for s in key.split())
    except ValueError:
        raise ParseError(src.line(section, key), f"{section}.{key}", "window-words are space-separated integers")


def _parse_sft(doc: dict, src: _Source) -> Sft:
    table = _require(doc, 'sft', 'sft', src)
    size = _require(table, 'alphabet_size', 'sft', src)
    rows = _require(table, 'transitions', 'sft', src)
    if not isinstance(size, int) or size < 1:
        raise ParseError(src.line('sft', 'alphabet_size'), 'sft.alphabet_size', "must be a positive integer")
    if not isinstance(rows, list) or len(rows) != size:
        raise ParseError(src.line('sft', 'transitions'), 'sft.transitions', f"expected {size} rows")
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != size:
            raise ParseError(src.line('sft', 'transitions'), f"sft.transitions[{i}]",
                             f"row {i} has {len(row) if isinstance(row, list) else 'no'} entries, expected {size}")
    try:
        return Sft(size, tuple(tuple(row) for row in rows), float(table.get('tau', 1.0)))
    except (CocycleRigidityError, TypeError, ValueError) as e:
        raise ParseError(src.line('sft', 'transitions'), 'sft.transitions', str(e))


def _parse_entry(value: Any, key: str, section: str, src: _Source) -> np.ndarray:
    where = src.line(section, key)
    if isinstance(value, dict):
        if 'rotation' in value:
            R = rotation(float(value['rotation']))
            if 'conjugator' in value:
                S = np.array(value['conjugator'], dtype=float)
                return S @ R @ np.linalg.inv(S)
            return R
        if 'diagonal' in value:
            return np.diag(np.array(value['diagonal'], dtype=float))
        raise ParseError(where, f"{section}.{key}", "entry tables need 'rotation' or 'diagonal'")
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ParseError(where, f"{section}.{key}", "entry is not a numeric matrix")
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ParseError(where, f"{section}.{key}", f"entry has shape {M.shape}, expected a square matrix")
    return M


def _parse_table(doc: dict, section: str, sft: Sft, src: _Source) -> tuple[tuple[int, int], dict]:
    table = _require(doc, section, section, src)
    window = tuple(table.get('window', [0, 0]))
    if len(window) != 2 or window[0] > 0 or window[1] < 0:
        raise ParseError(src.line(section, 'window'), f"{section}.window", "expected [w_minus, w_plus] around 0")
    entries = _require(table, 'table', section, src)
    parsed = {_parse_word(k, f"{section}.table", src): (k, v) for k, v in entries.items()}
    words = sft.window_words(*window)
    valid = set(words)
    missing = [w for w in words if w not in parsed]
    if missing:
        listed = ', '.join(word_key(w) for w in missing[:8])
        raise ParseError(src.section(f"{section}.table"), f"{section}.table", f"missing window-words {listed}")
    invalid = [w for w in parsed if w not in valid]
    if invalid:
        raise ParseError(src.line(f"{section}.table", parsed[invalid[0]][0]), f"{section}.table",
                         f"{word_key(invalid[0])} is not a valid window-word")
    return window, parsed


def _parse_generator(doc: dict, section: str, sft: Sft, src: _Source) -> LocallyConstantGenerator:
    window, parsed = _parse_table(doc, section, sft, src)
    matrices = {w: _parse_entry(v, k, f"{section}.table", src) for w, (k, v) in parsed.items()}
    dimension = doc[section].get('dimension')
    if dimension is not None and any(M.shape[0] != dimension for M in matrices.values()):
        raise ParseError(src.line(section, 'dimension'), f"{section}.dimension",
                         f"entries must be {dimension}x{dimension}")
    try:
        return LocallyConstantGenerator(sft, window, matrices)
    except CocycleRigidityError as e:
        raise ParseError(src.section(f"{section}.table"), f"{section}.table", str(e))


def _parse_measure(doc: dict, sft: Sft, src: _Source) -> tuple[MeasureKind, Optional[MarkovMeasure]]:
    table = doc.get('measure', {'kind': 'parry'})
    try:
        kind = MeasureKind(table.get('kind', 'parry'))
    except ValueError:
        raise ParseError(src.line('measure', 'kind'), 'measure.kind', "expected 'parry' or 'explicit'")
    try:
        if kind is MeasureKind.PARRY:
            return kind, parry_measure(sft)
        stochastic = _require(table, 'stochastic', 'measure', src)
        return kind, MarkovMeasure.from_stochastic(sft, stochastic)
    except CocycleRigidityError as e:
        # the Parry measure only exists on mixing shifts; commands needing it fail later
        if kind is MeasureKind.PARRY:
            logger.warning(f"No measure for this shift: {e}")
            return kind, None
        raise ParseError(src.line('measure', 'stochastic'), 'measure.stochastic', str(e))


def _parse_point(value: Any, index: int, src: _Source) -> SymbolicPoint:
    key = f"run.points[{index}]"
    try:
        if 'periodic' in value:
            return SymbolicPoint.periodic(value['periodic'], value.get('start', 0))
        return SymbolicPoint.build(value['left'], value.get('core', []), value['right'], value.get('start', 0))
    except (KeyError, TypeError, CocycleRigidityError) as e:
        raise ParseError(src.line('run', 'points'), key, f"point needs 'periodic' or 'left'/'right' ({e})")


def _parse_run(doc: dict, sft: Sft, src: _Source) -> RunConfig:
    table = doc.get('run', {})
    unknown = sorted(set(table) - set(RUN_CONFIG_DEFAULTS))
    if unknown:
        raise ParseError(src.line('run', unknown[0]), f"run.{unknown[0]}", "unknown run parameter")
    values = {**RUN_CONFIG_DEFAULTS, **table}
    theta = values['theta'] if values['theta'] is not None else sft.tau / 2
    eps = values['eps'] if values['eps'] is not None else theta / 10
    for key in ('seed', 'threads', 'period_max', 'loop_period_max', 'n_max', 'samples', 'trials'):
        if not isinstance(values[key], int) or values[key] < 0:
            raise ParseError(src.line('run', key), f"run.{key}", "must be a nonnegative integer")
    grid = values['N'] if isinstance(values['N'], list) else [values['N']]
    if not grid or any(not isinstance(n, int) or n < 1 for n in grid):
        raise ParseError(src.line('run', 'N'), 'run.N', "must list positive integers")
    if any(not isinstance(m, int) or m < 1 for m in values['m_list']):
        raise ParseError(src.line('run', 'm_list'), 'run.m_list', "must list positive integers")
    if not 0 < theta:
        raise ParseError(src.line('run', 'theta'), 'run.theta', "must be positive")
    points = tuple(_parse_point(p, i, src) for i, p in enumerate(values['points']))
    for i, p in enumerate(points):
        if not sft.contains(p):
            raise ParseError(src.line('run', 'points'), f"run.points[{i}]", f"{p} is not a point of the shift")
    return RunConfig(
        float(values['tolerance']), values['seed'], values['threads'], tuple(grid), float(theta), float(eps),
        tuple(values['m_list']), values['period_max'], values['loop_period_max'], values['n_max'],
        values['samples'], values['trials'], bool(values['auto_block_length']), points,
    )


def _parse_field(doc: dict, sft: Sft, src: _Source) -> ConformalField:
    window, parsed = _parse_table(doc, 'field', sft, src)
    table = {}
    for w, (k, v) in parsed.items():
        try:
            table[w] = ConformalStructure.normalize(np.array(v, dtype=float))
        except (CocycleRigidityError, ValueError) as e:
            raise ParseError(src.line('field.table', k), f"field.table.{k}", str(e))
    return ConformalField(sft, window, table)


def _parse_transfer(doc: dict, sft: Sft, src: _Source) -> TransferField:
    window, parsed = _parse_table(doc, 'transfer', sft, src)
    matrices = {w: _parse_entry(v, k, 'transfer.table', src) for w, (k, v) in parsed.items()}
    try:
        return TransferField(sft, window, matrices)
    except CocycleRigidityError as e:
        raise ParseError(src.section('transfer.table'), 'transfer.table', str(e))


def parse_config(text: str) -> ExperimentConfig:
    """Validated experiment, or ParseError naming the offending key and line"""
    src = _Source(text)
    try:
        doc = toml.loads(text)
    except toml.TomlDecodeError as e:
        raise ParseError(getattr(e, 'lineno', None), '', e.msg if hasattr(e, 'msg') else str(e))

    version = doc.get('version')
    if version != CONFIG_FORMAT_VERSION:
        raise ParseError(src.line('', 'version'), 'version', f"expected version = {CONFIG_FORMAT_VERSION}, got {version}")
    unknown = sorted(k for k, v in doc.items() if isinstance(v, dict) and k not in SECTIONS)
    if unknown:
        raise ParseError(src.section(unknown[0]), unknown[0], "unknown section")

    sft = _parse_sft(doc, src)
    generator = _parse_generator(doc, 'generator', sft, src)
    measure_kind, measure = _parse_measure(doc, sft, src)
    run = _parse_run(doc, sft, src)
    field_ = _parse_field(doc, sft, src) if 'field' in doc else None
    transfer = _parse_transfer(doc, sft, src) if 'transfer' in doc else None
    generator_b = _parse_generator(doc, 'generator_b', sft, src) if 'generator_b' in doc else None
    if field_ is not None and field_.dimension != generator.dimension:
        raise ParseError(src.section('field'), 'field', "field dimension differs from the generator")

    logger.debug(f"Parsed experiment: {sft.alphabet_size} symbols, d = {generator.dimension}, window {generator.window}")
    return ExperimentConfig(sft, generator, measure_kind, measure, run, field_, transfer, generator_b, doc)
