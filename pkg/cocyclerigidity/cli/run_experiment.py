#!/usr/bin/env python3
"""
Run one command of the cocycle toolkit on an experiment file
"""
import argparse
import json
import sys
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import pandas as pd
from loguru import logger

from cocyclerigidity.basic_utilities.configure_logger import configure_logger
from cocyclerigidity.basic_utilities.parallel import parallel_map
from cocyclerigidity.basic_utilities.settings import artifact_path, get_output_directory_path
from cocyclerigidity.cocycles.analysis import (
    ConstructedField,
    construct_invariant_structure,
    irreducibility_test,
    quasiconformality_report,
    verify_coboundary,
    verify_invariant_field,
)
from cocyclerigidity.cocycles.cocycle import lyapunov_birkhoff, lyapunov_periodic, normalize_unimodular, spectral_norm
from cocyclerigidity.cocycles.conformal_geom import distance, pull
from cocyclerigidity.cocycles.holonomy import (
    BunchingCertificate,
    anchor_structure,
    bunching_membership,
    certify_over_grid,
    certify_uniform_bunching,
    extend_structure,
    fit_holonomy_constant,
    gap_check,
    holonomy,
    random_local_pairs,
    select_anchors,
    uniform_bunching_value,
)
from cocyclerigidity.cocycles.shadowing import (
    Infeasible,
    growth_and_membership_experiment,
    plan_shadowing_experiment,
    select_block_length,
)
from cocyclerigidity.configuration.configuration import ExperimentConfig, parse_config, point_to_dict, word_key
from cocyclerigidity.configuration.constants import (
    COMMAND_NAMES,
    CSV_FLOAT_FORMAT,
    Command,
    ExitCode,
    HolonomyKind,
)
from cocyclerigidity.performance.monitor import PerformanceMonitor
from cocyclerigidity.symbolic.markov_measure import entropy_rate
from cocyclerigidity.symbolic.sft_core import SymbolicPoint, periodic_points_up_to, rho_distance, shift
from cocyclerigidity.utilities.exceptions import CocycleRigidityError, NoCertificateError, ParseError
from cocyclerigidity.version import VERSION

CSV_SCHEMAS = {
    Command.LYAPUNOV: "point, period, lambda_plus, lambda_minus",
    Command.CERTIFY: "N, theta_star, certified (uniform); point, N, witness, in_D (certify_points.csv)",
    Command.HOLONOMY: "kind, y, z, rho, deviation",
    Command.EXTEND: "point, eta_ij..., residual",
    Command.VERIFY: "(JSON only)",
    Command.CONSTRUCT: "word, eta_ij...",
    Command.SHADOW: "m, u_m, log_norm, chi_reference, in_D, N, theta",
    Command.IRREDUCIBLE: "(JSON only)",
    Command.QUASICONFORMAL: "n, log_K, K",
}

Outcome = tuple[ExitCode, dict, dict[str, pd.DataFrame]]


def point_label(p: SymbolicPoint) -> str:
    """left^-inf [core]@start right^inf, symbols space-separated"""
    left, right = ' '.join(map(str, p.left_cycle)), ' '.join(map(str, p.right_cycle))
    return f"({left})[{' '.join(map(str, p.core))}]@{p.start}({right})"


def _plain(value):
    """numpy scalars and arrays to JSON-ready Python values"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, SymbolicPoint):
        return point_to_dict(value)
    return value


def _flatten(prefix: str, M: np.ndarray) -> dict[str, float]:
    d = M.shape[0]
    return {f"{prefix}_{i}{j}": float(M[i, j]) for i in range(d) for j in range(d)}


def _certificate_dict(cert: Optional[BunchingCertificate]) -> Optional[dict]:
    if cert is None:
        return None
    return {'N': cert.N, 'theta': cert.theta, 'scope': cert.scope.value, 'witness': cert.witness, 'tau': cert.tau}


def _require_certificate(config: ExperimentConfig) -> BunchingCertificate:
    cert = certify_over_grid(config.generator, config.run.N)
    if cert is None:
        raise NoCertificateError(f"No uniform bunching certificate over N grid {list(config.run.N)}")
    return cert


# -- commands ---------------------------------------------------------------

@PerformanceMonitor.measure("lyapunov")
def run_lyapunov(config: ExperimentConfig) -> Outcome:
    gen, run = config.generator, config.run
    periodic = periodic_points_up_to(config.sft, run.period_max)
    pairs = parallel_map(lambda item: lyapunov_periodic(gen, *item), periodic, run.threads)
    rows = [
        {'point': point_label(p), 'period': k, 'lambda_plus': pair.lambda_plus, 'lambda_minus': pair.lambda_minus}
        for (p, k), pair in zip(periodic, pairs)
    ]
    report = {'periodic_points': len(rows)}
    if config.measure is not None and run.samples > 0:
        estimate = lyapunov_birkhoff(gen, config.measure, run.n_max, run.samples, run.seed)
        report['birkhoff'] = {'mean': estimate.mean, 'stderr': estimate.stderr, 'n': estimate.n,
                              'samples': estimate.samples}
        report['entropy_rate'] = entropy_rate(config.measure)
    return ExitCode.SUCCESS, report, {'': pd.DataFrame(rows, columns=['point', 'period', 'lambda_plus', 'lambda_minus'])}


@PerformanceMonitor.measure("certify")
def run_certify(config: ExperimentConfig) -> Outcome:
    gen, run = config.generator, config.run
    rows = []
    for N in run.N:
        theta_star = max(uniform_bunching_value(gen, N), 0.0)
        rows.append({'N': N, 'theta_star': theta_star, 'certified': theta_star < config.sft.tau})
    point_rows = []
    for p in run.points:
        for N in run.N:
            member, witness = bunching_membership(gen, p, N, run.theta)
            point_rows.append({'point': point_label(p), 'N': N, 'witness': witness, 'in_D': member})
    gap = gap_check(gen, run.N[0], run.theta, run.eps, run.trials, run.seed, run.period_max)
    report = {
        'certificate': _certificate_dict(certify_uniform_bunching(gen, config.sft, run.N[0])),
        'gap': {'R': gap.R, 'condition_holds': gap.condition_holds, 'trials': gap.trials, 'checked': gap.checked,
                'counterexample': None if gap.counterexample is None else point_to_dict(gap.counterexample)},
    }
    frames = {'': pd.DataFrame(rows, columns=['N', 'theta_star', 'certified'])}
    if point_rows:
        frames['points'] = pd.DataFrame(point_rows, columns=['point', 'N', 'witness', 'in_D'])
    return ExitCode.SUCCESS, report, frames


@PerformanceMonitor.measure("holonomy")
def run_holonomy(config: ExperimentConfig) -> Outcome:
    gen, run = config.generator, config.run
    cert = _require_certificate(config)
    rows, constants = [], {}
    for offset, kind in enumerate(HolonomyKind):
        pairs = random_local_pairs(config.sft, kind, run.samples, run.seed + offset)
        for y, z in pairs:
            deviation = spectral_norm(holonomy(gen, kind, y, z, cert) - np.eye(gen.dimension))
            rows.append({'kind': kind.value, 'y': point_label(y), 'z': point_label(z),
                         'rho': rho_distance(config.sft, y, z), 'deviation': deviation})
        constants[kind.value] = fit_holonomy_constant(gen, pairs, kind, cert)
    report = {'certificate': _certificate_dict(cert), 'lipschitz': constants}
    return ExitCode.SUCCESS, report, {'': pd.DataFrame(rows, columns=['kind', 'y', 'z', 'rho', 'deviation'])}


def _anchors(config: ExperimentConfig, unimodular) -> dict:
    run = config.run
    return {
        symbol: (omega, anchor_structure(unimodular, omega, k, run.loop_period_max))
        for symbol, (omega, k) in select_anchors(unimodular, config.sft, run.period_max).items()
    }


@PerformanceMonitor.measure("extend")
def run_extend(config: ExperimentConfig) -> Outcome:
    gen, run = config.generator, config.run
    unimodular = normalize_unimodular(gen)
    cert = _require_certificate(config)
    anchors = _anchors(config, unimodular)
    points = list(run.points) or [p for p, _ in periodic_points_up_to(config.sft, run.period_max)]

    def row(x: SymbolicPoint) -> dict:
        eta = extend_structure(unimodular, config.sft, anchors, x, cert)
        eta_next = extend_structure(unimodular, config.sft, anchors, shift(x, 1), cert)
        residual = distance(pull(gen.at(x), eta), eta_next)
        return {'point': point_label(x), **_flatten('eta', eta.form), 'residual': residual}

    rows = parallel_map(row, points, run.threads)
    report = {
        'certificate': _certificate_dict(cert),
        'anchors': {str(s): {'point': point_to_dict(omega), 'eta': eta.form} for s, (omega, eta) in anchors.items()},
        'max_residual': max((r['residual'] for r in rows), default=0.0),
    }
    return ExitCode.SUCCESS, report, {'': pd.DataFrame(rows)}


@PerformanceMonitor.measure("verify")
def run_verify(config: ExperimentConfig) -> Outcome:
    if config.field is None and config.transfer is None:
        raise ParseError(None, 'field', "verify needs a [field] or a [transfer] section")
    tolerance = config.run.tolerance
    report = {'tolerance': tolerance}
    passed = True
    if config.field is not None:
        residual = verify_invariant_field(config.generator, config.field)
        report['invariance_residual'] = residual
        passed &= residual <= tolerance
    if config.transfer is not None:
        residual = verify_coboundary(config.generator, config.generator_b, config.transfer)
        report['coboundary_residual'] = residual
        passed &= residual <= tolerance
    report['passed'] = bool(passed)
    return (ExitCode.SUCCESS if passed else ExitCode.OBSTRUCTION), report, {}


@PerformanceMonitor.measure("construct")
def run_construct(config: ExperimentConfig) -> Outcome:
    run = config.run
    result = construct_invariant_structure(config.generator, config.sft, None, run.period_max, run.N,
                                           run.loop_period_max)
    if not isinstance(result, ConstructedField):
        report = {'obstruction': {
            'kind': result.kind.value,
            'point': None if result.point is None else point_to_dict(result.point),
            'value': result.value,
            'detail': result.detail,
        }}
        return ExitCode.OBSTRUCTION, report, {}
    field = result.field
    rows = [{'word': word_key(w), **_flatten('eta', eta.form)} for w, eta in field.table.items()]
    report = {
        'field': {'window': list(field.window), 'table': {word_key(w): eta.form for w, eta in field.table.items()}},
        'residual': result.residual,
        'certificate': _certificate_dict(result.certificate),
        'anchors': {str(s): point_to_dict(omega) for s, (omega, _) in result.anchors.items()},
    }
    return ExitCode.SUCCESS, report, {'': pd.DataFrame(rows)}


SHADOW_COLUMNS = ['m', 'u_m', 'log_norm', 'chi_reference', 'in_D', 'N', 'theta']


@PerformanceMonitor.measure("shadow")
def run_shadow(config: ExperimentConfig) -> Outcome:
    gen, run = config.generator, config.run
    plan = plan_shadowing_experiment(gen, run.theta, run.m_list, run.period_max)
    report = {'vacuous': plan.vacuous, 'precondition_met': plan.precondition_met, 'zeta': plan.zeta}
    if plan.vacuous:
        return ExitCode.SUCCESS, report, {'': pd.DataFrame([], columns=SHADOW_COLUMNS)}
    report.update({'x': point_to_dict(plan.x), 'y': point_to_dict(plan.y), 'k': plan.k,
                   'lambda_x': plan.lambda_x, 'xi': plan.xi, 'y_exponent': plan.y_exponent})
    if isinstance(plan.params, Infeasible):
        report['infeasible'] = plan.params.reason
        return ExitCode.OBSTRUCTION, report, {'': pd.DataFrame([], columns=SHADOW_COLUMNS)}

    params = plan.params
    report['parameters'] = {'b': params.b, 'c': params.c, 'eps': params.eps, 'chi': params.chi}
    N = run.N[0]
    if run.auto_block_length:
        block = select_block_length(gen, plan.x, plan.y, plan.k, params.eps)
        report['block_length'] = {'J': block.J, 'r': block.r, 'L': block.L, 'C': block.C, 't': block.t}
        N = block.N
    rows = growth_and_membership_experiment(gen, plan.specs, N, run.theta, params, run.threads)
    frame = pd.DataFrame([r.__dict__ for r in rows], columns=SHADOW_COLUMNS)
    return ExitCode.SUCCESS, report, {'': frame}


@PerformanceMonitor.measure("irreducible")
def run_irreducible(config: ExperimentConfig) -> Outcome:
    result = irreducibility_test(config.generator, config.run.period_max)
    subspace = result.subspace
    report = {
        'base': point_to_dict(result.base),
        'period_max': result.period_max,
        'loops': result.loops,
        'irreducible': result.irreducible,
        'subspace': None if subspace is None else {
            'basis': subspace.basis, 'pivots': list(subspace.pivots), 'residual': subspace.residual,
        },
    }
    return ExitCode.SUCCESS, report, {}


@PerformanceMonitor.measure("quasiconformal")
def run_quasiconformal(config: ExperimentConfig) -> Outcome:
    run = config.run
    result = quasiconformality_report(config.generator, config.sft, run.n_max, run.period_max, run.samples,
                                      run.seed, config.measure)
    frame = pd.DataFrame({'n': np.arange(1, run.n_max + 1), 'log_K': result.log_K, 'K': result.K})
    report = {'C': result.C, 'eps': result.eps, 'points': result.points,
              'uniformly_quasiconformal': result.uniformly_quasiconformal, 'certified': result.certified}
    return ExitCode.SUCCESS, report, {'': frame}


COMMANDS: dict[Command, Callable[[ExperimentConfig], Outcome]] = {
    Command.LYAPUNOV: run_lyapunov,
    Command.CERTIFY: run_certify,
    Command.HOLONOMY: run_holonomy,
    Command.EXTEND: run_extend,
    Command.VERIFY: run_verify,
    Command.CONSTRUCT: run_construct,
    Command.SHADOW: run_shadow,
    Command.IRREDUCIBLE: run_irreducible,
    Command.QUASICONFORMAL: run_quasiconformal,
}


# -- artifacts --------------------------------------------------------------

def write_json(path: Path, document: dict) -> None:
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(json.dumps(_plain(document), sort_keys=True, indent=2))
        f.write('\n')


def write_csv(path: Path, frame: pd.DataFrame) -> None:
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\n')


def run_command(cmd: Command | str, config: ExperimentConfig, out_dir: Path | str | None = None) -> int:
    """Run one command and write <cmd>.json (plus <cmd>.csv tables); returns the exit code"""
    cmd = Command(cmd)
    out_dir = get_output_directory_path(out_dir)
    document = {'command': cmd.value, 'version': VERSION, 'config': config.resolved()}
    try:
        code, report, frames = COMMANDS[cmd](config)
    except CocycleRigidityError as e:
        logger.error(f"{cmd.value} failed with {e.code}: {e}")
        document['error'] = {'code': e.code, 'message': str(e)}
        document['exit_code'] = ExitCode.ERROR.value
        write_json(artifact_path(out_dir, cmd, 'json'), document)
        return ExitCode.ERROR.value

    document['report'] = report
    document['exit_code'] = code.value
    write_json(artifact_path(out_dir, cmd, 'json'), document)
    for name, frame in frames.items():
        suffix = 'csv' if not name else f"{name}.csv"
        path = artifact_path(out_dir, cmd, 'csv') if not name else out_dir / f"{cmd.value}_{suffix}"
        write_csv(path, frame)
    logger.info(f"{cmd.value} finished with exit code {code.value}")
    return code.value


def build_parser() -> argparse.ArgumentParser:
    schemas = '\n'.join(f"  {cmd.value:<15} {schema}" for cmd, schema in CSV_SCHEMAS.items())
    parser = argparse.ArgumentParser(
        prog='cocycle',
        description="Matrix cocycles over subshifts of finite type: exponents, bunching, holonomies, "
                    "invariant conformal structures and shadowing experiments",
        epilog=f"CSV columns per command:\n{schemas}",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("command", choices=COMMAND_NAMES, help="Command to run")
    parser.add_argument("--config", required=True, help="Path to the TOML experiment file")
    parser.add_argument("--out", default="results", help="Output directory for artifacts")
    parser.add_argument("--seed", type=int, help="Override run.seed")
    parser.add_argument("--threads", type=int, help="Override run.threads")
    parser.add_argument("--tolerance", type=float, help="Override run.tolerance")
    parser.add_argument("--log-level", default="INFO", help="CRITICAL, ERROR, WARNING, INFO, DEBUG or TRACE")
    parser.add_argument("--log-file", action="store_true", help="Also log to <out>/logs at DEBUG level")
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logger(log_to_file=args.log_file, output_directory=Path(args.out), level=args.log_level)

    try:
        text = Path(args.config).read_text(encoding='utf-8')
        config = parse_config(text).with_overrides(args.seed, args.threads, args.tolerance)
    except OSError as e:
        logger.error(f"Cannot read {args.config}: {e}")
        return ExitCode.ERROR.value
    except ParseError as e:
        logger.error(f"{args.config}: {e}")
        return ExitCode.ERROR.value

    monitor = PerformanceMonitor().start()
    try:
        return run_command(args.command, config, args.out)
    finally:
        monitor.stop()


if __name__ == "__main__":
    sys.exit(main())
