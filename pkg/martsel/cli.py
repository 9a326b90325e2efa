#!/usr/bin/env python3
'''
Command-line front door of the martingale selection engine.

Distributed under the terms of the GNU General Public License v2 or later

    martsel solve  --input point-masses.json --emit-w-tables
    martsel ftap   --input binomial.json --model frictionless --node 1:0
    martsel oracle --input point-masses-conical.json
    martsel verify --input certificate.json

Exit status: 0 solvable / no arbitrage / verified, 2 unsolvable / arbitrage,
1 input, assumption or verification error.
'''

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import (
    List,
    Optional,
    Sequence,
)

import fileformats as ff
from geometry import HardError
from markets import (
    CostModel,
    FrictionlessModel,
    check_certificate,
    check_price_system,
    ftap,
    induced_kabanov,
    model_to_msp,
)
from msp_core import (
    MspInstance,
    VerificationReport,
    build_local_solution,
    compute_W,
    find_failure,
    is_solvable,
    verify_solution,
)
from oracle import (
    compare_with_solver,
    oracle_frictionless_arbitrage,
    oracle_kabanov_arbitrage,
)
from scenario import NodeId

logger = logging.getLogger(__name__)

COMMANDS = ('solve', 'ftap', 'oracle', 'verify')

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NEGATIVE = 2


def errormsg(msg: str):
    sys.stderr.write(f'[martsel] {msg}\n')


@dataclass
class RunConfig:
    command: str
    input: Path
    model: Optional[str] = None
    nodes: List[NodeId] = field(default_factory=list)
    out: Optional[Path] = None
    emit_certificate: Optional[Path] = None
    emit_w_tables: bool = False
    cross_check: bool = False
    dominating: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f'command must be one of {COMMANDS}')
        if self.model is not None and self.model not in ff.MODEL_KINDS:
            raise ValueError(f'model must be one of {ff.MODEL_KINDS}')
        if self.command == 'ftap' and self.model == 'msp':
            raise ValueError('ftap needs a market model, not an msp instance')
        self.input = Path(self.input)
        self.nodes = [NodeId(*n) for n in self.nodes]


def _emit(report: dict, config: RunConfig):
    text = ff.write_json(report, config.out)
    if config.out is None:
        sys.stdout.write(text)


def _certificate_file(kind: str, model, **parts) -> dict:
    return dict(parts, kind=kind, model=ff.model_block(model))


def _solve(config: RunConfig) -> int:
    model = ff.load_model(config.input, config.model)
    inst = model if isinstance(model, MspInstance) else model_to_msp(model)
    table = compute_W(inst)
    report = {'command': 'solve', 'verdict': 'unsolvable'}
    if config.emit_w_tables:
        report['W'] = ff.wtable_block(table)
    if not is_solvable(inst, table):
        level, node = find_failure(inst, table)
        report['failure'] = {'level': level, 'node': ff.node_key(node)}
        _emit(report, config)
        return EXIT_NEGATIVE
    report['verdict'] = 'solvable'
    nodes = config.nodes or inst.tree.leaves()
    solutions = [ff.solution_block(build_local_solution(inst, n, table=table)) for n in nodes]
    report['solutions'] = solutions
    if config.emit_certificate:
        ff.write_json(_certificate_file('solutions', inst, solutions=solutions),
                      config.emit_certificate)
    _emit(report, config)
    return EXIT_OK


def _oracle_arbitrage(model) -> bool:
    if isinstance(model, FrictionlessModel):
        return oracle_frictionless_arbitrage(model)
    if isinstance(model, CostModel):
        model = induced_kabanov(model)
    return oracle_kabanov_arbitrage(model)


def _ftap(config: RunConfig) -> int:
    model = ff.load_model(config.input, config.model)
    if isinstance(model, MspInstance):
        raise ValueError('ftap needs a market model, not an msp instance')
    result = ftap(model, config.nodes or None, dominating=config.dominating)
    report = {'command': 'ftap', 'verdict': result.verdict,
              'robust_certified': result.robust_certified}
    if config.emit_w_tables and result.table is not None:
        report['W'] = ff.wtable_block(result.table)
    if result.arbitrage_free:
        systems = [ff.price_system_block(ps) for ps in result.price_systems]
        report['price_systems'] = systems
        if result.dominating is not None:
            report['dominating'] = ff.model_block(result.dominating)
        certificate = _certificate_file('price_systems', model, price_systems=systems)
    else:
        block = ff.certificate_block(result.certificate)
        report['certificate'] = block
        report['failure'] = block['failure']
        certificate = _certificate_file('arbitrage', model, certificate=block)
    if config.cross_check:
        found = _oracle_arbitrage(model)
        agree = found != result.arbitrage_free
        report['oracle'] = {'arbitrage': found, 'agree': agree}
        if not agree:
            logger.warning('oracle arbitrage search disagrees with the verdict %s', result.verdict)
            errormsg('oracle disagrees; expected only where weak and robust no-arbitrage differ')
    if config.emit_certificate:
        ff.write_json(certificate, config.emit_certificate)
    _emit(report, config)
    return EXIT_OK if result.arbitrage_free else EXIT_NEGATIVE


def _oracle(config: RunConfig) -> int:
    model = ff.load_model(config.input, config.model)
    inst = model if isinstance(model, MspInstance) else model_to_msp(model)
    diff = compare_with_solver(inst)
    report = {
        'command': 'oracle',
        'solver': diff.solver,
        'oracle': {ff.node_key(n): ok for n, ok in sorted(diff.oracle.items())},
        'agree': diff.agree,
        'disagreements': [ff.node_key(n) for n in diff.disagreements()],
    }
    _emit(report, config)
    if not diff.agree:
        errormsg('solver and oracle disagree')
        return EXIT_ERROR
    return EXIT_OK if diff.solver else EXIT_NEGATIVE


def _verify(config: RunConfig) -> int:
    obj = ff.read_json(config.input)
    kind = obj.get('kind')
    model = ff.parse_model(ff.get_field(obj, 'model'))
    report = VerificationReport()
    if kind == 'solutions':
        for block in ff.get_field(obj, 'solutions'):
            inst = model if isinstance(model, MspInstance) else model_to_msp(model)
            s = ff.parse_solution(block, inst.tree, inst.dim)
            report.violations += verify_solution(inst, s).violations
    elif kind == 'price_systems':
        dim = ff.msp_dim(model)
        for block in ff.get_field(obj, 'price_systems'):
            ps = ff.parse_price_system(block, model.tree, dim)
            report.violations += check_price_system(model, ps).violations
    elif kind == 'arbitrage':
        cert = ff.parse_certificate(ff.get_field(obj, 'certificate'), model)
        report = check_certificate(model, cert)
    else:
        raise ff.SchemaError(f'unknown certificate kind {kind!r}')
    _emit({'command': 'verify', 'kind': kind, 'ok': report.ok,
           'violations': [str(v) for v in report.violations]}, config)
    for v in report.violations:
        errormsg(f'violated: {v}')
    return EXIT_OK if report.ok else EXIT_ERROR


def run(config: RunConfig) -> int:
    handler = {'solve': _solve, 'ftap': _ftap, 'oracle': _oracle, 'verify': _verify}
    try:
        return handler[config.command](config)
    except HardError as ex:
        logger.error('internal contradiction: %s', ex)
        errormsg(f'internal error: {ex}')
        return EXIT_ERROR
    except (ValueError, TypeError, OSError) as ex:
        errormsg(str(ex))
        return EXIT_ERROR


def _parse_node(text: str) -> NodeId:
    try:
        return NodeId.parse(text)
    except ValueError as ex:
        raise argparse.ArgumentTypeError(str(ex))


def main(argv: Optional[Sequence[str]] = None) -> int:
    argparser = argparse.ArgumentParser(prog='martsel', description=__doc__,
                                        formatter_class=argparse.RawDescriptionHelpFormatter)
    argparser.add_argument('command', choices=COMMANDS)
    argparser.add_argument('--input', type=Path, required=True, help='JSON input file')
    argparser.add_argument('--model', choices=ff.MODEL_KINDS,
                           help='model type (default: the "model" key of the input)')
    argparser.add_argument('--node', type=_parse_node, action='append', default=[],
                           metavar='LEVEL:INDEX', help='queried node, repeatable (default: leaves)')
    argparser.add_argument('--out', type=Path, help='report file (default: stdout)')
    argparser.add_argument('--emit-certificate', type=Path, metavar='PATH',
                           help='write a self-contained certificate for verify')
    argparser.add_argument('--emit-w-tables', action='store_true', help='include W tables in the report')
    argparser.add_argument('--cross-check', action='store_true',
                           help='compare the ftap verdict with the oracle arbitrage search')
    argparser.add_argument('--dominating', action='store_true',
                           help='construct a dominating model for arbitrage-free Kabanov models')
    argparser.add_argument('-v', '--verbose', action='count', default=0)
    options = argparser.parse_args(argv)

    level = {0: logging.WARNING, 1: logging.INFO}.get(options.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s')

    try:
        config = RunConfig(options.command, options.input, options.model, options.node,
                           options.out, options.emit_certificate, options.emit_w_tables,
                           options.cross_check, options.dominating)
    except ValueError as ex:
        errormsg(str(ex))
        return EXIT_ERROR
    return run(config)


if __name__ == '__main__':
    sys.exit(main())
