'''
JSON readers and writers for trees, MSP instances, market models, reports
and certificates.

Distributed under the terms of the GNU General Public License v2 or later

All numbers are integers or "p/q" strings; floats are rejected on input and
never written. Node maps are keyed "LEVEL:INDEX", with an optional
"default" entry for every node not listed.
'''

import json
import logging
from contextlib import contextmanager
from fractions import Fraction
from pathlib import Path
from typing import (
    Any,
    Dict,
    List,
    Mapping,
    Optional,
    Sequence,
    Union,
)

from geometry import ClosureViolation, SemiOpenPolyhedron, closed, relatively_open
from markets import (
    ArbitrageCertificate,
    CostFunction,
    CostModel,
    Decomposition,
    FrictionlessModel,
    KabanovModel,
    Model,
    PriceSystem,
    Strategy,
)
from msp_core import MspInstance, Solution, WTable
from polyhedron import Polyhedron
from rational import Q, Vector, fmt, fmt_vector
from scenario import FiniteMeasure, NodeId, ScenarioTree

logger = logging.getLogger(__name__)

MODEL_KINDS = ('msp', 'frictionless', 'kabanov', 'cost')
RELATIONS = ('>=', '=')


class SchemaError(ValueError):
    pass


_where: List[str] = []


@contextmanager
def _at(key):
    _where.append(str(key))
    try:
        yield
    finally:
        _where.pop()


def _fail(msg: str):
    where = '.'.join(_where)
    raise SchemaError(f'{where}: {msg}' if where else msg)


def get_field(obj: Mapping, key: str, default=...):
    if not isinstance(obj, Mapping):
        _fail(f'expected an object, got {type(obj).__name__}')
    if key not in obj:
        if default is ...:
            _fail(f'missing key "{key}"')
        return default
    return obj[key]


def read_json(path: Union[str, Path]) -> dict:
    with open(path) as handle:
        try:
            return json.load(handle)
        except json.JSONDecodeError as ex:
            raise SchemaError(f'{path}: {ex}') from None


def write_json(data: Any, path: Optional[Union[str, Path]] = None) -> str:
    text = json.dumps(data, sort_keys=True, indent=2) + '\n'
    if path is not None:
        Path(path).write_text(text)
    return text


# scalars and node maps


def parse_scalar(value) -> Fraction:
    try:
        return Q(value)
    except (TypeError, ValueError, ZeroDivisionError) as ex:
        _fail(f'not an exact rational: {value!r} ({ex})')


def parse_vector(values, dim: Optional[int] = None) -> Vector:
    if not isinstance(values, list):
        _fail(f'expected a list of rationals, got {values!r}')
    v = tuple(parse_scalar(c) for c in values)
    if dim is not None and len(v) != dim:
        _fail(f'expected {dim} coordinates, got {len(v)}')
    return v


def parse_node(text) -> NodeId:
    try:
        return NodeId.parse(text)
    except (ValueError, AttributeError) as ex:
        _fail(str(ex))


def parse_node_map(obj, tree: ScenarioTree, parse, required: bool = True) -> Dict[NodeId, Any]:
    '''Apply parse to every entry; "default" fills the nodes not listed'''
    if not isinstance(obj, Mapping):
        _fail('expected an object keyed by node')
    out = {}
    for key, value in obj.items():
        if key == 'default':
            continue
        with _at(key):
            n = parse_node(key)
            if n not in tree:
                _fail('no such node in the tree')
            out[n] = parse(value)
    if 'default' in obj:
        with _at('default'):
            value = obj['default']
            for n in tree.nodes():
                if n not in out:
                    out[n] = parse(value)
    elif required:
        missing = [str(n) for n in tree.nodes() if n not in out]
        if missing:
            _fail(f'missing nodes {missing}')
    return out


def node_key(n: NodeId) -> str:
    return str(n)


def vector_map(values: Mapping[NodeId, Sequence[Fraction]]) -> Dict[str, List[str]]:
    return {node_key(n): fmt_vector(v) for n, v in sorted(values.items())}


def scalar_map(values: Mapping[NodeId, Fraction]) -> Dict[str, str]:
    return {node_key(n): fmt(v) for n, v in sorted(values.items())}


# trees and measures


def parse_tree(obj) -> ScenarioTree:
    with _at('tree'):
        if isinstance(obj, Mapping) and 'branching' in obj:
            try:
                return ScenarioTree.from_branching([int(b) for b in obj['branching']])
            except ValueError as ex:
                _fail(str(ex))
        levels = get_field(obj, 'levels')
        if not isinstance(levels, list) or not levels:
            _fail('"levels" must be a nonempty list')
        parents, labels = [], []
        for t, level in enumerate(levels):
            with _at(t):
                if not isinstance(level, list):
                    _fail('level must be a list of nodes')
                parents.append([get_field(node, 'parent') for node in level])
                labels.append([get_field(node, 'label', None) for node in level])
        try:
            return ScenarioTree(parents, labels)
        except ValueError as ex:
            _fail(str(ex))


def tree_block(tree: ScenarioTree) -> dict:
    levels = []
    for parents, labels in zip(tree.parent_lists(), tree.labels()):
        levels.append([{'parent': p, 'label': label} for p, label in zip(parents, labels)])
    return {'levels': levels}


def parse_measure(obj, tree: ScenarioTree) -> FiniteMeasure:
    weights = parse_node_map(obj, tree, parse_scalar, required=False)
    try:
        return FiniteMeasure(tree, weights)
    except ValueError as ex:
        _fail(str(ex))


def measure_block(Q: FiniteMeasure) -> Dict[str, str]:
    return scalar_map(Q.weights)


# polyhedra


def _parse_rows(obj, dim: int):
    ineqs, eqs = [], []
    for i, row in enumerate(get_field(obj, 'inequalities', [])):
        with _at(i):
            a = parse_vector(get_field(row, 'normal'), dim)
            b = parse_scalar(get_field(row, 'offset', 0))
            relation = get_field(row, 'relation', '>=')
            if relation not in RELATIONS:
                _fail(f'relation must be one of {RELATIONS}')
            (ineqs if relation == '>=' else eqs).append((a, b))
    return ineqs, eqs


def parse_polyhedron(obj, dim: int) -> Polyhedron:
    '''A closed block: "h", "v" or the "cone" shorthand'''
    if not isinstance(obj, Mapping):
        _fail('expected a polyhedron block')
    if 'dim' in obj and obj['dim'] != dim:
        _fail(f'block of dimension {obj["dim"]}, expected {dim}')
    if 'cone' in obj:
        with _at('cone'):
            return Polyhedron.cone(dim, rays=[parse_vector(r, dim) for r in obj['cone']])
    if 'ray' in obj:
        with _at('ray'):
            return Polyhedron.cone(dim, rays=[parse_vector(obj['ray'], dim)])
    if 'h' in obj:
        with _at('h'):
            ineqs, eqs = _parse_rows(obj['h'], dim)
            return Polyhedron.from_h(dim, ineqs, eqs)
    if 'v' in obj:
        with _at('v'):
            v = obj['v']
            return Polyhedron.from_v(
                dim,
                [parse_vector(p, dim) for p in get_field(v, 'points', [])],
                [parse_vector(r, dim) for r in get_field(v, 'rays', [])],
                [parse_vector(r, dim) for r in get_field(v, 'lineality', [])])
    if obj.get('empty'):
        return Polyhedron.empty(dim)
    if obj.get('whole'):
        return Polyhedron.whole(dim)
    _fail('block needs one of "h", "v", "cone", "ray", "empty", "whole"')


def _parse_faces(obj, P: Polyhedron, dim: int) -> SemiOpenPolyhedron:
    '''"tight" lists index the block's own ">=" rows'''
    ineqs, eqs = _parse_rows(obj['h'], dim)
    flags = {}
    for i, entry in enumerate(obj['faces']):
        with _at('faces'), _at(i):
            tight = set(get_field(entry, 'tight'))
            if not tight <= set(range(len(ineqs))):
                _fail(f'tight indices {sorted(tight)} out of range')
            face = Polyhedron.from_h(
                dim, [r for k, r in enumerate(ineqs) if k not in tight],
                eqs + [r for k, r in enumerate(ineqs) if k in tight])
            if face.is_empty:
                _fail(f'rows {sorted(tight)} do not describe a face')
            canonical = P.tight_set(face.face_point(face.top_face))
            flags[canonical] = bool(get_field(entry, 'included'))
    try:
        return SemiOpenPolyhedron.from_flags(P, flags)
    except ClosureViolation as ex:
        _fail(f'flags do not describe a convex set: {ex}')


def parse_set(obj, dim: int) -> SemiOpenPolyhedron:
    P = parse_polyhedron(obj, dim)
    if 'ray' in obj:
        return relatively_open(P)
    if 'faces' in obj:
        if 'h' not in obj:
            _fail('"faces" needs an "h" description')
        return _parse_faces(obj, P, dim)
    mode = obj.get('open', 'none')
    if mode == 'relative':
        return relatively_open(P)
    if mode != 'none':
        _fail(f'"open" must be "relative" or "none", got {mode!r}')
    return closed(P)


def polyhedron_block(P: Polyhedron) -> dict:
    d = P.describe()
    return {
        'dim': P.dim,
        'h': {'inequalities': d['inequalities']},
        'v': {'points': d['points'], 'rays': d['rays'], 'lineality': d['lineality']},
    }


def set_block(S: SemiOpenPolyhedron) -> dict:
    out = polyhedron_block(S.closure)
    if S.is_empty:
        out['empty'] = True
    out['faces'] = [{'tight': sorted(F), 'included': S.included[F]} for F in S.closure.faces()]
    return out


# instances and models


def parse_instance(obj) -> MspInstance:
    tree = parse_tree(get_field(obj, 'tree'))
    dim = get_field(obj, 'dim')
    with _at('V'):
        V = parse_node_map(get_field(obj, 'V'), tree, lambda b: parse_set(b, dim))
    with _at('C'):
        C = parse_node_map(obj.get('C', {}), tree, lambda b: parse_polyhedron(b, dim),
                           required=False)
    return MspInstance(tree, V, C, dim, conical=bool(obj.get('conical', False)))


def instance_block(inst: MspInstance) -> dict:
    return {
        'model': 'msp',
        'dim': inst.dim,
        'conical': inst.conical,
        'tree': tree_block(inst.tree),
        'V': {node_key(n): set_block(S) for n, S in sorted(inst.V.items())},
        'C': {node_key(n): polyhedron_block(P) for n, P in sorted(inst.C.items())},
    }


def _parse_A(obj, tree: ScenarioTree, dim: int) -> Dict[NodeId, Polyhedron]:
    with _at('A'):
        return parse_node_map(obj.get('A', {}), tree, lambda b: parse_polyhedron(b, dim),
                              required=False)


def parse_cost_function(obj, dim: int) -> CostFunction:
    if not isinstance(obj, list):
        _fail('cost function must be a list of pieces')
    pieces = []
    for i, piece in enumerate(obj):
        with _at(i):
            pieces.append((parse_vector(get_field(piece, 'slope'), dim),
                           parse_scalar(get_field(piece, 'intercept', 0))))
    return CostFunction(pieces)


def cost_function_block(f: CostFunction) -> List[dict]:
    return [{'slope': fmt_vector(a), 'intercept': fmt(b)} for a, b in f.pieces]


def parse_model(obj) -> Union[MspInstance, Model]:
    kind = get_field(obj, 'model')
    if kind not in MODEL_KINDS:
        _fail(f'"model" must be one of {MODEL_KINDS}, got {kind!r}')
    if kind == 'msp':
        return parse_instance(obj)
    tree = parse_tree(get_field(obj, 'tree'))
    if kind == 'frictionless':
        d = get_field(obj, 'assets')
        with _at('prices'):
            prices = parse_node_map(get_field(obj, 'prices'), tree, lambda v: parse_vector(v, d))
        return FrictionlessModel(tree, prices, _parse_A(obj, tree, d))
    if kind == 'kabanov':
        d = get_field(obj, 'dim')
        with _at('K'):
            K = parse_node_map(get_field(obj, 'K'), tree, lambda b: parse_polyhedron(b, d))
        return KabanovModel(tree, K, _parse_A(obj, tree, d))
    d = get_field(obj, 'assets')
    with _at('S'):
        S = parse_node_map(get_field(obj, 'S'), tree, lambda b: parse_cost_function(b, d))
    return CostModel(tree, S, _parse_A(obj, tree, d))


def model_block(m: Union[MspInstance, Model]) -> dict:
    if isinstance(m, MspInstance):
        return instance_block(m)
    A = {node_key(n): polyhedron_block(P) for n, P in sorted(m.A.items())}
    if isinstance(m, FrictionlessModel):
        return {'model': 'frictionless', 'assets': m.assets, 'tree': tree_block(m.tree),
                'prices': vector_map(m.prices), 'A': A}
    if isinstance(m, KabanovModel):
        return {'model': 'kabanov', 'dim': m.dim, 'tree': tree_block(m.tree),
                'K': {node_key(n): polyhedron_block(P) for n, P in sorted(m.K.items())},
                'A': A}
    return {'model': 'cost', 'assets': m.assets, 'tree': tree_block(m.tree),
            'S': {node_key(n): cost_function_block(f) for n, f in sorted(m.S.items())},
            'A': A}


def load_model(path: Union[str, Path], kind: Optional[str] = None) -> Union[MspInstance, Model]:
    obj = read_json(path)
    if kind is not None and isinstance(obj, Mapping):
        declared = obj.get('model', kind)
        if declared != kind:
            raise SchemaError(f'{path}: file holds a "{declared}" model, not "{kind}"')
        obj = dict(obj, model=kind)
    try:
        return parse_model(obj)
    except SchemaError as ex:
        raise SchemaError(f'{path}: {ex}') from None


# results


def solution_block(s: Solution) -> dict:
    return {'anchor': node_key(s.anchor), 'xi': vector_map(s.xi), 'Q': measure_block(s.Q)}


def parse_solution(obj, tree: ScenarioTree, dim: int) -> Solution:
    anchor = parse_node(get_field(obj, 'anchor'))
    with _at('xi'):
        xi = parse_node_map(get_field(obj, 'xi'), tree, lambda v: parse_vector(v, dim), required=False)
    with _at('Q'):
        Q_ = parse_measure(get_field(obj, 'Q'), tree)
    return Solution(xi, Q_, anchor)


def price_system_block(ps: PriceSystem) -> dict:
    out = solution_block(ps.solution)
    if ps.P is not None:
        out['P'] = measure_block(ps.P)
    if ps.prices is not None:
        out['prices'] = vector_map(ps.prices)
    return out


def parse_price_system(obj, tree: ScenarioTree, dim: int) -> PriceSystem:
    s = parse_solution(obj, tree, dim)
    ps = PriceSystem(s.xi, s.Q, s.anchor)
    if 'P' in obj:
        with _at('P'):
            ps.P = parse_measure(obj['P'], tree)
    if 'prices' in obj:
        with _at('prices'):
            ps.prices = parse_node_map(obj['prices'], tree, lambda v: parse_vector(v, dim - 1),
                                       required=False)
    return ps


def strategy_block(s: Strategy) -> dict:
    return {'initial': fmt(s.initial), 'model': s.model, 'h': vector_map(s.h)}


def parse_strategy(obj, tree: ScenarioTree, dim: int) -> Strategy:
    with _at('h'):
        h = parse_node_map(get_field(obj, 'h'), tree, lambda v: parse_vector(v, dim), required=False)
    return Strategy(h, parse_scalar(obj.get('initial', 0)), obj.get('model', ''))


def decomposition_block(d: Decomposition) -> dict:
    return {'root': node_key(d.root), 'z': fmt_vector(d.z), 'k': vector_map(d.k),
            'rest': vector_map(d.rest), 'slack': [node_key(n) for n in d.slack]}


def parse_decomposition(obj, tree: ScenarioTree, dim: int) -> Decomposition:
    vec = lambda v: parse_vector(v, dim)
    with _at('k'):
        k = parse_node_map(get_field(obj, 'k'), tree, vec, required=False)
    with _at('rest'):
        rest = parse_node_map(get_field(obj, 'rest'), tree, vec, required=False)
    return Decomposition(parse_node(get_field(obj, 'root')), vec(get_field(obj, 'z')), k, rest,
                         [parse_node(n) for n in obj.get('slack', [])])


def _strategy_dim(m: Model) -> int:
    if isinstance(m, KabanovModel):
        return m.dim
    return m.assets


def certificate_block(cert: ArbitrageCertificate) -> dict:
    out = {
        'witness': node_key(cert.witness),
        'failure': node_key(cert.failure),
        'separator': fmt_vector(cert.separator),
        'strategy': strategy_block(cert.strategy),
    }
    if cert.payoffs:
        out['payoffs'] = scalar_map(cert.payoffs)
    if cert.weak_payoffs:
        out['weak_payoffs'] = scalar_map(cert.weak_payoffs)
    if cert.terminal:
        out['terminal'] = vector_map(cert.terminal)
    if cert.decomposition is not None:
        out['decomposition'] = decomposition_block(cert.decomposition)
    if cert.dominating is not None:
        out['dominating'] = {node_key(n): polyhedron_block(P)
                             for n, P in sorted(cert.dominating.items())}
    if cert.dominating_costs is not None:
        out['dominating_costs'] = {node_key(n): cost_function_block(f)
                                   for n, f in sorted(cert.dominating_costs.items())}
    if cert.strict_side is not None:
        out['strict_side'] = cert.strict_side
    return out


def parse_certificate(obj, m: Model) -> ArbitrageCertificate:
    tree = m.tree
    d = _strategy_dim(m)
    sep = get_field(obj, 'separator')
    cert = ArbitrageCertificate(
        parse_strategy(get_field(obj, 'strategy'), tree, d),
        parse_node(get_field(obj, 'witness')),
        parse_node(get_field(obj, 'failure')),
        parse_vector(sep),
        strict_side=obj.get('strict_side'))
    kdim = len(cert.separator)
    if 'payoffs' in obj:
        with _at('payoffs'):
            cert.payoffs = parse_node_map(obj['payoffs'], tree, parse_scalar, required=False)
    if 'weak_payoffs' in obj:
        with _at('weak_payoffs'):
            cert.weak_payoffs = parse_node_map(obj['weak_payoffs'], tree, parse_scalar,
                                               required=False)
    if 'terminal' in obj:
        with _at('terminal'):
            cert.terminal = parse_node_map(obj['terminal'], tree,
                                           lambda v: parse_vector(v, d), required=False)
    if 'decomposition' in obj:
        with _at('decomposition'):
            cert.decomposition = parse_decomposition(obj['decomposition'], tree, kdim)
    if 'dominating' in obj:
        with _at('dominating'):
            cert.dominating = parse_node_map(obj['dominating'], tree,
                                             lambda b: parse_polyhedron(b, kdim))
    if 'dominating_costs' in obj:
        with _at('dominating_costs'):
            cert.dominating_costs = parse_node_map(obj['dominating_costs'], tree,
                                                   lambda b: parse_cost_function(b, d))
    return cert


def wtable_block(table: WTable) -> dict:
    out = {'W': {node_key(n): set_block(S) for n, S in sorted(table.W.items())}}
    for name in ('sharp', 'flat', 'target'):
        part = getattr(table, name)
        if part:
            out[name] = {node_key(n): set_block(S) for n, S in sorted(part.items())}
    return out


def msp_dim(m: Union[MspInstance, Model]) -> int:
    '''Ambient dimension of the martingale selection problem of m'''
    if isinstance(m, MspInstance):
        return m.dim
    if isinstance(m, KabanovModel):
        return m.dim
    return m.assets + 1
