"""
Text formats for datasets and models

Dataset: one instance per line, comma-separated non-negative integers.
Schema: one line of comma-separated arities.
Markov network:
    MN <n>
    <arity>,<arity>,...
    <weight> <var>=<val>,<var>=<val>,...      (one feature per line)
Dependency network:
    DN <n>
    <arity>,<arity>,...
    <term>                                    (one per variable, in order)
  where a term is (split <var>=<val> <term> <term>), (leaf p0 p1 ...) or
  (lr bias <b> <var>:<w> ...).
Weights and probabilities are written with repr, the shortest decimal that
reads back to the same float.
"""
import json
import logging
import os
import re
import tempfile
from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional, Tuple

from models.cpd import LrCPD, TreeCPD, TreeLeaf, TreeSplit
from models.dataset import Dataset, infer_schema
from models.dependency_network import DependencyNetwork
from models.errors import MarkovNetError, ParseError
from models.markov_network import (
    ConjunctiveFeature, MarkovNetwork, Schema, VariableTest, WeightedFeature, canonicalize_feature
)

logger = logging.getLogger(__name__)

MANIFEST_SUFFIX = '.manifest.json'


def atomic_write(path: str, text: str):
    """Write text to path through a temporary file in the same directory"""
    directory = os.path.dirname(os.path.abspath(path))
    handle, temporary = tempfile.mkstemp(dir=directory, prefix='.tmp-', suffix=os.path.basename(path))
    try:
        with os.fdopen(handle, 'w') as f:
            f.write(text)
        os.replace(temporary, path)
    except BaseException:
        if os.path.exists(temporary):
            os.remove(temporary)
        raise


def _read_lines(path: str) -> List[str]:
    with open(path, 'r') as f:
        return f.read().splitlines()


def _parse_int_list(text: str, line: int, what: str) -> List[int]:
    values = []
    column = 1
    for token in text.split(','):
        stripped = token.strip()
        if not re.fullmatch(r'\d+', stripped):
            raise ParseError(f"Expected a non-negative integer {what}, got {stripped!r}", line, column)
        values.append(int(stripped))
        column += len(token) + 1
    return values


def load_schema(path: str) -> Schema:
    lines = [(number, text) for number, text in enumerate(_read_lines(path), 1) if text.strip()]
    if len(lines) != 1:
        raise ParseError(f"Schema file {path} must hold exactly one line of arities")
    number, text = lines[0]
    try:
        return Schema(tuple(_parse_int_list(text, number, 'arity')))
    except ParseError:
        raise
    except MarkovNetError as e:
        raise ParseError(str(e), number) from e


def load_dataset(path: str, schema_path: Optional[str] = None) -> Dataset:
    """Read a comma-separated dataset; blank lines are skipped"""
    schema = load_schema(schema_path) if schema_path else None

    rows = []
    width = None
    for number, text in enumerate(_read_lines(path), 1):
        if not text.strip():
            continue
        values = _parse_int_list(text, number, 'value')
        if width is None:
            width = len(values)
        if len(values) != width:
            raise ParseError(f"Row has {len(values)} values, earlier rows have {width}", number)
        if schema is not None:
            if len(values) != len(schema):
                raise ParseError(f"Row has {len(values)} values, schema has {len(schema)} variables", number)
            for var, val in enumerate(values):
                if val >= schema.arities[var]:
                    raise ParseError(f"Value {val} outside arity {schema.arities[var]} of variable {var}", number)
        rows.append(values)

    if schema is None:
        schema = infer_schema(rows)
    logger.info(f"Loaded {len(rows)} rows over {len(schema)} variables from {path}")
    return Dataset(schema, rows)


def format_dataset(data: Dataset) -> str:
    return ''.join(','.join(str(int(v)) for v in row) + '\n' for row in data.rows)


def save_dataset(path: str, data: Dataset):
    atomic_write(path, format_dataset(data))


def save_schema(path: str, schema: Schema):
    atomic_write(path, ','.join(str(a) for a in schema.arities) + '\n')


def _header(kind: str, schema: Schema) -> str:
    return f"{kind} {len(schema)}\n" + ','.join(str(a) for a in schema.arities) + '\n'


def _parse_header(lines: List[str], kind: str) -> Schema:
    if not lines:
        raise ParseError(f"Missing '{kind} <n>' header", 1)
    parts = lines[0].split()
    if len(parts) != 2 or parts[0] != kind or not parts[1].isdigit():
        raise ParseError(f"Expected header '{kind} <n>', got {lines[0]!r}", 1)
    if len(lines) < 2:
        raise ParseError("Missing arity line", 2)
    arities = _parse_int_list(lines[1], 2, 'arity')
    if len(arities) != int(parts[1]):
        raise ParseError(f"Header declares {parts[1]} variables, arity line has {len(arities)}", 2)
    try:
        return Schema(tuple(arities))
    except MarkovNetError as e:
        raise ParseError(str(e), 2) from e


def format_mn(mn: MarkovNetwork) -> str:
    lines = [_header('MN', mn.schema)]
    for wf in mn.features:
        lines.append(f"{wf.weight!r} {wf.feature}\n")
    return ''.join(lines)


def save_mn(path: str, mn: MarkovNetwork):
    atomic_write(path, format_mn(mn))


def parse_mn(text: str) -> MarkovNetwork:
    lines = text.splitlines()
    schema = _parse_header(lines, 'MN')
    features = []
    for number, line in enumerate(lines[2:], 3):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError("Expected '<weight> <var>=<val>,...'", number)
        try:
            weight = float(parts[0])
        except ValueError:
            raise ParseError(f"Invalid weight {parts[0]!r}", number, 1)
        tests = []
        for token in parts[1].split(','):
            match = re.fullmatch(r'(\d+)=(\d+)', token)
            if not match:
                raise ParseError(f"Invalid test {token!r}", number, len(parts[0]) + 2)
            tests.append(VariableTest(int(match.group(1)), int(match.group(2))))
        try:
            feature = canonicalize_feature(tests, schema)
            if not isinstance(feature, ConjunctiveFeature):
                raise ParseError(f"Feature {parts[1]} is contradictory", number)
            features.append(WeightedFeature(weight, feature))
        except ParseError:
            raise
        except MarkovNetError as e:
            raise ParseError(str(e), number) from e
    return MarkovNetwork(schema, features)


def load_mn(path: str) -> MarkovNetwork:
    with open(path, 'r') as f:
        mn = parse_mn(f.read())
    logger.info(f"Loaded Markov network with {len(mn)} features from {path}")
    return mn


def _format_tree(node) -> str:
    if isinstance(node, TreeLeaf):
        return '(leaf ' + ' '.join(repr(float(p)) for p in node.distribution) + ')'
    return f"(split {node.test} {_format_tree(node.true_branch)} {_format_tree(node.false_branch)})"


def _format_cpd(cpd) -> str:
    if isinstance(cpd, LrCPD):
        terms = ''.join(f" {var}:{w!r}" for var, w in cpd.weights.items())
        return f"(lr bias {cpd.bias!r}{terms})"
    return _format_tree(cpd.root)


def format_dn(dn: DependencyNetwork) -> str:
    return _header('DN', dn.schema) + ''.join(_format_cpd(cpd) + '\n' for cpd in dn.cpds)


def save_dn(path: str, dn: DependencyNetwork):
    atomic_write(path, format_dn(dn))


class _TermReader:
    """Tokens of the parenthesized CPD terms with their line and column"""

    TOKEN = re.compile(r'\(|\)|[^\s()]+')

    def __init__(self, lines: List[str], first_line: int):
        self.tokens: List[Tuple[str, int, int]] = []
        for number, line in enumerate(lines, first_line):
            for match in self.TOKEN.finditer(line):
                self.tokens.append((match.group(), number, match.start() + 1))
        self.position = 0
        self.end = (first_line + len(lines), 1)

    def at_end(self) -> bool:
        return self.position >= len(self.tokens)

    def peek(self) -> Tuple[str, int, int]:
        if self.at_end():
            return '', self.end[0], self.end[1]
        return self.tokens[self.position]

    def next(self, what: str) -> Tuple[str, int, int]:
        if self.at_end():
            raise ParseError(f"Unexpected end of file, expected {what}", *self.end)
        token = self.tokens[self.position]
        self.position += 1
        return token

    def expect(self, literal: str):
        token, line, column = self.next(f"'{literal}'")
        if token != literal:
            raise ParseError(f"Expected '{literal}', got {token!r}", line, column)

    def number(self, what: str) -> float:
        token, line, column = self.next(what)
        try:
            return float(token)
        except ValueError:
            raise ParseError(f"Expected {what}, got {token!r}", line, column)


def _read_tree(reader: _TermReader):
    reader.expect('(')
    keyword, line, column = reader.next("'split' or 'leaf'")
    if keyword == 'leaf':
        probabilities = []
        while reader.peek()[0] != ')':
            probabilities.append(reader.number('a probability'))
        reader.expect(')')
        try:
            return TreeLeaf(probabilities)
        except ValueError as e:
            raise ParseError(str(e), line, column) from e
    if keyword == 'split':
        token, test_line, test_column = reader.next('a split test')
        match = re.fullmatch(r'(\d+)=(\d+)', token)
        if not match:
            raise ParseError(f"Invalid split test {token!r}", test_line, test_column)
        true_branch = _read_tree(reader)
        false_branch = _read_tree(reader)
        reader.expect(')')
        return TreeSplit(VariableTest(int(match.group(1)), int(match.group(2))), true_branch, false_branch)
    raise ParseError(f"Unknown term {keyword!r}", line, column)


def _read_lr(reader: _TermReader, schema: Schema, target: int) -> LrCPD:
    reader.expect('(')
    reader.expect('lr')
    reader.expect('bias')
    bias = reader.number('the bias')
    weights: Dict[int, float] = {}
    while reader.peek()[0] != ')':
        token, line, column = reader.next('a weight')
        match = re.fullmatch(r'(\d+):(\S+)', token)
        if not match:
            raise ParseError(f"Invalid weight term {token!r}", line, column)
        try:
            weights[int(match.group(1))] = float(match.group(2))
        except ValueError:
            raise ParseError(f"Invalid weight term {token!r}", line, column)
    reader.expect(')')
    return LrCPD(schema, target, bias, weights)


def parse_dn(text: str) -> DependencyNetwork:
    lines = text.splitlines()
    schema = _parse_header(lines, 'DN')
    reader = _TermReader(lines[2:], 3)
    cpds = []
    for target in range(len(schema)):
        _, line, column = reader.peek()
        is_lr = reader.position + 1 < len(reader.tokens) and reader.tokens[reader.position + 1][0] == 'lr'
        try:
            if is_lr:
                cpds.append(_read_lr(reader, schema, target))
            else:
                cpds.append(TreeCPD(schema, target, _read_tree(reader)))
        except ParseError:
            raise
        except MarkovNetError as e:
            raise ParseError(f"CPD {target}: {e}", line, column) from e
    if not reader.at_end():
        _, line, column = reader.peek()
        raise ParseError(f"Expected {len(schema)} CPDs, found more", line, column)
    return DependencyNetwork(schema, cpds)


def load_dn(path: str) -> DependencyNetwork:
    with open(path, 'r') as f:
        dn = parse_dn(f.read())
    logger.info(f"Loaded {dn.kind} dependency network over {len(dn.schema)} variables from {path}")
    return dn


def load_model(path: str):
    """Load either model kind by its header"""
    with open(path, 'r') as f:
        first = f.readline().split()
    kind = first[0] if first else ''
    if kind == 'MN':
        return load_mn(path)
    if kind == 'DN':
        return load_dn(path)
    raise ParseError(f"Unknown model header {kind!r} in {path}; expected MN or DN", 1, 1)


def save_model(path: str, model):
    if isinstance(model, DependencyNetwork):
        save_dn(path, model)
    else:
        save_mn(path, model)


@dataclass
class RunManifest:
    """What a command read, how it was configured and how long it took"""
    command: str
    inputs: Dict[str, str] = field(default_factory=dict)
    hyperparameters: Dict[str, object] = field(default_factory=dict)
    seed: int = 0
    duration_seconds: float = 0.0
    output: Optional[str] = None

    def to_dict(self) -> Dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=4)

    def save_to_file(self, path: str):
        atomic_write(path, self.to_json() + '\n')

    @staticmethod
    def load_from_file(path: str) -> 'RunManifest':
        with open(path, 'r') as f:
            return RunManifest(**json.load(f))

    @property
    def manifest_path(self) -> Optional[str]:
        return self.output + MANIFEST_SUFFIX if self.output else None
