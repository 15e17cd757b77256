import math
import os

import numpy as np
import pytest

from app import cli_dispatch
from models.cpd import LrCPD, TreeCPD, TreeLeaf, TreeSplit
from models.dependency_network import DependencyNetwork
from models.errors import ConfigurationError, ParseError
from models.markov_network import MarkovNetwork, Schema
from settings import ExperimentSettings
from utils.cpd_learning import learn_dependency_network
from utils.files import (
    RunManifest, format_dn, format_mn, load_dataset, load_model, parse_dn, parse_mn, save_dn, save_mn
)
from utils.synthetic import random_markov_network, two_variable_dependency_network


def write(path, text):
    path.write_text(text)
    return str(path)


class TestDatasetFiles:

    def test_binary_rows(self, tmp_path):
        data = load_dataset(write(tmp_path / 'd.csv', '1,0\n0,0\n'))
        np.testing.assert_array_equal(data.rows, [[1, 0], [0, 0]])
        assert data.schema.arities == (2, 2)

    def test_inferred_arity(self, tmp_path):
        data = load_dataset(write(tmp_path / 'd.csv', '2,0\n'))
        assert data.schema.arities == (3, 2)

    def test_schema_file_wins(self, tmp_path):
        data = load_dataset(write(tmp_path / 'd.csv', '2,0\n'), write(tmp_path / 's.txt', '3,3\n'))
        assert data.schema.arities == (3, 3)

    def test_ragged_row_reports_line(self, tmp_path):
        with pytest.raises(ParseError) as e:
            load_dataset(write(tmp_path / 'd.csv', '1,0\n1\n'))
        assert e.value.line == 2

    def test_non_integer_reports_column(self, tmp_path):
        with pytest.raises(ParseError) as e:
            load_dataset(write(tmp_path / 'd.csv', '1,x\n'))
        assert (e.value.line, e.value.column) == (1, 3)

    def test_value_outside_schema(self, tmp_path):
        with pytest.raises(ParseError):
            load_dataset(write(tmp_path / 'd.csv', '0,2\n'), write(tmp_path / 's.txt', '2,2\n'))

    def test_blank_lines_skipped(self, tmp_path):
        assert len(load_dataset(write(tmp_path / 'd.csv', '1,0\n\n0,1\n'))) == 2


class TestMarkovNetworkFiles:

    def test_single_feature(self):
        mn = parse_mn('MN 1\n2\n0.6931471805599453 0=1\n')
        np.testing.assert_allclose(mn.enumerate_joint().probabilities, [1 / 3, 2 / 3])

    def test_empty_network(self):
        mn = parse_mn('MN 3\n2,2,2\n')
        assert len(mn) == 0
        assert mn.schema.arities == (2, 2, 2)

    def test_many_features_read_back(self):
        mn = random_markov_network(Schema((2, 3, 2, 4, 2)), 100, seed=8)
        again = parse_mn(format_mn(mn))
        assert [(wf.weight, wf.feature) for wf in again.features] == [(wf.weight, wf.feature) for wf in mn.features]

    def test_contradictory_feature(self):
        with pytest.raises(ParseError) as e:
            parse_mn('MN 2\n2,2\n1.0 0=1,0=0\n')
        assert e.value.line == 3

    def test_bad_header(self):
        with pytest.raises(ParseError) as e:
            parse_mn('MN 3\n2,2\n')
        assert e.value.line == 2


class TestDependencyNetworkFiles:

    def test_leaf(self):
        dn = parse_dn('DN 1\n2\n(leaf 0.5 0.5)\n')
        assert isinstance(dn.cpds[0], TreeCPD)
        np.testing.assert_allclose(dn.predict(0, [1]).probabilities, [0.5, 0.5])

    def test_split(self):
        dn = parse_dn('DN 2\n2,2\n(split 1=1 (leaf 0.2 0.8) (leaf 0.6 0.4))\n(leaf 0.5 0.5)\n')
        np.testing.assert_allclose(dn.predict(0, [0, 1]).probabilities, [0.2, 0.8])
        np.testing.assert_allclose(dn.predict(0, [0, 0]).probabilities, [0.6, 0.4])

    def test_error_position(self):
        text = 'DN 2\n2,2\n(leaf 0.5 0.5)\n(split 0=1 (leaf 0.5 0.5) (lief 0.5 0.5))\n'
        with pytest.raises(ParseError) as e:
            parse_dn(text)
        assert (e.value.line, e.value.column) == (4, 28)

    def test_missing_cpd(self):
        with pytest.raises(ParseError):
            parse_dn('DN 2\n2,2\n(leaf 0.5 0.5)\n')

    def test_logistic_cpds(self):
        schema = Schema((2, 2, 2))
        dn = DependencyNetwork(schema, [
            LrCPD(schema, 0, 0.25, {1: -1.5}),
            LrCPD(schema, 1, -0.1, {0: 2.0, 2: 0.3}),
            LrCPD(schema, 2, 0.0, {}),
        ])
        again = parse_dn(format_dn(dn))
        assert again.kind == 'lr'
        assert again.cpds[1].weights == {0: 2.0, 2: 0.3}

    def test_learned_tree_network_text_is_stable(self):
        source = random_markov_network(Schema((2, 3, 2, 2)), 8, seed=17)
        dn = learn_dependency_network(source.sample(600, seed=4), 'tree', 1.0)
        assert any(isinstance(cpd.root, TreeSplit) for cpd in dn.cpds)
        text = format_dn(dn)
        assert format_dn(parse_dn(text)) == text

    def test_load_model_sniffs_header(self, tmp_path):
        schema = Schema((2,))
        save_mn(str(tmp_path / 'a.mn'), MarkovNetwork(schema))
        save_dn(str(tmp_path / 'a.dn'), DependencyNetwork(schema, [TreeCPD(schema, 0, TreeLeaf([0.5, 0.5]))]))
        assert isinstance(load_model(str(tmp_path / 'a.mn')), MarkovNetwork)
        assert isinstance(load_model(str(tmp_path / 'a.dn')), DependencyNetwork)
        with pytest.raises(ParseError):
            load_model(write(tmp_path / 'b.txt', 'XX 1\n2\n'))


class TestSettings:

    def test_defaults(self):
        settings = ExperimentSettings()
        assert settings.conversion.order == 'rot2'
        assert settings.gibbs.samples == 1000

    def test_file_overrides(self, tmp_path):
        settings = ExperimentSettings()
        settings.gibbs.burn_in = 7
        settings.tuning.kappa_grid = [0.5]
        path = str(tmp_path / 'config.json')
        settings.save_to_file(path)
        loaded = ExperimentSettings(path)
        assert loaded.gibbs.burn_in == 7
        assert loaded.tuning.kappa_grid == [0.5]

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            ExperimentSettings(str(tmp_path / 'nope.json'))

    def test_invalid_json(self, tmp_path):
        with pytest.raises(ConfigurationError):
            ExperimentSettings(write(tmp_path / 'config.json', '{not json'))

    @pytest.mark.parametrize('section', ['[1, 2]', '"rot2"', '3', 'null'])
    def test_section_must_be_object(self, tmp_path, section):
        path = write(tmp_path / 'config.json', '{"conversion": ' + section + '}')
        with pytest.raises(ConfigurationError, match='conversion'):
            ExperimentSettings(path)

    def test_save_replaces_file_without_leftovers(self, tmp_path):
        path = write(tmp_path / 'config.json', 'stale')
        ExperimentSettings().save_to_file(path)
        assert os.listdir(tmp_path) == ['config.json']
        assert ExperimentSettings(path).conversion.order == 'rot2'
        assert (tmp_path / 'config.json').read_text().endswith('}\n')


@pytest.fixture
def consistent_dn_file(tmp_path):
    path = str(tmp_path / 'consistent.dn')
    save_dn(path, two_variable_dependency_network(4 / 5, 2 / 5, 2 / 3, 1 / 4))
    return path


def joint_from_stdout(text):
    table = {}
    for line in text.strip().splitlines():
        state, probability = line.split('\t')
        table[state] = float(probability)
    return table


class TestCommandLine:

    def test_missing_required_flag(self):
        assert cli_dispatch(['dn2mn']) == 2

    def test_missing_input_file(self, tmp_path):
        assert cli_dispatch(['eval', '-m', str(tmp_path / 'a.mn'), '-i', str(tmp_path / 'd.csv')]) == 2

    def test_eval_empty_network(self, tmp_path, capsys):
        model = write(tmp_path / 'empty.mn', 'MN 2\n2,2\n')
        data = write(tmp_path / 'test.csv', '0,1\n1,1\n')
        assert cli_dispatch(['eval', '--metric', 'npll', '-m', model, '-i', data]) == 0
        assert float(capsys.readouterr().out.strip()) == pytest.approx(math.log(0.5))

    def test_convert_then_enumerate(self, tmp_path, capsys, consistent_dn_file):
        output = str(tmp_path / 'converted.mn')
        assert cli_dispatch(['dn2mn', '-m', consistent_dn_file, '--base', 'single', '--xprime', '1,1',
                             '--order', 'single', '-o', output]) == 0
        capsys.readouterr()
        assert cli_dispatch(['enumerate', '-m', output]) == 0
        table = joint_from_stdout(capsys.readouterr().out)
        assert list(table) == ['0,0', '0,1', '1,0', '1,1']
        np.testing.assert_allclose(list(table.values()), [0.3, 0.1, 0.2, 0.4])

    def test_manifest_written(self, tmp_path, consistent_dn_file):
        output = str(tmp_path / 'converted.mn')
        assert cli_dispatch(['dn2mn', '-m', consistent_dn_file, '--base', 'single', '--order', 'pair',
                             '-o', output]) == 0
        manifest = RunManifest.load_from_file(output + '.manifest.json')
        assert manifest.command == 'dn2mn'
        assert manifest.hyperparameters['order'] == 'pair'
        assert manifest.inputs == {'model': consistent_dn_file}
        assert manifest.duration_seconds >= 0.0

    def test_conversion_is_deterministic(self, tmp_path, consistent_dn_file):
        first, second = str(tmp_path / 'a.mn'), str(tmp_path / 'b.mn')
        for output in (first, second):
            assert cli_dispatch(['dn2mn', '-m', consistent_dn_file, '--base', 'single', '--order', 'rot2',
                                 '-o', output]) == 0
        with open(first, 'rb') as a, open(second, 'rb') as b:
            assert a.read() == b.read()

    def test_seeded_commands_repeat_byte_for_byte(self, tmp_path, capsys):
        source = str(tmp_path / 'source.mn')
        save_mn(source, random_markov_network(Schema((2,) * 4), 5, seed=3, max_length=2))
        outputs = []
        for run in ('a', 'b'):
            train = str(tmp_path / f'train-{run}.csv')
            dn = str(tmp_path / f'learned-{run}.dn')
            converted = str(tmp_path / f'converted-{run}.mn')
            learned = str(tmp_path / f'weights-{run}.mn')
            assert cli_dispatch(['sample', '-m', source, '-n', '200', '--seed', '4', '-o', train]) == 0
            assert cli_dispatch(['dnlearn', '--kappa', '0.1', '-i', train, '-o', dn]) == 0
            assert cli_dispatch(['dn2mn', '-m', dn, '-i', train, '-o', converted]) == 0
            assert cli_dispatch(['mnlearnw', '-m', converted, '-i', train, '--sigma', '0.5', '-o', learned]) == 0
            capsys.readouterr()
            assert cli_dispatch(['eval', '--metric', 'cmll', '-m', learned, '-i', train, '--seed', '2',
                                 '--burn-in', '5', '--samples', '20']) == 0
            files = []
            for path in (train, dn, converted, learned):
                with open(path, 'rb') as f:
                    files.append(f.read())
            outputs.append((files, capsys.readouterr().out))
        assert outputs[0] == outputs[1]

    def test_no_partial_output_on_failure(self, tmp_path):
        broken = write(tmp_path / 'broken.dn', 'DN 2\n2,2\n(leaf 0.5 0.5)\n(split 0=1 (leaf 0.5\n')
        output = str(tmp_path / 'out.mn')
        assert cli_dispatch(['dn2mn', '-m', broken, '-o', output, '--base', 'single']) == 1
        assert sorted(os.listdir(tmp_path)) == ['broken.dn']

    def test_enumerate_rejects_dependency_network(self, consistent_dn_file):
        assert cli_dispatch(['enumerate', '-m', consistent_dn_file]) == 1

    def test_full_pipeline(self, tmp_path, capsys):
        source = str(tmp_path / 'source.mn')
        save_mn(source, random_markov_network(Schema((2,) * 4), 6, seed=12, max_length=2))
        train = str(tmp_path / 'train.csv')
        dn = str(tmp_path / 'learned.dn')
        converted = str(tmp_path / 'converted.mn')
        learned = str(tmp_path / 'weights.mn')

        assert cli_dispatch(['sample', '-m', source, '-n', '300', '--seed', '1', '-o', train]) == 0
        assert cli_dispatch(['dnlearn', '--cpd', 'tree', '--kappa', '0.1', '-i', train, '-o', dn]) == 0
        assert cli_dispatch(['dn2mn', '-m', dn, '-i', train, '--base', 'marginal', '--order', 'rot2',
                             '-o', converted]) == 0
        assert cli_dispatch(['mnlearnw', '-m', converted, '-i', train, '--sigma', '1.0', '-o', learned]) == 0
        capsys.readouterr()

        values = []
        for model in (dn, converted, learned):
            assert cli_dispatch(['eval', '--metric', 'npll', '-m', model, '-i', train]) == 0
            values.append(float(capsys.readouterr().out.strip()))
        assert all(math.log(0.5) - 0.5 < v < 0.0 for v in values)

        assert cli_dispatch(['eval', '--metric', 'cmll', '-m', converted, '-i', train,
                             '--burn-in', '5', '--samples', '20']) == 0
        assert float(capsys.readouterr().out.strip()) < 0.0
