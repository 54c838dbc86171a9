"""
* Tests: Command Line
"""
# Third Party Imports
from click.testing import CliRunner
import pytest

# Local Imports
from mfvscheme.cli import MfvCLI
from mfvscheme.utils.files import MESH_HEADER

OVERLAPPING_MESH = f"""\
{MESH_HEADER}
vertices 8
0 0 0
1 1 0
2 1 1
3 0 1
4 0.5 0
5 1.5 0
6 1.5 1
7 0.5 1
cells 2
0 0 1 2 3
1 4 5 6 7
"""


@pytest.fixture
def runner(tmp_path) -> CliRunner:
    return CliRunner(env={'MFV_OUTPUT_DIR': str(tmp_path / 'out'), 'MFV_LOG': 'warn'})


def test_help(runner):
    result = runner.invoke(MfvCLI, [])
    assert result.exit_code == 0
    assert 'convergence' in result.output


"""
* Mesh Commands
"""


class TestMeshCommands:

    def test_gen_squares(self, runner, tmp_path):
        path = tmp_path / 'sq2.mesh'
        result = runner.invoke(MfvCLI, ['mesh', 'gen', 'squares', '--n', '2', '-o', str(path)])
        assert result.exit_code == 0, result.output
        assert 'regularity: 8' in result.output
        assert 'cells: 4' in result.output
        assert path.read_text(encoding='utf-8').startswith(MESH_HEADER)

    def test_gen_default_path(self, runner, tmp_path):
        result = runner.invoke(MfvCLI, ['mesh', 'gen', 'refined', '--n', '2', '--box', '0,0,0.5,0.5'])
        assert result.exit_code == 0, result.output
        assert (tmp_path / 'out' / 'refined-2.mesh').exists()
        assert 'cells: 7' in result.output

    def test_inspect_spec(self, runner):
        result = runner.invoke(MfvCLI, ['mesh', 'inspect', 'triangles:4:pattern=crisscross'])
        assert result.exit_code == 0, result.output
        assert 'cells: 64' in result.output

    def test_validate_overlap(self, runner, tmp_path):
        path = tmp_path / 'overlap.mesh'
        path.write_text(OVERLAPPING_MESH, encoding='utf-8')
        result = runner.invoke(MfvCLI, ['mesh', 'validate', str(path)])
        assert result.exit_code == 2
        assert 'error[validation]' in result.output

    def test_validate_good_file(self, runner, tmp_path):
        path = tmp_path / 'sq3.mesh'
        runner.invoke(MfvCLI, ['mesh', 'gen', 'squares', '--n', '3', '-o', str(path)])
        result = runner.invoke(MfvCLI, ['mesh', 'validate', str(path)])
        assert result.exit_code == 0, result.output
        assert result.output.rstrip().endswith('valid')

    def test_bad_format_exit_code(self, runner, tmp_path):
        path = tmp_path / 'bad.mesh'
        path.write_text('mesh v0\n', encoding='utf-8')
        result = runner.invoke(MfvCLI, ['mesh', 'validate', str(path)])
        assert result.exit_code == 2
        assert 'error[format]' in result.output


"""
* Run Command
"""


class TestRunCommand:

    def test_patch_on_distorted_mesh(self, runner, tmp_path):
        csv = tmp_path / 'patch.csv'
        result = runner.invoke(MfvCLI, [
            'run', '--case', 'patch-affine', '--mesh', 'distorted:8:seed=7', '--csv', str(csv)])
        assert result.exit_code == 0, result.output
        header, row = csv.read_text(encoding='utf-8').splitlines()
        values = dict(zip(header.split(','), row.split(',')))
        assert values['cells'] == '64'
        assert float(values['e2_u']) <= 1e-6

    def test_csv_is_deterministic(self, runner, tmp_path):
        args = ['run', '--case', 'lepotier', '--mesh', 'squares:8', '--csv']
        first, second = tmp_path / 'a.csv', tmp_path / 'b.csv'
        assert runner.invoke(MfvCLI, [*args, str(first)]).exit_code == 0
        assert runner.invoke(MfvCLI, [*args, str(second)]).exit_code == 0
        assert first.read_bytes() == second.read_bytes()

    def test_config_file_with_flag_override(self, runner, tmp_path):
        config = tmp_path / 'run.yml'
        config.write_text('case: lepotier\nmesh: squares:2\nsolver: pcg\n', encoding='utf-8')
        csv = tmp_path / 'run.csv'
        result = runner.invoke(MfvCLI, ['run', '--config', str(config), '--mesh', 'squares:4', '--csv', str(csv)])
        assert result.exit_code == 0, result.output
        assert csv.read_text(encoding='utf-8').splitlines()[1].startswith('lepotier,squares:4,16,')

    def test_zero_penalization_on_squares(self, runner):
        result = runner.invoke(MfvCLI, ['run', '--case', 'isotropic', '--mesh', 'squares:16', '--nu', 'zero'])
        assert result.exit_code == 3
        assert 'penalization zero requires simplicial mesh' in result.output

    def test_zero_penalization_on_triangles(self, runner, tmp_path):
        csv = tmp_path / 'tri.csv'
        result = runner.invoke(MfvCLI, [
            'run', '--case', 'isotropic', '--mesh', 'triangles:4', '--nu', 'zero', '--csv', str(csv)])
        assert result.exit_code == 0, result.output
        assert csv.exists()

    def test_unknown_option(self, runner):
        result = runner.invoke(MfvCLI, ['run', '--penalty', '1'])
        assert result.exit_code == 1

    def test_unknown_case(self, runner):
        result = runner.invoke(MfvCLI, ['run', '--case', 'poisson', '--mesh', 'squares:2'])
        assert result.exit_code == 1

    def test_unknown_mesh_family(self, runner):
        result = runner.invoke(MfvCLI, ['run', '--case', 'isotropic', '--mesh', 'hexagons:4'])
        assert result.exit_code == 1
        assert 'error[config]' in result.output

    def test_missing_config_file(self, runner, tmp_path):
        result = runner.invoke(MfvCLI, ['run', '--config', str(tmp_path / 'none.yml')])
        assert result.exit_code == 1


"""
* Convergence and Presets
"""


def test_convergence(runner, tmp_path):
    csv = tmp_path / 'conv.csv'
    result = runner.invoke(MfvCLI, [
        'convergence', '--case', 'isotropic', '--family', 'squares', '--levels', '4,8', '--csv', str(csv)])
    assert result.exit_code == 0, result.output
    lines = csv.read_text(encoding='utf-8').splitlines()
    assert lines[0].endswith('order_u,order_grad')
    assert len(lines) == 3
    assert 'order_u:' in result.output


def test_convergence_single_level(runner):
    result = runner.invoke(MfvCLI, [
        'convergence', '--case', 'isotropic', '--family', 'squares', '--levels', '8'])
    assert result.exit_code == 1


def test_preset_list(runner):
    result = runner.invoke(MfvCLI, ['preset', 'list'])
    assert result.exit_code == 0
    assert 'lepotier-dq4:' in result.output


def test_preset_unknown(runner):
    result = runner.invoke(MfvCLI, ['preset', 'lepotier-dq9'])
    assert result.exit_code == 1
