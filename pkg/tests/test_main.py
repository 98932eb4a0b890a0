import pytest

from kerncollab.constants import SEED_ENV_VAR
from kerncollab.main import build_parser, main

TINY = "[experiment]\nT = 12\nK = 2\ngrid_size = 5\nmc_runs = 1\nn_explore = 4\n"


@pytest.fixture
def ini(tmp_path, monkeypatch):
    monkeypatch.delenv(SEED_ENV_VAR, raising=False)
    path = tmp_path / 'tiny.ini'
    path.write_text(TINY)
    return path


class TestParser:

    def test_compare_collects_policies(self):
        args = build_parser().parse_args(['compare', '--policy', 'cepe', '--policy', 'gppi'])
        assert args.policies == ['cepe', 'gppi']

    def test_verbosity_flags_exclusive(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(['run', '-v', '-q'])

    def test_unknown_policy(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(['run', '--policy', 'thompson'])

    @pytest.mark.parametrize('flag', ['--paper-scale', '--full-scale'])
    def test_scale_flag_spellings(self, flag):
        assert build_parser().parse_args(['run', flag]).full_scale
        assert not build_parser().parse_args(['run']).full_scale


class TestMain:

    def test_validate_config(self, ini, capsys):
        assert main(['validate-config', '--config', str(ini), '--seed', '3']) == 0
        out = capsys.readouterr().out.splitlines()
        assert 'T = 12' in out
        assert 'seed = 3' in out
        assert any(line.startswith('kappa (resolved) = ') for line in out)

    def test_scale_flag_sets_large_defaults(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv(SEED_ENV_VAR, raising=False)
        path = tmp_path / 'scale.ini'
        path.write_text("[experiment]\nmc_runs = 1\n")
        assert main(['validate-config', '--paper-scale', '--config', str(path)]) == 0
        out = capsys.readouterr().out.splitlines()
        assert 'K = 50' in out
        assert 'T = 2000' in out
        assert 'grid_size = 30' in out
        assert 'mc_runs = 1' in out

    def test_invalid_config_exits_2(self, tmp_path, capsys):
        path = tmp_path / 'bad.ini'
        path.write_text("[experiment]\nK = 0\n")
        assert main(['validate-config', '--config', str(path)]) == 2
        assert 'kerncollab: error:' in capsys.readouterr().err

    def test_missing_config_exits_2(self, tmp_path):
        assert main(['validate-config', '--config', str(tmp_path / 'absent.ini')]) == 2

    def test_run_writes_outputs(self, ini, tmp_path):
        out = tmp_path / 'results'
        assert main(['run', '--config', str(ini), '--out', str(out), '-q']) == 0
        assert sorted(p.name for p in out.iterdir()) == ['cepe.svg', 'cepe_run0.csv', 'summary.csv']

    def test_compare_writes_outputs(self, ini, tmp_path):
        out = tmp_path / 'results'
        assert main(['compare', '--config', str(ini), '--out', str(out), '-q',
                     '--policy', 'cepe', '--policy', 'igpucb']) == 0
        header = (out / 'compare.csv').read_text().splitlines()[0]
        assert header == 'round,cepe,igpucb'

    def test_sweep_writes_outputs(self, ini, tmp_path):
        out = tmp_path / 'results'
        assert main(['sweep-inducing', '--config', str(ini), '--out', str(out), '-q', '--q0', '100']) == 0
        assert len((out / 'sweep.csv').read_text().splitlines()) == 2
        assert (out / 'sweep.svg').exists()
