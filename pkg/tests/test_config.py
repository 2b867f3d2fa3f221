import pytest

from ns3l_lab.errors import ConfigError
from ns3l_lab.models import ExperimentConfig, Method
from ns3l_lab.utils.config_io import emit_config, parse_config


class TestMethodDefaults:
    def test_ns3l(self):
        config = ExperimentConfig(method='ns3l')
        assert config.T == 0.04
        assert config.lambda1 == 1.0
        assert config.lambda2 == 0.0
        assert config.loss_weights().weight_for('ns3l') == 1.0

    def test_vat_with_ns3l(self):
        config = ExperimentConfig(method='vat+ns3l')
        assert (config.lambda1, config.lambda2) == (0.3, 0.3)
        assert config.method.terms == {'vat', 'ns3l'}

    def test_mixmatch_with_ns3l(self):
        config = ExperimentConfig(method='mixmatch+ns3l')
        assert config.T == 0.05
        assert config.lambda1 == 5.0
        assert config.eval_ema
        assert config.mixmatch(4).ns3l_T == 0.05

    def test_explicit_values_win(self):
        assert ExperimentConfig(method='ns3l', lambda1=2.5).lambda1 == 2.5

    def test_changing_method_rederives_defaults(self):
        config = ExperimentConfig(method='ns3l').with_overrides(method='vat')
        assert config.lambda1 == 0.0
        assert config.lambda2 == 1.0
        assert config.method is Method.VAT

    def test_threshold_scaling(self):
        config = ExperimentConfig(method='ns3l', scale_threshold_by_classes=True)
        assert config.effective_threshold(100) == pytest.approx(0.004)
        assert config.effective_threshold(2) == pytest.approx(0.2)
        assert ExperimentConfig(method='ns3l').effective_threshold(100) == 0.04


class TestValidation:
    def test_warmup_longer_than_training(self):
        with pytest.raises(ValueError):
            ExperimentConfig(total_steps=10, warmup_steps=20)

    def test_csv_needs_a_path(self):
        with pytest.raises(ValueError):
            ExperimentConfig(dataset='csv')

    def test_unknown_warmup_exempt_term(self):
        with pytest.raises(ValueError):
            ExperimentConfig(warmup_exempt='ns3l,mixup')

    def test_comma_lists(self):
        config = ExperimentConfig(hidden='16, 8', warmup_exempt='vat')
        assert config.hidden == (16, 8)
        assert config.warmup_exempt == ('vat',)
        assert config.mlp_spec(4, 3).layer_widths == (4, 16, 8, 3)


class TestConfigFile:
    def test_unknown_key_suggests_a_fix(self, tmp_path):
        path = tmp_path / 'run.cfg'
        path.write_text('method = ns3l\nlamda1 = 1\n')
        with pytest.raises(ConfigError, match="did you mean 'lambda1'"):
            parse_config(str(path))

    def test_comments_and_overrides(self, tmp_path):
        path = tmp_path / 'run.cfg'
        path.write_text('# blobs run\nmethod = vat+ns3l\nlambda1 = 2\nT = 0.1\n')
        config = parse_config(str(path), {'lambda1': 3.0, 'lr': None})
        assert config.method is Method.VAT_NS3L
        assert config.lambda1 == 3.0
        assert config.lambda2 == 0.3
        assert config.T == 0.1
        assert config.lr == 6e-4

    def test_invalid_value_names_the_key(self, tmp_path):
        path = tmp_path / 'run.cfg'
        path.write_text('lr = fast\n')
        with pytest.raises(ConfigError, match='lr'):
            parse_config(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match='not found'):
            parse_config(str(tmp_path / 'absent.cfg'))

    def test_emitted_config_reads_back_equal(self, tmp_path, small_config):
        config = small_config.with_overrides(method='mixmatch+ns3l', hidden=(16, 8), warmup_exempt=('ns3l',), xi=1e-6)
        path = tmp_path / 'config.txt'
        path.write_text(emit_config(config))
        assert parse_config(str(path)) == config

    def test_overrides_alone(self):
        assert parse_config(overrides={'method': 'pi'}).lambda2 == 1.0
