"""
Experiment configuration models.

The configuration file is flat (``key = value``), so ``ExperimentConfig`` is a
flat pydantic model too. The narrower models used by each subsystem (loss
weights, VAT, MixMatch, schedule...) are assembled from it on demand.
"""
import enum
import logging
from typing import Any, Dict, FrozenSet, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

LOG = logging.getLogger(__name__)

UNSUPERVISED_TERMS = ('ns3l', 'vat', 'pi', 'entmin', 'pl')


class Method(str, enum.Enum):
    """Training recipes: supervised baseline plus SSL combinations."""
    SUPERVISED = 'supervised'
    PL = 'pl'
    NS3L = 'ns3l'
    PI = 'pi'
    PI_NS3L = 'pi+ns3l'
    VAT = 'vat'
    VAT_ENTMIN = 'vat+entmin'
    VAT_PL = 'vat+pl'
    VAT_NS3L = 'vat+ns3l'
    MIXMATCH = 'mixmatch'
    MIXMATCH_NS3L = 'mixmatch+ns3l'

    @property
    def terms(self) -> FrozenSet[str]:
        """Unsupervised loss terms the method switches on."""
        if self.value == 'supervised':
            return frozenset()
        if self.value == 'vat+entmin':
            return frozenset({'vat', 'entmin'})
        return frozenset(part for part in self.value.split('+') if part in UNSUPERVISED_TERMS)

    @property
    def is_mixmatch(self) -> bool:
        return self.value.startswith('mixmatch')


class NegSelectStrategy(str, enum.Enum):
    """How negative labels are chosen for unlabeled samples."""
    THRESHOLD = 'threshold'
    UNIFORM = 'uniform'
    NN_EXCLUDE_1 = 'nn_exclude_1'
    NN_EXCLUDE_4 = 'nn_exclude_4'
    FURTHEST = 'furthest'
    ORACLE = 'oracle'


class DatasetKind(str, enum.Enum):
    BLOBS = 'blobs'
    TOY1D = 'toy1d'
    CSV = 'csv'


class MLPSpec(BaseModel):
    """Fully connected classifier shape: input dim, hidden widths, K."""
    model_config = ConfigDict(frozen=True)

    layer_widths: Tuple[int, ...]
    slope: float = 0.1
    seed: int = 0

    @field_validator('layer_widths')
    @classmethod
    def check_widths(cls, widths: Tuple[int, ...]) -> Tuple[int, ...]:
        if len(widths) < 2:
            raise ValueError('need at least an input and an output width')
        if any(width < 1 for width in widths):
            raise ValueError('all widths must be >= 1')
        if widths[-1] < 2:
            raise ValueError('the output layer needs K >= 2 classes')
        return widths

    @property
    def input_dim(self) -> int:
        return self.layer_widths[0]

    @property
    def num_classes(self) -> int:
        return self.layer_widths[-1]


class LossWeights(BaseModel):
    model_config = ConfigDict(frozen=True)

    lambda1: float = Field(default=1.0, ge=0.0)
    lambda2: float = Field(default=0.0, ge=0.0)
    lambda3: float = Field(default=75.0, ge=0.0)
    lambda_entmin: float = Field(default=0.06, ge=0.0)
    lambda_pl: float = Field(default=1.0, ge=0.0)
    warmup_exempt: FrozenSet[str] = frozenset()

    def weight_for(self, term: str) -> float:
        return {
            'ns3l': self.lambda1,
            'vat': self.lambda2,
            'pi': self.lambda2,
            'entmin': self.lambda_entmin,
            'pl': self.lambda_pl,
        }[term]


class VATConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    xi: float = Field(default=1e-6, gt=0.0)
    epsilon: float = Field(default=0.5, ge=0.0)
    power_iterations: int = Field(default=1, ge=1)


class MixMatchConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    E: float = Field(default=0.5, gt=0.0)
    A: int = Field(default=2, ge=1)
    alpha: float = Field(default=0.75, gt=0.0)
    lambda3: float = Field(default=75.0, ge=0.0)
    noise_sigma: float = Field(default=0.1, ge=0.0)
    ns3l_T: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    ns3l_lambda1: float = Field(default=0.0, ge=0.0)


class Schedule(BaseModel):
    model_config = ConfigDict(frozen=True)

    total_steps: int = Field(default=2000, ge=1)
    warmup_steps: int = Field(default=500, ge=0)
    eval_interval: int = Field(default=100, ge=1)
    lr_decay_step: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode='after')
    def check_warmup(self) -> 'Schedule':
        if self.warmup_steps > self.total_steps:
            raise ValueError('warmup_steps must not exceed total_steps')
        return self


class DatasetSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: DatasetKind = DatasetKind.BLOBS
    path: Optional[str] = None
    num_classes: int = Field(default=4, ge=2)
    per_class: int = Field(default=650, ge=1)
    dim: int = Field(default=8, ge=1)
    spread: float = Field(default=0.8, ge=0.0)
    separation: float = Field(default=2.0, gt=0.0)
    seed: int = 0
    toy_bias: float = Field(default=0.6, ge=0.0, lt=1.0)
    toy_gap: float = Field(default=0.0, ge=0.0, lt=1.0)
    toy_offset: float = Field(default=0.0, ge=0.0, le=1.0)
    toy_unlabeled: int = Field(default=400, ge=0)
    toy_eval_points: int = Field(default=1000, ge=1)


class SplitSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_labeled: int = Field(default=20, ge=1)
    seed: int = 0
    valid_fraction: float = Field(default=0.1, ge=0.0, lt=1.0)
    test_fraction: float = Field(default=0.1, ge=0.0, lt=1.0)
    reserve_seed: int = 0


class NegSelectConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    strategy: NegSelectStrategy = NegSelectStrategy.THRESHOLD
    T: float = Field(default=0.04, gt=0.0, lt=1.0)
    P: int = Field(default=1, ge=1)
    nn_cache: bool = True


def _method_defaults(method: str) -> Dict[str, Any]:
    defaults: Dict[str, Any] = {'T': 0.04, 'lambda1': 0.0, 'lambda2': 0.0, 'eval_ema': False}
    if method in ('ns3l', 'pi+ns3l'):
        defaults['lambda1'] = 1.0
    if method in ('pi', 'pi+ns3l', 'vat', 'vat+entmin', 'vat+pl'):
        defaults['lambda2'] = 1.0
    if method == 'vat+ns3l':
        defaults.update(lambda1=0.3, lambda2=0.3)
    if method.startswith('mixmatch'):
        defaults['eval_ema'] = True
    if method == 'mixmatch+ns3l':
        defaults.update(T=0.05, lambda1=5.0)
    return defaults


def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return tuple(part.strip() for part in value.split(',') if part.strip())
    return value


class ExperimentConfig(BaseModel):
    """Every knob of one training run, with method-dependent defaults."""
    model_config = ConfigDict(extra='forbid', frozen=True)

    method: Method = Method.SUPERVISED
    seed: int = 0

    dataset: DatasetKind = DatasetKind.BLOBS
    data_path: Optional[str] = None
    num_classes: int = Field(default=4, ge=2)
    per_class: int = Field(default=650, ge=1)
    dim: int = Field(default=8, ge=1)
    blob_spread: float = Field(default=0.8, ge=0.0)
    blob_separation: float = Field(default=2.0, gt=0.0)
    dataset_seed: int = 0
    toy_bias: float = Field(default=0.6, ge=0.0, lt=1.0)
    toy_gap: float = Field(default=0.0, ge=0.0, lt=1.0)
    toy_offset: float = Field(default=0.0, ge=0.0, le=1.0)
    toy_unlabeled: int = Field(default=400, ge=0)

    n_labeled: int = Field(default=20, ge=1)
    valid_fraction: float = Field(default=0.1, ge=0.0, lt=1.0)
    test_fraction: float = Field(default=0.1, ge=0.0, lt=1.0)

    hidden: Tuple[int, ...] = (32,)
    leaky_slope: float = Field(default=0.1, ge=0.0)

    T: float = Field(default=0.04, gt=0.0, lt=1.0)
    scale_threshold_by_classes: bool = False
    lambda1: float = Field(default=0.0, ge=0.0)
    lambda2: float = Field(default=0.0, ge=0.0)
    lambda3: float = Field(default=75.0, ge=0.0)
    lambda_entmin: float = Field(default=0.06, ge=0.0)
    lambda_pl: float = Field(default=1.0, ge=0.0)
    tau_pl: float = Field(default=0.95, gt=0.0, lt=1.0)
    pi_noise_sigma: float = Field(default=0.1, ge=0.0)
    warmup_exempt: Tuple[str, ...] = ()

    xi: float = Field(default=1e-6, gt=0.0)
    epsilon: float = Field(default=0.5, ge=0.0)
    power_iterations: int = Field(default=1, ge=1)

    E: float = Field(default=0.5, gt=0.0)
    A: int = Field(default=2, ge=1)
    alpha: float = Field(default=0.75, gt=0.0)
    augment_sigma: float = Field(default=0.1, ge=0.0)

    negselect: NegSelectStrategy = NegSelectStrategy.THRESHOLD
    neg_count: int = Field(default=1, ge=1)
    nn_cache: bool = True

    lr: float = Field(default=6e-4, gt=0.0)
    labeled_batch: int = Field(default=50, ge=1)
    unlabeled_batch: int = Field(default=50, ge=0)
    total_steps: int = Field(default=2000, ge=1)
    warmup_steps: int = Field(default=500, ge=0)
    eval_interval: int = Field(default=100, ge=1)
    lr_decay_step: Optional[int] = Field(default=None, ge=1)
    ema_decay: float = Field(default=0.999, ge=0.0, lt=1.0)
    eval_ema: bool = False

    @model_validator(mode='before')
    @classmethod
    def apply_method_defaults(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = {key: (None if value == '' else value) for key, value in data.items()}
        method = data.get('method') or Method.SUPERVISED.value
        method = method.value if isinstance(method, Method) else str(method)
        for key, value in _method_defaults(method).items():
            if data.get(key) is None:
                data[key] = value
        return {key: value for key, value in data.items() if value is not None or key in ('data_path', 'lr_decay_step')}

    @field_validator('hidden', mode='before')
    @classmethod
    def parse_hidden(cls, value: Any) -> Any:
        return tuple(int(part) for part in _split_list(value)) if isinstance(value, str) else value

    @field_validator('hidden')
    @classmethod
    def check_hidden(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if any(width < 1 for width in value):
            raise ValueError('hidden widths must be >= 1')
        return value

    @field_validator('warmup_exempt', mode='before')
    @classmethod
    def parse_exempt(cls, value: Any) -> Any:
        return _split_list(value)

    @field_validator('warmup_exempt')
    @classmethod
    def check_exempt(cls, value: Tuple[str, ...]) -> Tuple[str, ...]:
        unknown = [term for term in value if term not in UNSUPERVISED_TERMS]
        if unknown:
            raise ValueError(f'unknown loss terms {unknown}; expected a subset of {list(UNSUPERVISED_TERMS)}')
        return value

    @model_validator(mode='after')
    def check_consistency(self) -> 'ExperimentConfig':
        if self.warmup_steps > self.total_steps:
            raise ValueError('warmup_steps must not exceed total_steps')
        if self.dataset == DatasetKind.CSV and not self.data_path:
            raise ValueError('data_path is required when dataset = csv')
        if self.n_labeled < self.num_classes and self.dataset == DatasetKind.BLOBS:
            raise ValueError('n_labeled must be at least num_classes')
        if self.valid_fraction + self.test_fraction >= 1.0:
            raise ValueError('valid_fraction + test_fraction must stay below 1')
        return self

    def effective_threshold(self, num_classes: int) -> float:
        """The NS3L threshold, optionally scaled as T * 10 / K."""
        if self.scale_threshold_by_classes:
            return min(self.T * 10.0 / num_classes, 0.999)
        return self.T

    def loss_weights(self) -> LossWeights:
        return LossWeights(
            lambda1=self.lambda1,
            lambda2=self.lambda2,
            lambda3=self.lambda3,
            lambda_entmin=self.lambda_entmin,
            lambda_pl=self.lambda_pl,
            warmup_exempt=frozenset(self.warmup_exempt),
        )

    def vat(self) -> VATConfig:
        return VATConfig(xi=self.xi, epsilon=self.epsilon, power_iterations=self.power_iterations)

    def mixmatch(self, num_classes: int) -> MixMatchConfig:
        with_ns3l = self.method == Method.MIXMATCH_NS3L
        return MixMatchConfig(
            E=self.E,
            A=self.A,
            alpha=self.alpha,
            lambda3=self.lambda3,
            noise_sigma=self.augment_sigma,
            ns3l_T=self.effective_threshold(num_classes) if with_ns3l else None,
            ns3l_lambda1=self.lambda1 if with_ns3l else 0.0,
        )

    def schedule(self) -> Schedule:
        return Schedule(
            total_steps=self.total_steps,
            warmup_steps=self.warmup_steps,
            eval_interval=self.eval_interval,
            lr_decay_step=self.lr_decay_step,
        )

    def dataset_spec(self) -> DatasetSpec:
        return DatasetSpec(
            kind=self.dataset,
            path=self.data_path,
            num_classes=self.num_classes,
            per_class=self.per_class,
            dim=self.dim,
            spread=self.blob_spread,
            separation=self.blob_separation,
            seed=self.dataset_seed,
            toy_bias=self.toy_bias,
            toy_gap=self.toy_gap,
            toy_offset=self.toy_offset,
            toy_unlabeled=self.toy_unlabeled,
        )

    def split_spec(self) -> SplitSpec:
        return SplitSpec(
            n_labeled=self.n_labeled,
            seed=self.seed,
            valid_fraction=self.valid_fraction,
            test_fraction=self.test_fraction,
            reserve_seed=self.dataset_seed,
        )

    def mlp_spec(self, input_dim: int, num_classes: int) -> MLPSpec:
        return MLPSpec(layer_widths=(input_dim, *self.hidden, num_classes), slope=self.leaky_slope, seed=self.seed)

    def negselect_config(self, num_classes: int) -> NegSelectConfig:
        return NegSelectConfig(
            strategy=self.negselect,
            T=self.effective_threshold(num_classes),
            P=self.neg_count,
            nn_cache=self.nn_cache,
        )

    def with_overrides(self, **overrides: Any) -> 'ExperimentConfig':
        """Re-validated copy with some fields replaced; method defaults are re-derived for unset keys."""
        data: Dict[str, Any] = self.model_dump(mode='json')
        if 'method' in overrides:
            for key in _method_defaults(str(overrides['method'])):
                data.pop(key, None)
        data.update({key: value for key, value in overrides.items() if value is not None})
        return ExperimentConfig.model_validate(data)


def field_names() -> List[str]:
    return list(ExperimentConfig.model_fields)
