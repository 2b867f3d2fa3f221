from ns3l_lab.data.augment import augment
from ns3l_lab.data.datasets import (
    Dataset,
    ToyProblem,
    gen_blobs,
    gen_toy_1d,
    load_csv_dataset,
    save_csv_dataset,
    simplex_vertices,
)
from ns3l_lab.data.split import BatchSampler, SSLBatch, SSLSplit, split_labeled_unlabeled

__all__ = [
    'BatchSampler',
    'Dataset',
    'SSLBatch',
    'SSLSplit',
    'ToyProblem',
    'augment',
    'gen_blobs',
    'gen_toy_1d',
    'load_csv_dataset',
    'save_csv_dataset',
    'simplex_vertices',
    'split_labeled_unlabeled',
]
