from ghyena.recall.data import (
    AssocRecallInstance,
    AssocRecallVocab,
    gen_sequence,
    gen_vocab,
    generate_dataset,
    positional_encoding,
    rotate_instance,
)
from ghyena.recall.dataset_io import load_dataset, save_dataset
from ghyena.recall.optim import AdamState, adam_step, cosine_lr
from ghyena.recall.train import evaluate, mean_predictor_mse, train

__all__ = [
    "AdamState",
    "AssocRecallInstance",
    "AssocRecallVocab",
    "adam_step",
    "cosine_lr",
    "evaluate",
    "gen_sequence",
    "gen_vocab",
    "generate_dataset",
    "load_dataset",
    "mean_predictor_mse",
    "positional_encoding",
    "rotate_instance",
    "save_dataset",
    "train",
]
