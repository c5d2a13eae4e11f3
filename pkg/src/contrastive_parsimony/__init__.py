"""Contrastive parsimony-guided event encoding for tree network topology inference."""

from .encoder import EncoderConfig, encode, init_params, load_checkpoint, save_checkpoint
from .evaluation import EvalReport, evaluate, evaluate_oracle
from .loss import LossConfig, contrastive_loss, sample_negatives
from .parsimony import (binarize, brute_force_column, fitch_column, parsimony_vector,
                        soft_parsimony_vector)
from .simulator import (Observation, SimConfig, generate_dataset, load_observations, simulate_dataset,
                        simulate_observation)
from .topology import (InternalEdge, NetworkInstance, Topology, affected_modems,
                       enumerate_topologies, sample_topology)
from .trainer import TrainConfig, train

__version__ = "0.1.0"
