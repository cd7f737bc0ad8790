from .buffer import Batch, Experience, ReplayBuffer
from .maddpg import (ActorPolicy, AgentNets, EpisodeLog, Streams, TrainConfig, TrainingDiverged, TrainResult,
                     actor_update, build_agents, correlation_penalty, critic_input, critic_loss, pairwise_corr,
                     select_action, train, update_agents, write_log)
from .madqn import DqnConfig, DqnPolicy, DqnResult, QAgent, default_templates, madqn_train

__all__ = [
    "ActorPolicy", "AgentNets", "Batch", "DqnConfig", "DqnPolicy", "DqnResult", "EpisodeLog", "Experience",
    "QAgent", "ReplayBuffer", "Streams", "TrainConfig", "TrainResult", "TrainingDiverged", "actor_update",
    "build_agents", "correlation_penalty", "critic_input", "critic_loss", "default_templates", "madqn_train",
    "pairwise_corr", "select_action", "train", "update_agents", "write_log",
]
