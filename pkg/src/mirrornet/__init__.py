"""Mirror-neuron analysis of small feed-forward policies trained on a two-agent
cooperative side-scroller (Frog and Toad)."""

from .env import Action, AgentId, WorldConfig, apply_action, encode, legal_actions, new_world
from .oracle import OracleConfig, label, label_batch

__all__ = [
    "Action",
    "AgentId",
    "WorldConfig",
    "OracleConfig",
    "apply_action",
    "encode",
    "label",
    "label_batch",
    "legal_actions",
    "new_world",
]
__version__ = "0.1.0"
