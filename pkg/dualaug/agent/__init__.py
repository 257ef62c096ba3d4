"""
Augmentation agent: replay memory, Q-networks and the environment it acts in.
"""

from .clustering import ClusterPolicy
from .environment import AugmentationEnvironment, feature_size, warm_start
from .memory import ReplayMemory, Transition
from .qagent import N_ACTIONS, QAgent, q_values, select_action, sync_target, td_update

__all__ = [
    'AugmentationEnvironment',
    'ClusterPolicy',
    'N_ACTIONS',
    'QAgent',
    'ReplayMemory',
    'Transition',
    'feature_size',
    'q_values',
    'select_action',
    'sync_target',
    'td_update',
    'warm_start',
]
