from morphin.envs.base import Environment
from morphin.envs.gridworld import Gridworld, GridworldConfig, shortest_path_length
from morphin.envs.traffic import ArrivalChange, Phase, TrafficConfig, TrafficIntersection

__all__ = [
    "ArrivalChange",
    "Environment",
    "Gridworld",
    "GridworldConfig",
    "Phase",
    "TrafficConfig",
    "TrafficIntersection",
    "shortest_path_length",
]
