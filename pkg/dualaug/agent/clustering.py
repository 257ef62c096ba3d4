"""
Behavior clustering policy: actions from k-means over (r_l, r_p) instead of
a learned agent.
"""

from typing import Dict, Sequence
import logging
import warnings

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.optimize import linear_sum_assignment

from ..behavior import BehaviorInvestigator
from ..windows import Action, WindowSample

logger = logging.getLogger(__name__)

# Behavior corner each action is meant for: simple, hard, contaminated.
PROTOTYPES: Dict[Action, tuple] = {
    Action.PRESERVE: (0.0, 0.0),
    Action.EXPAND: (1.0, 0.0),
    Action.DELETE: (1.0, 1.0),
}


class ClusterPolicy:
    """
    Frozen policy for one augmentation call.

    The members' normalized behaviors are clustered once; each cluster is
    matched one-to-one to the nearest action prototype. A sample added
    later is acted on by the cluster whose centroid is closest to it.

    Args:
        investigator: Behavior of the current training set
        members: Samples whose behavior is clustered
        rng: Generator seeding k-means
        n_clusters: Number of clusters (at most one per prototype)
    """

    def __init__(
        self,
        investigator: BehaviorInvestigator,
        members: Sequence[WindowSample],
        rng: np.random.Generator,
        n_clusters: int = 3,
    ):
        if not members:
            raise ValueError("clustering needs a nonempty sample set")
        if not 1 <= n_clusters <= len(PROTOTYPES):
            raise ValueError(f"n_clusters must be in [1, {len(PROTOTYPES)}], got {n_clusters}")

        self.investigator = investigator
        points = np.array([self._point(s) for s in members])
        k = min(n_clusters, len(np.unique(points, axis=0)))
        with warnings.catch_warnings():
            # a cluster emptied during iteration keeps its previous centroid
            warnings.simplefilter("ignore", UserWarning)
            centroids, _ = kmeans2(points, k, minit="++", seed=rng)

        actions = list(PROTOTYPES)
        corners = np.array([PROTOTYPES[a] for a in actions])
        cost = np.linalg.norm(centroids[:, None, :] - corners[None, :, :], axis=2)
        rows, cols = linear_sum_assignment(cost)
        self.centroids = centroids[rows]
        self.actions = [actions[c] for c in cols]
        logger.debug(
            "Behavior clusters: "
            + ", ".join(f"{a.name.lower()}@({c[0]:.2f}, {c[1]:.2f})" for a, c in zip(self.actions, self.centroids))
        )

    def _point(self, s: WindowSample) -> np.ndarray:
        record = self.investigator.record(s)
        return np.array([record.r_l, record.r_p])

    def __call__(self, s: WindowSample) -> Action:
        distances = np.linalg.norm(self.centroids - self._point(s), axis=1)
        return self.actions[int(np.argmin(distances))]
