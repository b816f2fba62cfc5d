"""Index streams that drive the stochastic gradient methods."""

from dataclasses import dataclass
import math

import numpy as np

from ._rng import STREAM_SAMPLER, make_rng
from ._validation import check_int
from .chains import iter_trajectory, mixing_time_exact, sample_trajectory

SAMPLER_MODES = ("markov", "iid", "reshuffle", "wait_for_mix")
TRAJECTORY_CHUNK = 1 << 20


@dataclass(frozen=True)
class SamplerStream:
    """Deterministic node stream for a given ``(mode, chain, seed)``.

    ``markov`` is the raw chain trajectory; ``iid`` draws from ``pi``;
    ``reshuffle`` concatenates uniform random permutations of ``0..n-1``;
    ``wait_for_mix`` keeps every ``k``-th state of the trajectory (``k``
    defaults to the chain's mixing time), each kept sample costing ``k``
    token moves.
    """

    mode: str
    chain: object = None
    seed: int = 0
    k: int = None
    v0: object = "stationary"
    n: int = None

    def __post_init__(self):
        if self.mode not in SAMPLER_MODES:
            raise ValueError(f"unknown sampler mode {self.mode!r}; expected one of {SAMPLER_MODES}")
        if self.chain is None and self.mode != "reshuffle":
            raise ValueError(f"sampler mode {self.mode!r} needs a chain")
        if self.chain is None and self.n is None:
            raise ValueError("reshuffle without a chain needs n")

    @property
    def n_nodes(self):
        return self.chain.n if self.chain is not None else self.n

    @property
    def stride(self):
        if self.mode != "wait_for_mix":
            return 1
        if self.k is not None:
            return check_int(self.k, "k", minimum=1)
        return mixing_time_exact(self.chain, self.chain.pi_min / 2.0)

    @property
    def comms_per_sample(self):
        return self.stride

    def nodes(self, T):
        """First ``T`` emitted node ids as an int64 array."""
        T = check_int(T, "T", minimum=0)
        if T == 0:
            return np.zeros(0, dtype=np.int64)
        if self.mode == "markov":
            return sample_trajectory(self.chain, self.v0, T, self.seed)
        if self.mode == "wait_for_mix":
            k = self.stride
            return sample_trajectory(self.chain, self.v0, (T - 1) * k + 1, self.seed)[::k]
        rng = make_rng(self.seed, STREAM_SAMPLER, 2)
        if self.mode == "iid":
            cdf = np.cumsum(self.chain.pi)
            cdf[-1] = 1.0
            return np.searchsorted(cdf, rng.random(T), side="right").astype(np.int64)
        n = self.n_nodes
        epochs = math.ceil(T / n)
        return np.concatenate([rng.permutation(n) for _ in range(epochs)])[:T].astype(np.int64)

    def iter_nodes(self, T, chunk=None):
        """The same stream as :meth:`nodes`, in blocks of at most ``chunk`` ids."""
        T = check_int(T, "T", minimum=0)
        chunk = TRAJECTORY_CHUNK if chunk is None else chunk
        if T == 0:
            return
        if self.mode == "markov":
            yield from iter_trajectory(self.chain, self.v0, T, self.seed, chunk)
            return
        all_nodes = self.nodes(T)
        for k in range(0, T, chunk):
            yield all_nodes[k:k + chunk]
