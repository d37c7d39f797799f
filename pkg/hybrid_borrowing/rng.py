"""
Keyed random streams for simulation replicates.

Each (seed, scenario stream key, replicate, role) tuple owns an independent
Philox stream, so results do not depend on how replicates are scheduled.
"""
import enum
from dataclasses import dataclass

import numpy as np


class StreamRole(enum.IntEnum):
    HISTORICAL = 0
    PROSPECTIVE = 1
    SELECTION = 2


def replicate_stream(seed, stream_key, replicate, role):
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(int(stream_key), int(replicate), int(role)))
    return np.random.Generator(np.random.Philox(sequence))


@dataclass(frozen=True)
class ReplicateStreams:
    seed: int
    stream_key: int
    replicate: int

    def stream(self, role):
        return replicate_stream(self.seed, self.stream_key, self.replicate, role)

    @property
    def historical(self):
        return self.stream(StreamRole.HISTORICAL)

    @property
    def prospective(self):
        return self.stream(StreamRole.PROSPECTIVE)

    @property
    def selection(self):
        return self.stream(StreamRole.SELECTION)
