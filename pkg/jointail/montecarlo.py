"""Deterministic parallel Monte Carlo engine.

Every estimate is a pure function of (task, N, StreamKey). Samples are drawn
in fixed chunks of CHUNK_SIZE, each from its own Philox stream keyed by the
parent key extended with the chunk index, and chunk sums are merged in chunk
order. The worker count therefore never changes a result.
"""
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence
from typing_extensions import Self
from pydantic import BaseModel, ConfigDict, Field
import math
import numpy as np

from .model import MCEstimate
from .log import *

CHUNK_SIZE = 1 << 16

Task = Callable[[np.random.Generator, int], np.ndarray]
"""Pure sampling function: (generator, size) -> values of shape (size,) or (size, k)"""

class StreamKey(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int = Field(ge=0, lt=1 << 64)
    path: tuple[int, ...] = ()

    def child(self, *index: int) -> Self:
        for i in index:
            if not 0 <= i < 1 << 32:
                raise ValueError(f'stream path index {i} is not a 32-bit unsigned integer')
        return self.model_copy(update={'path': self.path + tuple(index)})

    def bit_generator(self) -> np.random.Philox:
        return np.random.Philox(np.random.SeedSequence(self.seed, spawn_key=self.path))

    def generator(self) -> np.random.Generator:
        return np.random.Generator(self.bit_generator())

    def __str__(self) -> str:
        return f'{self.seed}/' + '/'.join(str(i) for i in self.path)

def _chunks(n: int) -> list[int]:
    full, rest = divmod(n, CHUNK_SIZE)
    return [CHUNK_SIZE] * full + ([rest] if rest else [])

def _run_chunk(task: Task, key: StreamKey, index: int, size: int) -> tuple[np.ndarray, np.ndarray]:
    values = np.asarray(task(key.child(index).generator(), size), dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    if values.shape[0] != size:
        raise ValueError(f'task returned {values.shape[0]} rows for a chunk of {size}')
    return values.sum(axis=0), np.square(values).sum(axis=0)

def run_parallel_many(task: Task, n: int, key: StreamKey, workers: int = 1) -> list[MCEstimate]:
    """One estimate per task column, all columns sharing the same draws."""
    if n < 1:
        raise ValueError(f'sample count must be positive, got {n}')
    sizes = _chunks(n)
    debug(f'{key}: {n} samples in {len(sizes)} chunks on {workers} workers')

    try:
        if workers <= 1 or len(sizes) == 1:
            parts = [_run_chunk(task, key, i, s) for i, s in enumerate(sizes)]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_run_chunk, task, key, i, s) for i, s in enumerate(sizes)]
                parts = [f.result() for f in futures]
    except Exception as e:
        raise RuntimeError(f'monte carlo job failed at key {key}: {e}') from e

    total = np.zeros_like(parts[0][0])
    total_sq = np.zeros_like(parts[0][1])
    for s, sq in parts:
        total = total + s
        total_sq = total_sq + sq
    return [MCEstimate.from_sums(n, float(t), float(q)) for t, q in zip(total, total_sq)]

def run_parallel(task: Task, n: int, key: StreamKey, workers: int = 1) -> MCEstimate:
    estimates = run_parallel_many(task, n, key, workers)
    if len(estimates) != 1:
        raise ValueError(f'task produced {len(estimates)} columns, use run_parallel_many')
    return estimates[0]

def pool(estimates: Sequence[MCEstimate]) -> MCEstimate:
    """Merge estimates of the same quantity from disjoint streams."""
    if not estimates:
        raise ValueError('cannot pool an empty list of estimates')
    n = sum(e.n for e in estimates)
    if n == 0:
        raise ValueError('cannot pool exact values')
    mean = sum(e.n * e.mean for e in estimates) / n
    se = math.sqrt(sum((e.n * e.se) ** 2 for e in estimates)) / n
    unresolved = all(e.unresolved for e in estimates)
    return MCEstimate(mean=mean, se=se, n=n, unresolved=unresolved)

def total(estimates: Sequence[MCEstimate]) -> MCEstimate:
    """Sum of independent estimates of different quantities."""
    if not estimates:
        raise ValueError('cannot add an empty list of estimates')
    return MCEstimate(mean=sum(e.mean for e in estimates),
                      se=math.sqrt(sum(e.se ** 2 for e in estimates)),
                      n=max(e.n for e in estimates),
                      unresolved=all(e.unresolved for e in estimates))

def conditional(joint: MCEstimate, given: MCEstimate) -> MCEstimate:
    """P[A | B] from hit estimates of A and B (A inside B) over the same draws."""
    hits = given.hits
    if given.unresolved or hits <= 0:
        return MCEstimate(mean=0.0, se=0.0, n=0, unresolved=True)
    p = min(joint.hits / hits, 1.0)
    return MCEstimate(mean=p,
                      se=math.sqrt(p * (1 - p) / hits),
                      n=int(round(hits)),
                      unresolved=joint.unresolved)

__all__ = [
    'CHUNK_SIZE',
    'Task',
    'StreamKey',
    'run_parallel',
    'run_parallel_many',
    'pool',
    'total',
    'conditional',
]
