"""Streaming ensemble accumulation over QSD trajectories.

Trajectories are split into a fixed number of contiguous index blocks.  Each
block is reduced to sums (overlaps with the initial state, link overlaps,
generator expectations and optionally densities) by the fused kernel; the
blocks double as jackknife groups.  Block boundaries depend only on
``n_traj`` and ``n_blocks``, so results are identical for any worker count.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import BathSpectrum, SystemModel, TimeGrid
from .noise import GeneratorKind, derive_seed, sample_noise_batch
from .qsd import OOperatorSpec, Trajectory, TrajectoryOverflowError

log = logging.getLogger(__name__)


class ConfigurationError(ValueError):
    pass


@dataclass(eq=False)
class EnsembleSums:
    """Per-block sums; axis 0 indexes blocks, axis 1 initial angles."""

    grid: TimeGrid
    model: SystemModel
    bath: BathSpectrum
    psi0: np.ndarray  # (n_theta, 2) initial states
    obar: np.ndarray  # O-bar coefficient on the grid
    counts: np.ndarray  # (B,)
    ov: np.ndarray  # (B, n_theta, n + 1)  sum <psi(0)|psi(t_j)>
    link: np.ndarray  # (B, n_theta, n)    sum <psi(t_j)|psi(t_j+1)>
    hexp: np.ndarray  # (B, n_theta, n + 1) sum <psi|h|psi>
    rho: np.ndarray  # (B, n_theta, n + 1 or 0, 2, 2)
    link_sq: np.ndarray = field(default=None)  # (B, n_theta, n) sum |link|^2, for link SEs
    thetas: np.ndarray = field(default=None)

    @property
    def n_traj(self) -> int:
        return int(self.counts.sum())

    @property
    def n_blocks(self) -> int:
        return len(self.counts)

    @property
    def has_density(self) -> bool:
        return self.rho.shape[2] > 0

    def merge(self, other: "EnsembleSums") -> "EnsembleSums":
        if other.grid != self.grid or other.model != self.model or other.bath != self.bath:
            raise ValueError("cannot merge ensembles with different grid/model/bath")
        cat = lambda a, b: np.concatenate([a, b], axis=0)  # noqa: E731
        return EnsembleSums(self.grid, self.model, self.bath, self.psi0, self.obar,
                            cat(self.counts, other.counts), cat(self.ov, other.ov),
                            cat(self.link, other.link), cat(self.hexp, other.hexp),
                            cat(self.rho, other.rho), cat(self.link_sq, other.link_sq), self.thetas)

    def save(self, path) -> None:
        np.savez_compressed(path, counts=self.counts, ov=self.ov, link=self.link, hexp=self.hexp,
                            rho=self.rho, link_sq=self.link_sq)

    @classmethod
    def from_trajectories(cls, trajs) -> "EnsembleSums":
        """One block per trajectory (seed-level jackknife)."""
        trajs = list(trajs)
        if not trajs:
            raise ValueError("empty trajectory collection")
        first = trajs[0]
        for tr in trajs[1:]:
            if tr.grid != first.grid or tr.model != first.model or tr.bath != first.bath:
                raise ConfigurationError("trajectories do not share grid, model and bath")
            if not np.array_equal(tr.states[0], first.states[0]):
                raise ConfigurationError("trajectories start from different initial states")
        psi0 = first.states[0]
        S = np.stack([tr.states for tr in trajs])  # (B, n+1, 2)
        H = np.stack([tr.generators() for tr in trajs])  # (B, n+1, 2, 2)
        ov = np.einsum("a,bja->bj", psi0.conj(), S)
        link = np.einsum("bja,bja->bj", S[:, :-1].conj(), S[:, 1:])
        hexp = np.einsum("bja,bjac,bjc->bj", S.conj(), H, S)
        rho = np.einsum("bja,bjc->bjac", S, S.conj())
        return cls(first.grid, first.model, first.bath, psi0[None, :], first.obar,
                   np.ones(len(trajs), dtype=np.int64), ov[:, None], link[:, None], hexp[:, None],
                   rho[:, None], (np.abs(link) ** 2)[:, None], np.array([first.model.theta]))


def _block_bounds(n_traj: int, n_blocks: int):
    n_blocks = max(1, min(int(n_blocks), int(n_traj)))
    edges = np.linspace(0, n_traj, n_blocks + 1).round().astype(int)
    return list(zip(edges[:-1], edges[1:]))


def _initial_states(thetas):
    th = np.asarray(thetas, dtype=float)
    return np.stack([np.cos(0.5 * th), np.sin(0.5 * th)], axis=1).astype(np.complex128)


@dataclass(frozen=True)
class _BlockTask:
    model: SystemModel
    bath: BathSpectrum
    grid: TimeGrid
    half_obar: np.ndarray
    psi0: np.ndarray
    root_seed: int
    start: int
    stop: int
    kind: GeneratorKind
    want_rho: bool
    chunk: int
    backend: str | None


def _run_block(task: _BlockTask):
    nth, n1 = len(task.psi0), len(task.grid)
    ov = np.zeros((nth, n1), dtype=np.complex128)
    link = np.zeros((nth, n1 - 1), dtype=np.complex128)
    link_sq = np.zeros((nth, n1 - 1))
    hexp = np.zeros((nth, n1), dtype=np.complex128)
    rho = np.zeros((nth, n1 if task.want_rho else 0, 2, 2), dtype=np.complex128)
    ops = task.model.operators()
    for lo in range(task.start, task.stop, task.chunk):
        hi = min(lo + task.chunk, task.stop)
        seeds = [derive_seed(task.root_seed, i) for i in range(lo, hi)]
        u = sample_noise_batch(task.bath, task.grid, seeds, task.kind, backend=task.backend)
        o, lk, lsq, hx, rh, status = _kernels.accumulate(ops, u, task.half_obar, task.grid.dt, task.psi0,
                                                         task.want_rho, backend=task.backend)
        bad = np.flatnonzero(status >= 0)
        if bad.size:
            raise TrajectoryOverflowError(task.grid.times[status[bad[0]]], index=lo + int(bad[0]))
        ov += o
        link += lk
        link_sq += lsq
        hexp += hx
        rho += rh
    return task.stop - task.start, ov, link, hexp, rho, link_sq


def run_ensemble(model: SystemModel, bath: BathSpectrum, grid: TimeGrid, n_traj: int, thetas=None,
                 root_seed: int = 0, n_blocks: int = 100, workers: int = 1,
                 kind=GeneratorKind.RECURSIVE, want_rho: bool = False, ospec: OOperatorSpec | None = None,
                 chunk: int = 64, backend: str | None = None, checkpoint: str | None = None) -> EnsembleSums:
    """Integrate ``n_traj`` trajectories and reduce them to per-block sums.

    Trajectory ``i`` always uses the noise stream ``derive_seed(root_seed, i)``
    and the same initial angles, so any worker count gives identical sums.
    If ``checkpoint`` is a path, finished blocks are stored there and reused.
    """
    if n_traj < 1:
        raise ConfigurationError("n_traj must be >= 1")
    thetas = np.atleast_1d(model.theta if thetas is None else np.asarray(thetas, dtype=float))
    ospec = ospec or OOperatorSpec.build(model, bath, grid)
    psi0 = _initial_states(thetas)
    tasks = [_BlockTask(model, bath, grid, ospec.half_values, psi0, int(root_seed), lo, hi,
                        GeneratorKind(kind), want_rho, chunk, backend)
             for lo, hi in _block_bounds(n_traj, n_blocks)]
    done = _load_checkpoint(checkpoint, len(tasks))
    pending = [i for i in range(len(tasks)) if i not in done]
    if workers > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, res in zip(pending, pool.map(_run_block, [tasks[i] for i in pending])):
                done[i] = res
                _save_checkpoint(checkpoint, done)
    else:
        for i in pending:
            done[i] = _run_block(tasks[i])
            _save_checkpoint(checkpoint, done)
            log.debug("block %d/%d done", i + 1, len(tasks))
    results = [done[i] for i in range(len(tasks))]
    counts = np.array([r[0] for r in results], dtype=np.int64)
    stack = lambda k: np.stack([r[k] for r in results])  # noqa: E731
    return EnsembleSums(grid, model, bath, psi0, ospec.values, counts, stack(1), stack(2), stack(3),
                        stack(4), stack(5), thetas)


def _load_checkpoint(path, n_tasks):
    if not path or not os.path.exists(path):
        return {}
    data = np.load(path)
    done = {}
    for i in range(n_tasks):
        key = f"b{i}_"
        if key + "count" in data:
            done[i] = (int(data[key + "count"]),) + tuple(data[key + k] for k in ("ov", "link", "hexp", "rho", "link_sq"))
    return done


def _save_checkpoint(path, done):
    if not path:
        return
    arrays = {}
    for i, r in done.items():
        for k, v in zip(("count", "ov", "link", "hexp", "rho", "link_sq"), r):
            arrays[f"b{i}_{k}"] = v
    tmp = str(path) + ".tmp.npz"
    np.savez(tmp, **arrays)
    os.replace(tmp, path)


def simulate_trajectories(model: SystemModel, bath: BathSpectrum, grid: TimeGrid, n_traj: int,
                          root_seed: int = 0, kind=GeneratorKind.RECURSIVE, ospec=None,
                          backend=None) -> list[Trajectory]:
    """Full state paths for a (small) ensemble, same seeding as :func:`run_ensemble`."""
    ospec = ospec or OOperatorSpec.build(model, bath, grid)
    seeds = [derive_seed(root_seed, i) for i in range(n_traj)]
    u = sample_noise_batch(bath, grid, seeds, kind, backend=backend)
    psi0 = np.repeat(_initial_states([model.theta]), n_traj, axis=0)
    states, status = _kernels.propagate(model.operators(), u, ospec.half_values, grid.dt, psi0, backend=backend)
    bad = np.flatnonzero(status >= 0)
    if bad.size:
        raise TrajectoryOverflowError(grid.times[status[bad[0]]], index=int(bad[0]))
    return [Trajectory(grid, states[i], (root_seed, i), model, bath, u[i], ospec.values) for i in range(n_traj)]
