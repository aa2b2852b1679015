"""Max-cut segmentation on the pixel lattice, solved as a QUBO.

Each pixel is a node; 4-neighbours are joined by an edge whose raw weight is
the squared intensity difference. Raw weights are all nonnegative, which makes
the max cut trivial (cut everything), so they are shifted by an offset:
dissimilar neighbours get positive weight and want to be separated, similar
neighbours get negative weight and want to stay together.

The default offset splits the raw weights into "similar" and "dissimilar"
classes with an Otsu scan and sits halfway between the two class means. The
plain mean raw weight is also available; on textured patches it is dominated
by the many near-zero similar edges, leaves the background only weakly
coupled, and the annealer then tends to stop in states where the crack
separates two background regions labelled differently.

Max-cut is minimized as ``E(x) = -sum_ij w_ij (x_i + x_j - 2 x_i x_j)``,
i.e. ``linear_i = -sum_j w_ij`` and ``quadratic_ij = 2 w_ij``, so that
``E(x) == -cut(x)`` for every assignment. The QUBO is solved locally by
simulated annealing or handed to an external sampler (see
:func:`sample_external`).
"""

from __future__ import annotations

import json
import shlex
import subprocess
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

from .core import BinaryMask, GrayPatch
from .errors import DimensionMismatchError, NoContrastError, SamplerError
from .lattice import lattice_pairs
from .mgm import NBINS, otsu_histogram, quantize


@dataclass(frozen=True)
class GridGraph:
    lattice_dims: tuple[int, int]
    i: np.ndarray
    j: np.ndarray
    weights: np.ndarray

    @property
    def n_nodes(self) -> int:
        m, n = self.lattice_dims
        return m * n

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        return [(int(a), int(b), float(w)) for a, b, w in zip(self.i, self.j, self.weights)]


@dataclass(frozen=True)
class QuboModel:
    """``E(x) = linear . x + sum_k quad_v[k] x[quad_i[k]] x[quad_j[k]]`` with quad_i < quad_j."""

    linear: np.ndarray
    quad_i: np.ndarray
    quad_j: np.ndarray
    quad_v: np.ndarray

    @property
    def n_vars(self) -> int:
        return self.linear.size

    @property
    def quadratic(self) -> dict[tuple[int, int], float]:
        return {(int(a), int(b)): float(v) for a, b, v in zip(self.quad_i, self.quad_j, self.quad_v)}

    @classmethod
    def from_dicts(cls, n_vars: int, linear=None, quadratic=None) -> "QuboModel":
        lin = np.zeros(n_vars)
        for k, v in (linear or {}).items():
            lin[k] += v
        acc: dict[tuple[int, int], float] = {}
        for (a, b), v in (quadratic or {}).items():
            if a == b:
                lin[a] += v  # x*x == x for binaries
                continue
            key = (min(a, b), max(a, b))
            acc[key] = acc.get(key, 0.0) + v
        keys = sorted(acc)
        qi = np.array([k[0] for k in keys], dtype=np.intp)
        qj = np.array([k[1] for k in keys], dtype=np.intp)
        qv = np.array([acc[k] for k in keys], dtype=np.float64)
        return cls(lin, qi, qj, qv)

    def energy(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n_vars,):
            raise DimensionMismatchError(f"length mismatch: {x.shape[0]} vs {self.n_vars}")
        return float(self.linear @ x + np.sum(self.quad_v * x[self.quad_i] * x[self.quad_j]))

    def to_request(self) -> dict:
        """JSON request body for external samplers."""
        return {
            "n": self.n_vars,
            "linear": [float(v) for v in self.linear],
            "quadratic": [[int(a), int(b), float(v)] for a, b, v in zip(self.quad_i, self.quad_j, self.quad_v)],
        }

    @classmethod
    def from_request(cls, req: dict) -> "QuboModel":
        n = int(req["n"])
        quad = {}
        for a, b, v in req.get("quadratic", []):
            quad[(int(a), int(b))] = quad.get((int(a), int(b)), 0.0) + float(v)
        return cls.from_dicts(n, dict(enumerate(req.get("linear", []))), quad)


@dataclass(frozen=True)
class AnnealSchedule:
    """Geometric cooling from ``t_initial`` to ``t_final`` over ``sweeps``.

    ``t_initial=None`` means 4 * max|w| of the graph behind the QUBO
    (max|quadratic| / 2), resolved per problem.
    """

    sweeps: int = 200
    restarts: int = 5
    t_initial: Optional[float] = None
    t_final: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.sweeps < 1 or self.restarts < 1:
            raise ValueError("sweeps and restarts must be >= 1")
        if not self.t_final > 0:
            raise ValueError("t_final must be > 0")
        if self.t_initial is not None and not self.t_initial > self.t_final:
            raise ValueError("t_initial must exceed t_final")

    def temperatures(self, q: QuboModel) -> np.ndarray:
        t0 = self.t_initial
        if t0 is None:
            wmax = float(np.abs(q.quad_v).max()) / 2.0 if q.quad_v.size else 0.0
            t0 = max(4.0 * wmax, 2.0 * self.t_final)
        if self.sweeps == 1:
            return np.array([self.t_final])
        return t0 * (self.t_final / t0) ** (np.arange(self.sweeps) / (self.sweeps - 1))


@dataclass(frozen=True)
class SampleResult:
    assignment: np.ndarray
    energy: float
    restarts_run: int = 0


def weight_offset(d: np.ndarray, rule: Union[str, float] = "otsu") -> float:
    """Offset subtracted from raw squared differences ``d``.

    ``"otsu"``: midpoint of the two class means of an Otsu split of ``d``
    (falls back to the mean when ``d`` takes a single value). ``"mean"``:
    mean of ``d``. A number is used as is.
    """
    if not isinstance(rule, str):
        return float(rule)
    if d.size == 0:
        return 0.0
    if rule == "mean":
        return float(d.mean())
    if rule != "otsu":
        raise ValueError(f"unknown offset rule {rule!r}")
    top = d.max()
    if top <= 0:
        return 0.0
    bins = quantize(d / top)
    try:
        k, _ = otsu_histogram(np.bincount(bins, minlength=NBINS))
    except NoContrastError:
        return float(d.mean())
    return 0.5 * (float(d[bins <= k].mean()) + float(d[bins > k].mean()))


def build_grid_graph(p: GrayPatch, offset: Union[str, float] = "otsu") -> GridGraph:
    """Signed 4-neighbour graph: ``w = (a_i - a_j)**2 - offset``.

    See :func:`weight_offset` for the offset rules.
    """
    m, n = p.shape
    i, j = lattice_pairs(m, n)
    a = p.data.ravel()
    d = (a[i] - a[j]) ** 2
    return GridGraph((m, n), i, j, d - weight_offset(d, offset))


def cut_value(g: GridGraph, x) -> float:
    x = np.asarray(x, dtype=bool)
    return float(np.sum(g.weights[x[g.i] != x[g.j]]))


def maxcut_to_qubo(g: GridGraph) -> QuboModel:
    lin = np.zeros(g.n_nodes)
    np.subtract.at(lin, g.i, g.weights)
    np.subtract.at(lin, g.j, g.weights)
    quad = {}
    for a, b, w in zip(g.i.tolist(), g.j.tolist(), g.weights.tolist()):
        key = (min(a, b), max(a, b))
        quad[key] = quad.get(key, 0.0) + 2.0 * w
    return QuboModel.from_dicts(g.n_nodes, dict(enumerate(lin)), quad)


def _color_classes(n: int, qi: np.ndarray, qj: np.ndarray) -> list[np.ndarray]:
    """Greedy colouring of the interaction graph (index order).

    Variables in one class share no coupling, so a whole class can be updated
    at once and still be an exact sequence of single-flip Metropolis moves.
    """
    adj: list[set[int]] = [set() for _ in range(n)]
    for a, b in zip(qi.tolist(), qj.tolist()):
        adj[a].add(b)
        adj[b].add(a)
    color = np.full(n, -1, dtype=np.intp)
    for v in range(n):
        used = {color[u] for u in adj[v] if color[u] >= 0}
        c = 0
        while c in used:
            c += 1
        color[v] = c
    return [np.flatnonzero(color == c) for c in range(color.max() + 1)] if n else []


def anneal(q: QuboModel, s: AnnealSchedule = AnnealSchedule()) -> SampleResult:
    """Single-flip Metropolis simulated annealing with geometric cooling.

    Each restart starts from a random state drawn from its own child seed of
    ``s.seed``; the lowest-energy state visited in any restart is returned,
    ties going to the earliest restart. The all-zeros state is the baseline a
    restart has to beat.
    """
    n = q.n_vars
    if n == 0:
        return SampleResult(np.zeros(0, dtype=bool), 0.0, 0)

    sym = sp.coo_matrix((np.concatenate([q.quad_v, q.quad_v]),
                         (np.concatenate([q.quad_i, q.quad_j]), np.concatenate([q.quad_j, q.quad_i]))),
                        shape=(n, n)).tocsr()
    classes = _color_classes(n, q.quad_i, q.quad_j)
    dense = n <= 512
    blocks = [(c, sym[c].toarray() if dense else sym[c], q.linear[c]) for c in classes]
    temps = s.temperatures(q)

    best_x = np.zeros(n)
    best_e = q.energy(best_x)
    for seq in np.random.SeedSequence(s.seed).spawn(s.restarts):
        rng = np.random.Generator(np.random.PCG64(seq))
        x = rng.integers(0, 2, n).astype(np.float64)
        e = q.energy(x)
        run_best_x, run_best_e = x.copy(), e
        for t in temps:
            for idx, rows, lin in blocks:
                field = lin + rows @ x
                xc = x[idx]
                de = (1.0 - 2.0 * xc) * field
                u = rng.random(idx.size)
                flip = (de <= 0.0) | (u < np.exp(-np.maximum(de, 0.0) / t))
                if flip.any():
                    x[idx[flip]] = 1.0 - xc[flip]
                    e += float(de[flip].sum())
                    if e < run_best_e:
                        run_best_e = e
                        run_best_x = x.copy()
        exact = q.energy(run_best_x)
        if exact < best_e:
            best_e, best_x = exact, run_best_x
    return SampleResult(best_x.astype(bool), q.energy(best_x), s.restarts)


def _validate_response(resp, q: QuboModel) -> SampleResult:
    if not isinstance(resp, dict) or "assignment" not in resp:
        raise SamplerError("malformed response: missing 'assignment'")
    a = resp["assignment"]
    if not isinstance(a, list) or any(v not in (0, 1) or isinstance(v, float) for v in a):
        raise SamplerError("malformed response: assignment must be a list of 0/1")
    if len(a) != q.n_vars:
        raise SamplerError(f"length mismatch: got {len(a)} values for {q.n_vars} variables")
    x = np.array(a, dtype=bool)
    return SampleResult(x, q.energy(x), 0)


def sample_external(q: QuboModel, endpoint: str, timeout: float = 600.0) -> SampleResult:
    """Solve ``q`` with an external sampler speaking the JSON contract.

    ``endpoint`` is ``cmd:<command line>`` (request on stdin, response on
    stdout) or an ``http(s)://`` URL, optionally prefixed with ``http:``
    (request POSTed as ``application/json``). Request:
    ``{"n": int, "linear": [float], "quadratic": [[i, j, float]]}``;
    response: ``{"assignment": [0|1], "energy": float}``. The reported
    energy is ignored and recomputed locally.
    """
    body = json.dumps(q.to_request())
    if endpoint.startswith("cmd:"):
        argv = shlex.split(endpoint[4:])
        if not argv:
            raise SamplerError("empty sampler command")
        try:
            proc = subprocess.run(argv, input=body, capture_output=True, text=True, timeout=timeout)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise SamplerError(f"sampler command failed: {exc}") from exc
        if proc.returncode != 0:
            raise SamplerError(f"sampler exited with {proc.returncode}: {proc.stderr.strip()}")
        raw = proc.stdout
    elif endpoint.startswith(("http:", "https:")):
        url = endpoint[5:] if endpoint[5:].startswith(("http://", "https://")) else endpoint
        req = urllib.request.Request(url, data=body.encode(), headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=timeout) as fh:
                raw = fh.read().decode()
        except (urllib.error.URLError, OSError) as exc:
            raise SamplerError(f"sampler request failed: {exc}") from exc
    else:
        raise SamplerError(f"unsupported sampler endpoint {endpoint!r}")
    try:
        resp = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SamplerError(f"malformed response: {exc}") from exc
    return _validate_response(resp, q)


def decode_mask(r: SampleResult, p: GrayPatch) -> BinaryMask:
    """Label the darker partition as crack.

    Equal mean intensity: the smaller partition is crack; equal size as
    well, or a one-sided assignment: no crack.
    """
    x = np.asarray(r.assignment, dtype=bool)
    if x.size != p.data.size:
        raise DimensionMismatchError(f"length mismatch: {x.size} vs {p.data.size} pixels")
    x = x.reshape(p.shape)
    n1 = int(x.sum())
    n0 = x.size - n1
    if n1 == 0 or n0 == 0:
        return BinaryMask(np.zeros(p.shape, dtype=bool))
    m1 = float(p.data[x].mean())
    m0 = float(p.data[~x].mean())
    if m1 != m0:
        return BinaryMask(x if m1 < m0 else ~x)
    if n1 != n0:
        return BinaryMask(x if n1 < n0 else ~x)
    return BinaryMask(np.zeros(p.shape, dtype=bool))


def segment_qseg(p: GrayPatch, s: AnnealSchedule = AnnealSchedule(), sampler: str = "local",
                 offset: Union[str, float] = "otsu") -> BinaryMask:
    """Graph, QUBO, sample, decode. ``sampler`` is ``"local"`` or an external endpoint."""
    q = maxcut_to_qubo(build_grid_graph(p, offset))
    r = anneal(q, s) if sampler == "local" else sample_external(q, sampler)
    return decode_mask(r, p)
