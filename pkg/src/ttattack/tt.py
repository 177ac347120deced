"""Tensor-train tensors: construction, evaluation, sampling, likelihood gradients.

A d-dimensional tensor is stored as a chain of 3-axis cores; entry
(n_1, ..., n_d) is the scalar collapse of the matrix product

    T[n] = G_1[:, n_1, :] @ G_2[:, n_2, :] @ ... @ G_d[:, n_d, :]

with boundary ranks 1.  Multi-indices are 1-based everywhere in the public
API: entry i runs over {1, ..., N_i}.  A strictly positive train doubles as
an unnormalized probability mass function over multi-indices, which is what
the candidate sampler and the log-likelihood gradient operate on.
"""

from __future__ import annotations

import numpy as np

from .binfmt import Reader, pack_floats, pack_ints

__all__ = [
    "TTTensor",
    "LIKELIHOOD_FLOOR",
    "tt_random_nonneg",
    "tt_get",
    "tt_sample",
    "tt_log_likelihood_grad",
    "tt_ascent_step",
]

# Entry values at or below this floor are clamped inside log() and its
# gradient so both stay finite.
LIKELIHOOD_FLOOR = 1e-300

_MAGIC = b"TTT1"
_TINY = np.finfo(np.float64).tiny


class TTTensor:
    """Chain of 3-axis cores; core i has shape (ranks[i], mode_sizes[i], ranks[i+1]).

    Instances are treated as immutable: update operations return new tensors.
    """

    def __init__(self, cores):
        cores = [np.array(c, dtype=np.float64, order="C") for c in cores]
        if len(cores) == 0:
            raise ValueError("a tensor train needs at least one core")
        for i, c in enumerate(cores):
            if c.ndim != 3:
                raise ValueError(f"core {i} must have 3 axes, got shape {c.shape}")
            if min(c.shape) < 1:
                raise ValueError(f"core {i} has an empty axis: {c.shape}")
        if cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
            raise ValueError("boundary ranks must equal 1")
        for i in range(len(cores) - 1):
            if cores[i].shape[2] != cores[i + 1].shape[0]:
                raise ValueError(
                    f"rank mismatch between cores {i} and {i + 1}: "
                    f"{cores[i].shape[2]} vs {cores[i + 1].shape[0]}"
                )
        self.cores = cores

    @property
    def ndim(self) -> int:
        return len(self.cores)

    @property
    def mode_sizes(self) -> list[int]:
        return [c.shape[1] for c in self.cores]

    @property
    def ranks(self) -> list[int]:
        return [1] + [c.shape[2] for c in self.cores]

    def copy(self) -> "TTTensor":
        return TTTensor([c.copy() for c in self.cores])

    # -- serialization: magic TTT1, int64 d, mode sizes, ranks, then cores --

    def to_bytes(self) -> bytes:
        parts = [_MAGIC, pack_ints([self.ndim]), pack_ints(self.mode_sizes),
                 pack_ints(self.ranks)]
        parts.extend(pack_floats(c) for c in self.cores)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "TTTensor":
        r = Reader(data, _MAGIC)
        (d,) = r.ints(1)
        if d < 1:
            raise ValueError(f"invalid dimension count {d}")
        sizes = r.ints(d)
        ranks = r.ints(d + 1)
        cores = [r.floats((ranks[i], sizes[i], ranks[i + 1])) for i in range(d)]
        r.expect_end()
        return cls(cores)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "TTTensor":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def _capped_ranks(mode_sizes, rank: int) -> list[int]:
    # Internal rank i is capped at min(rank, prod of sizes left of the bond,
    # prod right of the bond); the running products saturate at `rank` so
    # construction stays O(d) even for thousands of modes.
    d = len(mode_sizes)
    left = [1] * (d + 1)
    for i in range(d):
        left[i + 1] = min(rank, left[i] * mode_sizes[i])
    right = [1] * (d + 1)
    for i in range(d - 1, -1, -1):
        right[i] = min(rank, right[i + 1] * mode_sizes[i])
    ranks = [min(rank, left[i], right[i]) for i in range(d + 1)]
    ranks[0] = ranks[d] = 1
    return ranks


def tt_random_nonneg(mode_sizes, rank: int, seed: int) -> TTTensor:
    """Random strictly positive train with entries i.i.d. uniform on (0, 1).

    Internal ranks are capped at the largest feasible value, so `rank` is an
    upper bound rather than an exact bond dimension.
    """
    mode_sizes = [int(n) for n in mode_sizes]
    if len(mode_sizes) == 0:
        raise ValueError("mode_sizes must be non-empty")
    if any(n < 1 for n in mode_sizes):
        raise ValueError("every mode size must be >= 1")
    if rank < 1:
        raise ValueError("rank must be >= 1")
    ranks = _capped_ranks(mode_sizes, int(rank))
    rng = np.random.default_rng(seed)
    cores = []
    for i, n in enumerate(mode_sizes):
        # 1 - U[0,1) is strictly positive
        cores.append(1.0 - rng.random((ranks[i], n, ranks[i + 1])))
    return TTTensor(cores)


def _index_array(t: TTTensor, indices, allow_batch: bool) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim == 1 and not allow_batch:
        pass
    elif idx.ndim == 2 and allow_batch:
        pass
    else:
        raise ValueError(f"multi-index array has wrong shape {idx.shape}")
    if idx.shape[-1] != t.ndim:
        raise IndexError(
            f"multi-index length {idx.shape[-1]} does not match dimension {t.ndim}"
        )
    sizes = np.asarray(t.mode_sizes, dtype=np.int64)
    if np.any(idx < 1) or np.any(idx > sizes):
        raise IndexError("multi-index entry outside its mode range (entries are 1-based)")
    return idx


def tt_get(t: TTTensor, n) -> float:
    """Evaluate one entry; `n` is a 1-based multi-index of length d."""
    idx = _index_array(t, n, allow_batch=False)
    v = t.cores[0][:, idx[0] - 1, :]
    for i in range(1, t.ndim):
        v = v @ t.cores[i][:, idx[i] - 1, :]
    return float(v[0, 0])


def tt_get_many(t: TTTensor, indices) -> np.ndarray:
    """Evaluate a batch of entries; `indices` has shape (count, d), 1-based."""
    idx = _index_array(t, indices, allow_batch=True)
    v = np.transpose(t.cores[0][:, idx[:, 0] - 1, :], (1, 0, 2))
    for i in range(1, t.ndim):
        g = np.transpose(t.cores[i][:, idx[:, i] - 1, :], (1, 0, 2))
        v = np.matmul(v, g)
    return v[:, 0, 0].copy()


# ---------------------------------------------------------------------------
# sampling


def tt_sample(t: TTTensor, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw `count` multi-indices from the train read as an unnormalized pmf.

    Sequential conditional sampling: right interface vectors are
    rho[d] = [1], rho[i] = (sum over the mode of core i+1) @ rho[i+1]; at mode
    i the conditional weight of value n is ell @ G_i[:, n, :] @ rho[i+1],
    where ell is the left interface row for the values already drawn.
    Negative weights are clipped to zero; if a mode's weights are all zero
    after clipping, that mode falls back to the uniform categorical.

    Returns an int64 array of shape (count, d) with 1-based entries.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    d = t.ndim
    # Right interfaces, rescaled as they accumulate; only weight ratios
    # matter.  kernels[i] = G_i @ rho[i+1] gives per-mode weights in one
    # matmul with the left interface.
    kernels = [None] * d
    rho = np.ones(1)
    for i in range(d - 1, -1, -1):
        kernels[i] = t.cores[i] @ rho
        rho = kernels[i].sum(axis=1)
        rho /= max(np.abs(rho).max(), _TINY)
        if i > 0:
            kernels[i] /= max(np.abs(kernels[i]).max(), _TINY)
    out = np.empty((count, d), dtype=np.int64)
    ell = np.ones((count, 1))
    for i in range(d):
        n_i = t.cores[i].shape[1]
        w = ell @ kernels[i]
        np.maximum(w, 0.0, out=w)
        cdf = np.cumsum(w, axis=1)
        totals = cdf[:, -1].copy()
        degenerate = totals <= 0.0
        if degenerate.any():
            cdf[degenerate] = np.arange(1, n_i + 1, dtype=np.float64)
            totals[degenerate] = n_i
        u = rng.random(count) * totals
        chosen = np.minimum((u[:, None] >= cdf).sum(axis=1), n_i - 1)
        out[:, i] = chosen + 1
        if i < d - 1:
            g = np.transpose(t.cores[i][:, chosen, :], (1, 0, 2))
            ell = np.matmul(ell[:, None, :], g)[:, 0, :]
            norms = np.maximum(np.abs(ell).max(axis=1, keepdims=True), _TINY)
            ell /= norms
    return out


# ---------------------------------------------------------------------------
# log-likelihood gradient
#
# The gradient of log T[n] with respect to core i is rank-1:
#     d log T[n] / d G_i[a, n_i, b] = L[a] * R[b] / T[n]
# with L the product of cores 1..i-1 and R of cores i+1..d at the sampled
# indices.  All interface products below are rescaled per step with the log
# of the scale tracked separately, so the computation never overflows; the
# scales cancel exactly in L*R/T.


def _stack_cores(t: TTTensor):
    d = t.ndim
    r = max(t.ranks)
    n = max(t.mode_sizes)
    stack = np.zeros((d, r, n, r))
    for i, c in enumerate(t.cores):
        stack[i, : c.shape[0], : c.shape[1], : c.shape[2]] = c
    return stack


def _unstack_cores(stack, mode_sizes, ranks) -> TTTensor:
    cores = [
        stack[i, : ranks[i], : mode_sizes[i], : ranks[i + 1]].copy()
        for i in range(len(mode_sizes))
    ]
    return TTTensor(cores)


def _renorm(p, scale):
    m = np.abs(p).max(axis=(2, 3))
    np.maximum(m, _TINY, out=m)
    p /= m[:, :, None, None]
    scale += np.log(m)


def _prefix_scan(mats):
    # Inclusive left-to-right products along axis 0 in log2(d) batched matmul
    # rounds; returns rescaled products plus per-matrix log scales.
    p = mats.copy()
    scale = np.zeros(p.shape[:2])
    _renorm(p, scale)
    off = 1
    d = p.shape[0]
    while off < d:
        p[off:] = np.matmul(p[:-off], p[off:])
        scale[off:] = scale[:-off] + scale[off:]
        _renorm(p, scale)
        off *= 2
    return p, scale


def _suffix_scan(mats):
    p = mats.copy()
    scale = np.zeros(p.shape[:2])
    _renorm(p, scale)
    off = 1
    d = p.shape[0]
    while off < d:
        p[:-off] = np.matmul(p[:-off], p[off:])
        scale[:-off] = scale[:-off] + scale[off:]
        _renorm(p, scale)
        off *= 2
    return p, scale


def _grad_stack(stack, idx0, onehot):
    # stack: (d, r, n, r) zero-padded cores; idx0: (k, d) 0-based indices;
    # onehot: (d, k, n) indicator of idx0.  Returns the gradient of
    # sum_j log T[n_j] in the same stacked layout.
    d, r = stack.shape[0], stack.shape[1]
    k = idx0.shape[0]
    slices = stack[np.arange(d)[:, None], :, idx0.T, :]  # (d, k, r, r)

    pre, pre_log = _prefix_scan(slices)
    suf, suf_log = _suffix_scan(slices)

    left = np.zeros((d, k, r))
    left[0, :, 0] = 1.0
    left[1:] = pre[:-1, :, 0, :]
    left_log = np.zeros((d, k))
    left_log[1:] = pre_log[:-1]

    right = np.zeros((d, k, r))
    right[d - 1, :, 0] = 1.0
    right[:-1] = suf[1:, :, :, 0]
    right_log = np.zeros((d, k))
    right_log[:-1] = suf_log[1:]

    # Entry value per sample, kept as (mantissa, log scale) to spot the
    # clamp cases without overflow.
    t_mant = pre[-1, :, 0, 0]
    t_log = pre_log[-1]
    clamped = (t_mant <= 0.0) | (np.log(np.maximum(np.abs(t_mant), _TINY)) + t_log
                                 <= np.log(LIKELIHOOD_FLOOR))

    # Per-mode denominator equals T[n] under the same rescaling as left/right,
    # so the scales cancel exactly in the normal case.
    den = np.einsum("dka,dkab,dkb->dk", left, slices, right)
    coef = np.empty((d, k))
    normal = ~clamped
    with np.errstate(divide="ignore"):
        coef[:, normal] = 1.0 / den[:, normal]
    if np.any(clamped):
        coef[:, clamped] = np.exp(
            left_log[:, clamped] + right_log[:, clamped] - np.log(LIKELIHOOD_FLOOR)
        )

    contrib = (left[:, :, :, None] * right[:, :, None, :]) * coef[:, :, None, None]
    grad = np.einsum("dkn,dkab->dnab", onehot, contrib)
    return grad.transpose(0, 2, 1, 3)


def _onehot(idx0, d, k, n):
    h = np.zeros((d, k, n))
    h[np.arange(d)[:, None], np.arange(k)[None, :], idx0.T] = 1.0
    return h


def tt_log_likelihood_grad(t: TTTensor, batch) -> list[np.ndarray]:
    """Gradient of sum_j log T[n_j] with respect to every core entry.

    `batch` has shape (count, d) with 1-based entries.  Samples whose entry
    value is at or below LIKELIHOOD_FLOOR are evaluated with the value
    clamped to the floor, which keeps the gradient finite.  Returns one
    array per core, shaped like that core.
    """
    idx = _index_array(t, batch, allow_batch=True)
    idx0 = idx - 1
    d = t.ndim
    stack = _stack_cores(t)
    onehot = _onehot(idx0, d, idx0.shape[0], stack.shape[2])
    grad = _grad_stack(stack, idx0, onehot)
    sizes, ranks = t.mode_sizes, t.ranks
    return [
        grad[i, : ranks[i], : sizes[i], : ranks[i + 1]].copy() for i in range(d)
    ]


def tt_ascent_step(t: TTTensor, grad, lr: float) -> TTTensor:
    """Return the train with every core updated as G + lr * grad."""
    if len(grad) != t.ndim:
        raise ValueError("gradient set does not match the number of cores")
    cores = []
    for c, g in zip(t.cores, grad):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != c.shape:
            raise ValueError(f"gradient shape {g.shape} does not match core {c.shape}")
        cores.append(c + lr * g)
    return TTTensor(cores)


def tt_ascent_run(t: TTTensor, batch, steps: int, lr: float) -> TTTensor:
    """Run `steps` gradient-ascent updates of sum_j log T[n_j] on a fixed batch.

    Equivalent to alternating tt_log_likelihood_grad and tt_ascent_step.  The
    fixed batch means only the core slices the samples pass through can ever
    change, so those slices are updated in place across steps and written
    back into the cores once at the end.  Interface products are kept raw
    while the chain value stays in a comfortable float range; outside it the
    step falls back to the rescaled path of tt_log_likelihood_grad.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    idx = _index_array(t, batch, allow_batch=True)
    idx0 = idx - 1
    d = t.ndim
    k = idx0.shape[0]
    stack = _stack_cores(t)
    r = stack.shape[1]
    rows = np.arange(d)[:, None]
    slices = stack[rows, :, idx0.T, :].copy()  # (d, k, r, r) current values
    # same_slice[i, j, j'] marks samples that share the value at mode i, so
    # one batched matmul applies every sample's contribution to every slice.
    same_slice = (idx0.T[:, :, None] == idx0.T[:, None, :]).astype(np.float64)
    # Both interface scans run in one loop: rows 0..k-1 carry the left
    # products through slices[i], rows k..2k-1 carry the transposed right
    # products through slices[d-i] transposed.
    walk = np.zeros((d, 2 * k, 1, r))
    walk[0, :, 0, 0] = 1.0
    steps_mats = np.empty((d - 1, 2 * k, r, r)) if d > 1 else None
    walk_views = [walk[i] for i in range(d)]
    mat_views = [steps_mats[i] for i in range(d - 1)] if d > 1 else []
    left = walk[:, :k, 0, :]  # left[i] = product of slices before mode i
    right = walk[::-1, k:, 0, :]  # right[i] = product after mode i
    last_left = walk[d - 1, :k]
    last_slice = slices[d - 1]
    outer = np.empty((d, k, r, r))
    update = np.empty((d, k, r * r))
    matmul = np.matmul
    onehot = None
    step = 0
    while step < steps:
        if d > 1:
            steps_mats[:, :k] = slices[:-1]
            steps_mats[:, k:] = slices[1:][::-1].transpose(0, 1, 3, 2)
        for i in range(1, d):
            matmul(walk_views[i - 1], mat_views[i - 1], out=walk_views[i])
        values = matmul(last_left, last_slice)[:, 0, 0]
        if not np.all((values > 1e-200) & (values < 1e200)):
            # overflow / clamp territory: finish with the rescaled path
            stack[rows, :, idx0.T, :] = slices
            if onehot is None:
                onehot = _onehot(idx0, d, k, stack.shape[2])
            for _ in range(step, steps):
                stack += lr * _grad_stack(stack, idx0, onehot)
            return _unstack_cores(stack, t.mode_sizes, t.ranks)
        scaled = left * (lr / values)[None, :, None]
        np.multiply(scaled[:, :, :, None], right[:, :, None, :], out=outer)
        np.matmul(same_slice, outer.reshape(d, k, r * r), out=update)
        slices += update.reshape(d, k, r, r)
        step += 1
    stack[rows, :, idx0.T, :] = slices
    return _unstack_cores(stack, t.mode_sizes, t.ranks)
