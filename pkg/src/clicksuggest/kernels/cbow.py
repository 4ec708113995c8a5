"""CBOW negative-sampling training kernels.

Both backends consume the same splitmix64 random stream in the same order,
so they draw identical windows and negatives; they differ only in
floating-point summation order.

Per position the update is a plain SGD step on

    loss = softplus(-h . out[target]) + sum_neg softplus(h . out[neg])

where ``h`` is the mean of the context input vectors.  All sample scores are
computed from the pre-update output rows, so a step is exactly
``-alpha * grad`` even when a negative repeats.
"""

from __future__ import annotations

import math

import numpy as np

from .. import _accel
from .._accel import njit

_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1
_INV53 = 1.0 / (1 << 53)


@njit(nogil=True, cache=True)
def _next_u64(state):
    s = state[0] + np.uint64(_GOLDEN)
    state[0] = s
    z = (s ^ (s >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


@njit(nogil=True, cache=True)
def _uniform(state):
    return np.float64(_next_u64(state) >> np.uint64(11)) * _INV53


@njit(nogil=True, cache=True)
def _softplus(x):
    if x > 0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


@njit(nogil=True, cache=True)
def _sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@njit(nogil=True, cache=True)
def cbow_step_nb(w_in, w_out, ctx, n_ctx, samples, labels, n_samples, alpha, h, grad_h, g):
    """One SGD step for a single (context, samples) group; returns the loss.

    ``labels[j]`` is 1.0 for the target and 0.0 for negatives.
    """
    dim = w_in.shape[1]
    inv = 1.0 / n_ctx
    for k in range(dim):
        acc = 0.0
        for c in range(n_ctx):
            acc += w_in[ctx[c], k]
        h[k] = acc * inv
        grad_h[k] = 0.0
    loss = 0.0
    for j in range(n_samples):
        row = samples[j]
        f = 0.0
        for k in range(dim):
            f += h[k] * w_out[row, k]
        if labels[j] > 0.5:
            loss += _softplus(-f)
        else:
            loss += _softplus(f)
        g[j] = labels[j] - _sigmoid(f)
        for k in range(dim):
            grad_h[k] += g[j] * w_out[row, k]
    for j in range(n_samples):
        row = samples[j]
        step = alpha * g[j]
        for k in range(dim):
            w_out[row, k] += step * h[k]
    for c in range(n_ctx):
        row = ctx[c]
        for k in range(dim):
            w_in[row, k] += alpha * grad_h[k] * inv
    return loss


def cbow_step_np(w_in, w_out, ctx, samples, labels, alpha):
    h = w_in[ctx].astype(np.float64).mean(axis=0)
    outs = w_out[samples].astype(np.float64)
    f = outs @ h
    loss = float(np.sum(np.logaddexp(0.0, np.where(labels > 0.5, -f, f))))
    g = labels - 1.0 / (1.0 + np.exp(-f))
    grad_h = g @ outs
    np.add.at(w_out, samples, alpha * np.outer(g, h))
    np.add.at(w_in, ctx, alpha * grad_h / len(ctx))
    return loss


@njit(nogil=True, cache=True)
def _train_epoch_nb(tokens, offsets, w_in, w_out, cum, keep_prob, window, negatives,
                    alpha0, alpha_min, done0, total_work, state, stats):
    dim = w_in.shape[1]
    vocab = w_in.shape[0]
    h = np.empty(dim, dtype=np.float64)
    grad_h = np.empty(dim, dtype=np.float64)
    g = np.empty(negatives + 1, dtype=np.float64)
    samples = np.empty(negatives + 1, dtype=np.int64)
    labels = np.empty(negatives + 1, dtype=np.float64)
    ctx = np.empty(2 * window, dtype=np.int64)
    longest = 0
    for s in range(len(offsets) - 1):
        if offsets[s + 1] - offsets[s] > longest:
            longest = offsets[s + 1] - offsets[s]
    sent = np.empty(longest, dtype=np.int64)
    subsample = len(keep_prob) > 0
    done = done0
    loss_sum = 0.0
    n_pos = 0
    win = np.uint64(window)
    for s in range(len(offsets) - 1):
        n = 0
        for p in range(offsets[s], offsets[s + 1]):
            t = tokens[p]
            if subsample and _uniform(state) >= keep_prob[t]:
                continue
            sent[n] = t
            n += 1
        for i in range(n):
            alpha = alpha0 - (alpha0 - alpha_min) * (done / total_work)
            if alpha < alpha_min:
                alpha = alpha_min
            done += 1
            radius = 1 + np.int64(_next_u64(state) % win)
            n_ctx = 0
            for j in range(max(0, i - radius), min(n, i + radius + 1)):
                if j != i:
                    ctx[n_ctx] = sent[j]
                    n_ctx += 1
            if n_ctx == 0:
                continue
            target = sent[i]
            samples[0] = target
            labels[0] = 1.0
            n_s = 1
            for _ in range(negatives):
                u = _uniform(state)
                d = np.searchsorted(cum, u, side="right")
                if d >= vocab:
                    d = vocab - 1
                if d == target:
                    continue
                samples[n_s] = d
                labels[n_s] = 0.0
                n_s += 1
            loss_sum += cbow_step_nb(w_in, w_out, ctx, n_ctx, samples, labels, n_s, alpha, h, grad_h, g)
            n_pos += 1
        done += offsets[s + 1] - offsets[s] - n
    stats[0] += loss_sum
    stats[1] += n_pos
    return done


class _PyRng:
    """Pure-Python splitmix64 matching ``_next_u64``."""

    def __init__(self, state: np.ndarray):
        self.arr = state
        self.s = int(state[0])

    def next(self) -> int:
        self.s = (self.s + _GOLDEN) & _MASK
        z = self.s
        z = ((z ^ (z >> 30)) * _M1) & _MASK
        z = ((z ^ (z >> 27)) * _M2) & _MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return (self.next() >> 11) * _INV53

    def commit(self) -> None:
        self.arr[0] = np.uint64(self.s)


def _train_epoch_np(tokens, offsets, w_in, w_out, cum, keep_prob, window, negatives,
                    alpha0, alpha_min, done0, total_work, state, stats):
    rng = _PyRng(state)
    vocab = w_in.shape[0]
    subsample = len(keep_prob) > 0
    done = done0
    loss_sum = 0.0
    n_pos = 0
    for s in range(len(offsets) - 1):
        raw = tokens[offsets[s]:offsets[s + 1]]
        if subsample:
            sent = [int(t) for t in raw if rng.uniform() < keep_prob[t]]
        else:
            sent = raw.tolist()
        n = len(sent)
        for i in range(n):
            alpha = max(alpha_min, alpha0 - (alpha0 - alpha_min) * (done / total_work))
            done += 1
            radius = 1 + rng.next() % window
            ctx = sent[max(0, i - radius):i] + sent[i + 1:min(n, i + radius + 1)]
            if not ctx:
                continue
            target = sent[i]
            samples = [target]
            for _ in range(negatives):
                d = min(int(np.searchsorted(cum, rng.uniform(), side="right")), vocab - 1)
                if d != target:
                    samples.append(d)
            labels = np.zeros(len(samples))
            labels[0] = 1.0
            loss_sum += cbow_step_np(w_in, w_out, np.array(ctx), np.array(samples), labels, alpha)
            n_pos += 1
        done += len(raw) - n
    rng.commit()
    stats[0] += loss_sum
    stats[1] += n_pos
    return done


def train_epoch(tokens, offsets, w_in, w_out, cum, keep_prob, window, negatives,
                alpha0, alpha_min, done0, total_work, state, stats):
    """Run one pass over the sentences ``tokens[offsets[s]:offsets[s+1]]``.

    Mutates ``w_in``, ``w_out``, the RNG ``state`` (uint64[1]) and adds
    ``(loss_sum, positions)`` into ``stats``.  Returns the updated work
    counter used for learning-rate decay.
    """
    fn = _train_epoch_nb if _accel.backend() == "numba" else _train_epoch_np
    return fn(tokens, offsets, w_in, w_out, cum, keep_prob, int(window), int(negatives),
              float(alpha0), float(alpha_min), int(done0), float(total_work), state, stats)
