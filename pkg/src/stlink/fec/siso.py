"""Soft-in soft-out trellis decoding (BCJR) in three arithmetic flavours.

All LLRs use the convention ``log P(b=0) / P(b=1)``. The trellis is assumed to
start in state 0 and to be terminated in state 0 after ``memory`` tail steps
whose inputs are fixed by the state.
"""

from enum import IntEnum

import numpy as np

from .._accel import njit, select

LLR_CLAMP = 50.0
_OUT_CLAMP = 1.0e4
_NEG = -1.0e30


class DecodeAlgorithm(IntEnum):
    MAX_LOG_MAP = 0
    LOG_MAP = 1
    MAP = 2

    @classmethod
    def parse(cls, name):
        if isinstance(name, (cls, int, np.integer)):
            return cls(int(name))
        key = str(name).lower().replace("-", "").replace("_", "")
        table = {"maxlogmap": cls.MAX_LOG_MAP, "maxlog": cls.MAX_LOG_MAP,
                 "logmap": cls.LOG_MAP, "map": cls.MAP}
        if key not in table:
            raise ValueError(f"unknown decoding algorithm {name!r}")
        return table[key]

    @property
    def label(self):
        return {0: "max-log-map", 1: "log-map", 2: "map"}[int(self)]


@njit
def _safe_log(p):
    return np.log(p) if p > 0.0 else _NEG


@njit
def _bcjr_loops(lc, la, n_info, next_state, out_bits, in_bits, tail_input, alg):
    T, n_out = lc.shape
    S, U = next_state.shape
    k_in = in_bits.shape[1]
    sgn_out = 1.0 - 2.0 * out_bits
    sgn_in = 1.0 - 2.0 * in_bits

    gamma = np.empty((T, S, U))
    allowed = np.ones((T, S, U), dtype=np.bool_)
    for t in range(T):
        for s in range(S):
            for u in range(U):
                if t >= n_info and u != tail_input[s]:
                    allowed[t, s, u] = False
                    gamma[t, s, u] = _NEG
                    continue
                g = 0.0
                for i in range(n_out):
                    g += 0.5 * sgn_out[s, u, i] * lc[t, i]
                if t < n_info:
                    for j in range(k_in):
                        g += 0.5 * sgn_in[u, j] * la[t, j]
                gamma[t, s, u] = g

    app_in = np.zeros((n_info, k_in))
    app_out = np.zeros((T, n_out))

    if alg == 2:
        # probability domain with per-step normalization
        pg = np.zeros((T, S, U))
        for t in range(T):
            for s in range(S):
                for u in range(U):
                    if allowed[t, s, u]:
                        pg[t, s, u] = np.exp(gamma[t, s, u])
        alpha = np.zeros((T + 1, S))
        alpha[0, 0] = 1.0
        for t in range(T):
            tot = 0.0
            for s in range(S):
                a = alpha[t, s]
                if a == 0.0:
                    continue
                for u in range(U):
                    alpha[t + 1, next_state[s, u]] += a * pg[t, s, u]
            for s in range(S):
                tot += alpha[t + 1, s]
            for s in range(S):
                alpha[t + 1, s] /= tot
        beta = np.zeros((T + 1, S))
        beta[T, 0] = 1.0
        for t in range(T - 1, -1, -1):
            tot = 0.0
            for s in range(S):
                acc = 0.0
                for u in range(U):
                    acc += pg[t, s, u] * beta[t + 1, next_state[s, u]]
                beta[t, s] = acc
                tot += acc
            for s in range(S):
                beta[t, s] /= tot
        p0 = np.empty(max(k_in, n_out))
        p1 = np.empty(max(k_in, n_out))
        for t in range(T):
            for i in range(n_out):
                p0[i] = 0.0
                p1[i] = 0.0
            q0 = np.zeros(k_in)
            q1 = np.zeros(k_in)
            for s in range(S):
                for u in range(U):
                    p = alpha[t, s] * pg[t, s, u] * beta[t + 1, next_state[s, u]]
                    for i in range(n_out):
                        if out_bits[s, u, i]:
                            p1[i] += p
                        else:
                            p0[i] += p
                    for j in range(k_in):
                        if in_bits[u, j]:
                            q1[j] += p
                        else:
                            q0[j] += p
            for i in range(n_out):
                app_out[t, i] = _safe_log(p0[i]) - _safe_log(p1[i])
            if t < n_info:
                for j in range(k_in):
                    app_in[t, j] = _safe_log(q0[j]) - _safe_log(q1[j])
        return app_in, app_out

    exact = alg == 1
    alpha = np.full((T + 1, S), _NEG)
    alpha[0, 0] = 0.0
    for t in range(T):
        for s in range(S):
            a = alpha[t, s]
            if a <= _NEG:
                continue
            for u in range(U):
                if not allowed[t, s, u]:
                    continue
                ns = next_state[s, u]
                v = a + gamma[t, s, u]
                cur = alpha[t + 1, ns]
                if exact:
                    if v > cur:
                        alpha[t + 1, ns] = v + np.log1p(np.exp(cur - v))
                    else:
                        alpha[t + 1, ns] = cur + np.log1p(np.exp(v - cur))
                elif v > cur:
                    alpha[t + 1, ns] = v
        ref = alpha[t + 1, 0]
        for s in range(1, S):
            if alpha[t + 1, s] > ref:
                ref = alpha[t + 1, s]
        for s in range(S):
            if alpha[t + 1, s] > _NEG:
                alpha[t + 1, s] -= ref
    beta = np.full((T + 1, S), _NEG)
    beta[T, 0] = 0.0
    for t in range(T - 1, -1, -1):
        for s in range(S):
            acc = _NEG
            for u in range(U):
                if not allowed[t, s, u]:
                    continue
                b = beta[t + 1, next_state[s, u]]
                if b <= _NEG:
                    continue
                v = gamma[t, s, u] + b
                if exact:
                    if v > acc:
                        acc = v + np.log1p(np.exp(acc - v))
                    else:
                        acc = acc + np.log1p(np.exp(v - acc))
                elif v > acc:
                    acc = v
            beta[t, s] = acc
        ref = beta[t, 0]
        for s in range(1, S):
            if beta[t, s] > ref:
                ref = beta[t, s]
        for s in range(S):
            if beta[t, s] > _NEG:
                beta[t, s] -= ref

    m0 = np.empty(max(k_in, n_out))
    m1 = np.empty(max(k_in, n_out))
    for t in range(T):
        for i in range(n_out):
            m0[i] = _NEG
            m1[i] = _NEG
        q0 = np.full(k_in, _NEG)
        q1 = np.full(k_in, _NEG)
        for s in range(S):
            if alpha[t, s] <= _NEG:
                continue
            for u in range(U):
                if not allowed[t, s, u]:
                    continue
                b = beta[t + 1, next_state[s, u]]
                if b <= _NEG:
                    continue
                v = alpha[t, s] + gamma[t, s, u] + b
                for i in range(n_out):
                    cur = m1[i] if out_bits[s, u, i] else m0[i]
                    if exact:
                        if v > cur:
                            cur = v + np.log1p(np.exp(cur - v))
                        else:
                            cur = cur + np.log1p(np.exp(v - cur))
                    elif v > cur:
                        cur = v
                    if out_bits[s, u, i]:
                        m1[i] = cur
                    else:
                        m0[i] = cur
                if t < n_info:
                    for j in range(k_in):
                        cur = q1[j] if in_bits[u, j] else q0[j]
                        if exact:
                            if v > cur:
                                cur = v + np.log1p(np.exp(cur - v))
                            else:
                                cur = cur + np.log1p(np.exp(v - cur))
                        elif v > cur:
                            cur = v
                        if in_bits[u, j]:
                            q1[j] = cur
                        else:
                            q0[j] = cur
        for i in range(n_out):
            app_out[t, i] = m0[i] - m1[i]
        if t < n_info:
            for j in range(k_in):
                app_in[t, j] = q0[j] - q1[j]
    return app_in, app_out


def _reduce(x, axis, alg):
    """max / log-sum-exp / plain sum along ``axis``."""
    if alg == DecodeAlgorithm.MAX_LOG_MAP:
        return x.max(axis=axis)
    if alg == DecodeAlgorithm.MAP:
        return x.sum(axis=axis)
    m = x.max(axis=axis, keepdims=True)
    m = np.maximum(m, _NEG)
    with np.errstate(under="ignore"):
        return np.squeeze(m, axis=axis) + np.log(np.exp(x - m).sum(axis=axis))


def _bcjr_vectorized(lc, la, n_info, next_state, out_bits, in_bits, tail_input, alg):
    T, n_out = lc.shape
    S, U = next_state.shape
    k_in = in_bits.shape[1]
    prob = alg == DecodeAlgorithm.MAP

    gamma = 0.5 * np.einsum("sui,ti->tsu", 1.0 - 2.0 * out_bits, lc)
    gamma[:n_info] += 0.5 * np.einsum("uj,tj->tu", 1.0 - 2.0 * in_bits, la[:n_info])[:, None, :]
    allowed = np.ones((T, S, U), dtype=bool)
    allowed[n_info:] = np.arange(U)[None, :] == tail_input[:, None]
    if prob:
        gamma = np.where(allowed, np.exp(gamma), 0.0)
        zero, one = 0.0, 1.0
    else:
        gamma = np.where(allowed, gamma, _NEG)
        zero, one = _NEG, 0.0

    # predecessor tables for the forward recursion
    order = np.argsort(next_state.reshape(-1), kind="stable")
    prev_s = (order // U).reshape(S, U)
    prev_u = (order % U).reshape(S, U)

    alpha = np.full((T + 1, S), zero)
    alpha[0, 0] = one
    beta = np.full((T + 1, S), zero)
    beta[T, 0] = one
    for t in range(T):
        g = gamma[t][prev_s, prev_u]
        if prob:
            a = (alpha[t][prev_s] * g).sum(axis=1)
            alpha[t + 1] = a / a.sum()
        else:
            a = _reduce(np.maximum(alpha[t][prev_s] + g, _NEG), 1, alg)
            alpha[t + 1] = np.where(a > _NEG / 2, a - a.max(), _NEG)
    for t in range(T - 1, -1, -1):
        nb = beta[t + 1][next_state]
        if prob:
            b = (gamma[t] * nb).sum(axis=1)
            beta[t] = b / b.sum()
        else:
            b = _reduce(np.maximum(gamma[t] + nb, _NEG), 1, alg)
            beta[t] = np.where(b > _NEG / 2, b - b.max(), _NEG)

    nb = beta[1:][:, next_state]  # (T, S, U)
    if prob:
        joint = alpha[:-1, :, None] * gamma * nb
    else:
        joint = np.maximum(alpha[:-1, :, None] + gamma + nb, _NEG)
    joint = joint.reshape(T, S * U)
    ob = out_bits.reshape(S * U, n_out).astype(bool)
    ib = np.tile(in_bits.astype(bool), (S, 1))

    def split(mask):
        fill = zero
        x1 = np.where(mask[None, :, :], joint[:, :, None], fill)
        x0 = np.where(~mask[None, :, :], joint[:, :, None], fill)
        r0, r1 = _reduce(x0, 1, alg), _reduce(x1, 1, alg)
        if prob:
            with np.errstate(divide="ignore"):
                return np.where(r0 > 0, np.log(r0), _NEG) - np.where(r1 > 0, np.log(r1), _NEG)
        return r0 - r1

    app_out = split(ob)
    app_in = split(ib)[:n_info]
    return app_in, app_out


_bcjr = select(_bcjr_loops, _bcjr_vectorized)


def bcjr(channel_llr, apriori_llr, code, alg=DecodeAlgorithm.LOG_MAP, kernel=None):
    """Run the forward-backward recursion on a terminated RSC trellis.

    Returns ``(app_input, app_code)``: a-posteriori LLRs on the information
    input bits (tail inputs excluded) and on every code bit.
    """
    alg = DecodeAlgorithm.parse(alg)
    lc = np.asarray(channel_llr, dtype=float).reshape(-1)
    if lc.size % code.n_out:
        raise ValueError(f"channel LLR length {lc.size} not a multiple of n_out={code.n_out}")
    T = lc.size // code.n_out
    n_info = T - code.memory
    if n_info < 0:
        raise ValueError("channel LLR frame shorter than the termination tail")
    if apriori_llr is None:
        la = np.zeros(n_info * code.k_in)
    else:
        la = np.asarray(apriori_llr, dtype=float).reshape(-1)
    if la.size != n_info * code.k_in:
        raise ValueError(f"a-priori length {la.size} != {n_info * code.k_in}")
    if not (np.all(np.isfinite(lc)) and np.all(np.isfinite(la))):
        raise ValueError("LLR inputs must be finite")
    lc = np.clip(lc, -LLR_CLAMP, LLR_CLAMP).reshape(T, code.n_out)
    la_full = np.zeros((T, code.k_in))
    la_full[:n_info] = np.clip(la, -LLR_CLAMP, LLR_CLAMP).reshape(n_info, code.k_in)
    tr = code.trellis
    fn = kernel or _bcjr
    app_in, app_out = fn(
        lc, la_full, n_info, tr.next_state, tr.out_bits.astype(np.float64),
        tr.in_bits.astype(np.float64), tr.tail_input, int(alg),
    )
    app_in = np.clip(app_in.reshape(-1), -_OUT_CLAMP, _OUT_CLAMP)
    app_out = np.clip(app_out.reshape(-1), -_OUT_CLAMP, _OUT_CLAMP)
    return app_in, app_out, la_full[:n_info].reshape(-1), lc.reshape(-1)


def siso_decode(channel_llr, apriori_llr, code, alg=DecodeAlgorithm.LOG_MAP, target="input"):
    """Soft-in soft-out decoding of one terminated RSC frame.

    Parameters
    ----------
    channel_llr : array_like
        One LLR per code bit, tail included.
    apriori_llr : array_like or None
        One LLR per information input bit (tail inputs excluded).
    code : RscCode
    alg : DecodeAlgorithm or str
    target : {"input", "code"}
        Which bits the outputs refer to.

    Returns
    -------
    (extrinsic, posterior) : tuple of ndarray
        For ``target="input"`` the extrinsic excludes the bit's own a-priori
        term; for ``target="code"`` it excludes the bit's own channel term.
    """
    app_in, app_out, la, lc = bcjr(channel_llr, apriori_llr, code, alg)
    if target == "input":
        return app_in - la, app_in
    if target == "code":
        return app_out - lc, app_out
    raise ValueError(f"target must be 'input' or 'code', got {target!r}")
