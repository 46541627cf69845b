"""GF(2^w) arithmetic on numpy arrays via log/antilog tables."""

from __future__ import annotations

import numpy as np

# primitive polynomials, so x generates the multiplicative group
REDUCTION_POLYNOMIALS = {
    1: 0b11,  # x + 1
    4: 0x13,  # x^4 + x + 1
    8: 0x11D,  # x^8 + x^4 + x^3 + x^2 + 1
    16: 0x1100B,  # x^16 + x^12 + x^3 + x + 1
}


class GaloisField:
    def __init__(self, w: int, poly: int | None = None):
        if w not in REDUCTION_POLYNOMIALS and poly is None:
            raise ValueError(f"unsupported word size {w}; choose from {sorted(REDUCTION_POLYNOMIALS)}")
        self.w = w
        self.poly = REDUCTION_POLYNOMIALS[w] if poly is None else poly
        self.order = 1 << w
        n = self.order - 1
        # log(0) points past every real log-sum into a zero-filled tail, so
        # mul needs no masking
        exp = np.zeros(4 * n + 1, dtype=np.int64)
        log = np.full(self.order, 2 * n, dtype=np.int64)
        x = 1
        for i in range(n):
            exp[i] = x
            log[x] = i
            x <<= 1
            if x & self.order:
                x ^= self.poly
        if len(set(exp[:n].tolist())) != n:
            raise ValueError(f"polynomial {self.poly:#x} is not primitive for w={w}")
        exp[n : 2 * n] = exp[:n]
        self.exp = exp
        self.log = log

    def __repr__(self):
        return f"GaloisField(w={self.w}, poly={self.poly:#x})"

    @property
    def q(self) -> int:
        return self.order

    def elements(self) -> np.ndarray:
        return np.arange(self.order, dtype=np.int64)

    def random(self, shape, rng: np.random.Generator) -> np.ndarray:
        return rng.integers(0, self.order, size=shape, dtype=np.int64)

    @staticmethod
    def add(a, b):
        return np.bitwise_xor(a, b)

    sub = add

    def mul(self, a, b):
        return self.exp[self.log[a] + self.log[b]]

    def inv(self, a):
        a = np.asarray(a, dtype=np.int64)
        if np.any(a == 0):
            raise ZeroDivisionError("0 has no multiplicative inverse")
        return self.exp[(self.order - 1) - self.log[a]]

    def div(self, a, b):
        return self.mul(a, self.inv(b))

    def matmul(self, A, B):
        """Matrix product over the field; A is (r, m), B is (m, c)."""
        A = np.asarray(A, dtype=np.int64)
        B = np.asarray(B, dtype=np.int64)
        out = np.zeros((A.shape[0], B.shape[1]), dtype=np.int64)
        for j in range(A.shape[1]):
            out ^= self.mul(A[:, j : j + 1], B[j : j + 1, :])
        return out

    def rank(self, mats) -> np.ndarray:
        """Ranks of a stack of matrices (..., r, c) by batched elimination."""
        M = np.array(mats, dtype=np.int64, copy=True)
        squeeze = M.ndim == 2
        if squeeze:
            M = M[None]
        M = M.reshape(-1, *M.shape[-2:])
        n, r, c = M.shape
        rank = np.zeros(n, dtype=np.int64)
        rows = np.arange(n)
        for col in range(c):
            # first row at or below the current rank with a nonzero pivot
            cand = (M[:, :, col] != 0) & (np.arange(r)[None, :] >= rank[:, None])
            has = cand.any(axis=1)
            piv = np.argmax(cand, axis=1)
            idx = rows[has]
            if idx.size == 0:
                continue
            tgt = rank[idx]
            src = piv[idx]
            tmp = M[idx, tgt].copy()
            M[idx, tgt] = M[idx, src]
            M[idx, src] = tmp
            pivrow = M[idx, tgt]
            pivrow = self.mul(pivrow, self.inv(pivrow[:, col])[:, None])
            M[idx, tgt] = pivrow
            below = np.arange(r)[None, :] > tgt[:, None]
            factors = np.where(below, M[idx, :, col], 0)
            M[idx] ^= self.mul(factors[:, :, None], pivrow[:, None, :])
            rank[idx] += 1
        return rank[0] if squeeze else rank
