"""Random linear network coding: encoder, incremental decoder, test vectors."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .gf import GaloisField

DEFAULT_PAYLOAD_LEN = 64


@dataclass(frozen=True)
class CodedPacket:
    coefficients: np.ndarray
    payload: np.ndarray


def encode_batch(source, field_: GaloisField, rng: np.random.Generator | None = None,
                 coefficients=None) -> CodedPacket:
    """One coded packet from the m source rows.

    ``coefficients`` overrides the random draw (used to force known combinations).
    """
    src = np.asarray(source, dtype=np.int64)
    if src.ndim != 2 or src.shape[0] < 1:
        raise ValueError("source must be an (m, payload_len) array with m >= 1")
    m = src.shape[0]
    if coefficients is None:
        if rng is None:
            raise ValueError("need an rng or explicit coefficients")
        coefficients = field_.random(m, rng)
    c = np.asarray(coefficients, dtype=np.int64)
    if c.shape != (m,):
        raise ValueError(f"expected {m} coefficients, got shape {c.shape}")
    payload = field_.matmul(c[None, :], src)[0]
    return CodedPacket(c, payload)


@dataclass
class DecoderState:
    """Reduced row-echelon rows received so far, with their payloads."""

    field: GaloisField
    m: int
    payload_len: int = DEFAULT_PAYLOAD_LEN
    coeffs: np.ndarray = field(init=False)
    payloads: np.ndarray = field(init=False)
    pivots: list = field(init=False, default_factory=list)

    def __post_init__(self):
        self.coeffs = np.zeros((0, self.m), dtype=np.int64)
        self.payloads = np.zeros((0, self.payload_len), dtype=np.int64)

    @property
    def rank(self) -> int:
        return len(self.pivots)

    @property
    def complete(self) -> bool:
        return self.rank == self.m

    def recovered(self) -> np.ndarray:
        if not self.complete:
            raise ValueError(f"rank {self.rank} < {self.m}: batch not decodable yet")
        order = np.argsort(self.pivots)
        return self.payloads[order]


def decoder_ingest(state: DecoderState, pkt: CodedPacket) -> tuple[DecoderState, bool]:
    """Gaussian-eliminate ``pkt`` into ``state`` in place; True if it was innovative."""
    gf = state.field
    c = np.asarray(pkt.coefficients, dtype=np.int64).copy()
    p = np.asarray(pkt.payload, dtype=np.int64).copy()
    if c.shape != (state.m,):
        raise ValueError(f"coefficient vector length {c.shape} != m={state.m}")
    if p.shape != (state.payload_len,):
        raise ValueError(f"payload length {p.shape} != {state.payload_len}")
    if state.pivots:
        # rows are fully reduced, so every pivot column clears in one pass
        f = c[state.pivots]
        if f.any():
            c ^= np.bitwise_xor.reduce(gf.mul(f[:, None], state.coeffs), axis=0)
            p ^= np.bitwise_xor.reduce(gf.mul(f[:, None], state.payloads), axis=0)
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return state, False
    col = int(nz[0])
    inv = gf.inv(c[col])
    c = gf.mul(c, inv)
    p = gf.mul(p, inv)
    # keep existing rows reduced in the new pivot column
    f = state.coeffs[:, col].copy()
    if f.any():
        state.coeffs ^= gf.mul(f[:, None], c[None, :])
        state.payloads ^= gf.mul(f[:, None], p[None, :])
    state.coeffs = np.vstack([state.coeffs, c])
    state.payloads = np.vstack([state.payloads, p])
    state.pivots.append(col)
    return state, True


def nonsingular_probability(q: int, m: int) -> float:
    """P(random m x m matrix over GF(q) is invertible) = prod_{i=1..m} (1 - q^-i)."""
    return math.prod(1.0 - float(q) ** -i for i in range(1, m + 1))


@dataclass(frozen=True)
class InnovationEstimate:
    probability: float
    stderr: float
    samples: int
    exact: bool


def innovation_probability(field_: GaloisField, m: int, samples: int = 10_000,
                           rng: np.random.Generator | None = None) -> InnovationEstimate:
    """Probability that m uniformly random coded packets are enough to decode.

    Enumerates every coefficient matrix when q^(m*m) <= 2^20, else samples.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    q = field_.q
    if m * m * field_.w <= 20:
        mats = np.array(list(itertools.product(range(q), repeat=m * m)), dtype=np.int64).reshape(-1, m, m)
        full = field_.rank(mats) == m
        return InnovationEstimate(float(full.mean()), 0.0, len(mats), True)
    rng = rng if rng is not None else np.random.default_rng()
    full = np.zeros(0, dtype=bool)
    step = 50_000
    for lo in range(0, samples, step):
        n = min(step, samples - lo)
        full = np.concatenate([full, field_.rank(field_.random((n, m, m), rng)) == m])
    p = float(full.mean())
    return InnovationEstimate(p, math.sqrt(p * (1 - p) / samples), samples, False)


def decode_trials(field_: GaloisField, m: int, trials: int, rng: np.random.Generator,
                  payload_len: int = DEFAULT_PAYLOAD_LEN) -> tuple[int, int, int]:
    """Encode/decode ``trials`` batches from exactly m packets each.

    Returns (decoded, nonsingular, exact_recoveries); every decoded batch is
    compared against its sources.
    """
    coeffs = field_.random((trials, m, m), rng)
    nonsingular = int((field_.rank(coeffs) == m).sum())
    decoded = exact = 0
    for C in coeffs:
        src = field_.random((m, payload_len), rng)
        st = DecoderState(field_, m, payload_len)
        Y = field_.matmul(C, src)
        for c, y in zip(C, Y):
            decoder_ingest(st, CodedPacket(c, y))
        if st.complete:
            decoded += 1
            exact += bool(np.array_equal(st.recovered(), src))
    return decoded, nonsingular, exact


# --- conformance vectors --------------------------------------------------------
# one vector per line, fields separated by spaces:
#   w m <coeff rows> <payload rows> <expected>
# rows are ';'-joined, elements within a row ','-joined lowercase hex;
# expected is "ok:" + ';'-joined recovered source rows, or "singular".


def _fmt_rows(rows):
    return ";".join(",".join(format(int(x), "x") for x in r) for r in rows)


def _parse_rows(text):
    return np.array([[int(x, 16) for x in r.split(",")] for r in text.split(";")], dtype=np.int64)


def make_test_vector(field_: GaloisField, m: int, payload_len: int, rng: np.random.Generator) -> str:
    src = field_.random((m, payload_len), rng)
    pkts = [encode_batch(src, field_, rng) for _ in range(m)]
    C = np.array([p.coefficients for p in pkts])
    Y = np.array([p.payload for p in pkts])
    expected = "ok:" + _fmt_rows(src) if field_.rank(C) == m else "singular"
    return f"{field_.w} {m} {_fmt_rows(C)} {_fmt_rows(Y)} {expected}"


def check_test_vector(line: str) -> bool:
    """Decode one vector line and compare with its expected outcome."""
    w, m, crows, prows, expected = line.split()
    gf = GaloisField(int(w))
    m = int(m)
    C = _parse_rows(crows)
    Y = _parse_rows(prows)
    st = DecoderState(gf, m, Y.shape[1])
    for c, y in zip(C, Y):
        decoder_ingest(st, CodedPacket(c, y))
    if expected == "singular":
        return not st.complete
    if not st.complete or not expected.startswith("ok:"):
        return False
    return bool(np.array_equal(st.recovered(), _parse_rows(expected[3:])))


def write_test_vectors(path, vectors):
    with open(path, "w", encoding="utf-8") as fh:
        for v in vectors:
            fh.write(v + "\n")


def read_test_vectors(path):
    with open(path, encoding="utf-8") as fh:
        return [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
