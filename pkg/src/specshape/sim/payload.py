"""PU channel with real coded payloads.

A reception only advances a receiver when it is innovative, replacing the
count-to-m rule of the fast kernels. Pure Python; meant for short runs that
measure how far finite fields sit from the large-q assumption.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import core
from ..core import NetworkConfig, PuMode
from ..rlnc.codec import CodedPacket, DecoderState, decoder_ingest
from ..rlnc.gf import GaloisField


@dataclass
class CodedRun:
    busy: np.ndarray
    completion_times: np.ndarray
    receptions: int
    non_innovative: int
    decode_errors: int
    idle_prob_hat: float


def run_pu_channel_coded(cfg: NetworkConfig, horizon: int, rng=0, field: GaloisField | None = None,
                         payload_len: int = 4) -> CodedRun:
    rng = core.make_rng(rng)
    field = field or GaloisField(8)
    L = cfg.num_receivers
    unit = cfg.service_unit
    arq = cfg.pu_mode is PuMode.ARQ
    queue = 0
    serving = False
    source = None
    decoders: list[DecoderState] = []
    got = np.zeros(L, dtype=bool)
    started = 0
    busy = np.zeros(horizon, dtype=bool)
    times = []
    receptions = non_innovative = errors = 0

    for t in range(horizon):
        queue += core.sample_arrival(cfg.arrival_rate, rng)
        if not serving and queue >= unit:
            queue -= unit
            serving = True
            started = t
            source = field.random((unit, payload_len), rng)
            decoders = [DecoderState(field, unit, payload_len) for _ in range(L)]
            got[:] = False
        if not serving:
            continue
        busy[t] = True
        rec = core.sample_reception(cfg.erasure_prob, L, rng)
        if arq:
            # uncoded retransmission of the head-of-line packet
            got |= rec
            done = bool(got.all())
        else:
            pkt_c = field.random(unit, rng)
            pkt = CodedPacket(pkt_c, field.matmul(pkt_c[None, :], source)[0])
            for r in np.flatnonzero(rec):
                if decoders[r].complete:
                    continue
                receptions += 1
                _, innovative = decoder_ingest(decoders[r], pkt)
                non_innovative += not innovative
            done = all(d.complete for d in decoders)
            if done:
                errors += sum(not np.array_equal(d.recovered(), source) for d in decoders)
        if done:
            serving = False
            times.append(t - started + 1)

    return CodedRun(
        busy=busy,
        completion_times=np.array(times, dtype=np.int64),
        receptions=receptions,
        non_innovative=non_innovative,
        decode_errors=errors,
        idle_prob_hat=float(1.0 - busy.mean()),
    )
