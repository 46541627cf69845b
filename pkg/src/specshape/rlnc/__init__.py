from .codec import (
    CodedPacket,
    DecoderState,
    decode_trials,
    decoder_ingest,
    encode_batch,
    innovation_probability,
    nonsingular_probability,
)
from .gf import REDUCTION_POLYNOMIALS, GaloisField
