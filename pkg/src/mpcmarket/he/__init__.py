"""Desk-scale BFV homomorphic encryption over RLWE rings."""

from .ntt import (
    NttPlan,
    find_ntt_primes,
    get_plan,
    is_prime,
    negacyclic_mul,
    schoolbook_negacyclic,
)
from .bfv import (
    DecryptionFailure,
    HeCiphertext,
    HeParams,
    HeParamsError,
    HePlaintext,
    NoiseBudgetExhausted,
    PublicKey,
    RelinKey,
    SecretKey,
    batch_decode,
    batch_encode,
    ciphertext_from_bytes,
    ciphertext_to_bytes,
    decode_scalar,
    decrypt,
    encode_scalar,
    encrypt,
    he_add,
    he_add_plain,
    he_mul,
    he_mul_plain,
    he_sub,
    keygen,
    noise_budget,
)

__all__ = [
    "DecryptionFailure",
    "HeCiphertext",
    "HeParams",
    "HeParamsError",
    "HePlaintext",
    "NoiseBudgetExhausted",
    "NttPlan",
    "PublicKey",
    "RelinKey",
    "SecretKey",
    "batch_decode",
    "batch_encode",
    "ciphertext_from_bytes",
    "ciphertext_to_bytes",
    "decode_scalar",
    "decrypt",
    "encode_scalar",
    "encrypt",
    "find_ntt_primes",
    "get_plan",
    "he_add",
    "he_add_plain",
    "he_mul",
    "he_mul_plain",
    "he_sub",
    "is_prime",
    "keygen",
    "negacyclic_mul",
    "noise_budget",
    "schoolbook_negacyclic",
]
