"""Garbled circuit engine: point-and-permute, free-XOR, half-gates.

Labels are 128-bit integers. For every wire, label1 = label0 XOR delta
with lsb(delta) = 1, so the two labels of a wire always carry opposite
permute bits. AND gates are garbled with the half-gates construction
(exactly two 16-byte rows); XOR gates are label XORs and INV gates alias
the complementary label (out0 = in0 XOR delta), both costing nothing.

Input labels are derived from a shared PRF key instead of running
oblivious transfer: the party holding bit b for wire i submits
PRF(k, i) XOR b*delta directly.

The gate hash is a Davies-Meyer construction over a fixed-key AES-128:
H(L, tweak) = AES(2L ^ tweak) ^ 2L ^ tweak, with per-gate tweaks.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import Callable, Sequence

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .circuits.ir import AND, INV, XOR, Circuit, CircuitError

MASK128 = (1 << 128) - 1
_GF_POLY = 0x87  # x^128 + x^7 + x^2 + x + 1

# Fixed public AES key for the gate hash; any fixed constant works.
_HASH_KEY = hashlib.sha256(b"mpcmarket half-gates fixed key v1").digest()[:16]

_MAGIC = b"MGC1"
_VERSION = 1


class GarblingError(ValueError):
    """Raised on malformed garbled circuits or label mismatches."""


def _new_cipher():
    return Cipher(algorithms.AES(_HASH_KEY), modes.ECB()).encryptor()


def _double(x: int) -> int:
    x <<= 1
    if x >> 128:
        x = (x & MASK128) ^ _GF_POLY
    return x


@dataclass(frozen=True)
class GlobalDelta:
    """Free-XOR global offset; least-significant bit pinned to 1."""

    bits: int

    def __post_init__(self) -> None:
        if not (0 <= self.bits <= MASK128) or self.bits & 1 != 1:
            raise GarblingError("delta must be a 128-bit value with lsb 1")


def derive_delta(seed: bytes) -> GlobalDelta:
    """Deterministically expand a 16-byte seed into delta (lsb forced to 1)."""
    if len(seed) != 16:
        raise GarblingError("delta seed must be 16 bytes")
    enc = Cipher(algorithms.AES(seed), modes.ECB()).encryptor()
    block = enc.update(b"\x00" * 15 + b"\x01")
    return GlobalDelta(int.from_bytes(block, "big") | 1)


def derive_input_label(prf_key: bytes, wire_index: int) -> int:
    """Zero-label for an input wire: PRF(k, wire_index) via AES-128."""
    if len(prf_key) != 16:
        raise GarblingError("PRF key must be 16 bytes")
    enc = Cipher(algorithms.AES(prf_key), modes.ECB()).encryptor()
    block = enc.update(struct.pack(">QQ", 0, wire_index))
    return int.from_bytes(block, "big")


def derive_input_labels(prf_key: bytes, count: int) -> list[int]:
    """Bulk zero-labels for input wires 0..count-1 (one cipher pass)."""
    if len(prf_key) != 16:
        raise GarblingError("PRF key must be 16 bytes")
    enc = Cipher(algorithms.AES(prf_key), modes.ECB()).encryptor()
    blob = enc.update(b"".join(struct.pack(">QQ", 0, i) for i in range(count)))
    return [int.from_bytes(blob[i : i + 16], "big") for i in range(0, 16 * count, 16)]


def seeded_label_source(seed: bytes, domain: int = 1) -> Callable[[int], int]:
    """Deterministic label generator for constant/non-PRF wires."""
    if len(seed) != 16:
        raise GarblingError("label seed must be 16 bytes")
    enc = Cipher(algorithms.AES(seed), modes.ECB()).encryptor()

    def labels(wire_index: int) -> int:
        return int.from_bytes(enc.update(struct.pack(">QQ", domain, wire_index)), "big")

    return labels


def circuit_digest(circuit: Circuit) -> bytes:
    return circuit.digest


@dataclass(frozen=True)
class DecodingInfo:
    """Permute-bit mask per output wire: plaintext bit = lsb(label) ^ mask."""

    masks: tuple[int, ...]


@dataclass(frozen=True)
class GarbledCircuit:
    """Half-gates tables (two rows per AND gate, in gate order) plus the
    active labels of the two constant wires, bound to a circuit digest."""

    circuit_hash: bytes
    n_and: int
    rows: tuple[tuple[int, int], ...]
    const_zero_active: int
    const_one_active: int

    def serialized_size(self) -> int:
        return HEADER_SIZE + 32 * self.n_and


HEADER_SIZE = 4 + 1 + 32 + 4 + 2 * 16  # magic, version, hash, count, const actives


def serialize_garbled(gc: GarbledCircuit) -> bytes:
    out = bytearray()
    out += _MAGIC
    out.append(_VERSION)
    out += gc.circuit_hash
    out += struct.pack(">I", gc.n_and)
    out += gc.const_zero_active.to_bytes(16, "big")
    out += gc.const_one_active.to_bytes(16, "big")
    for tg, te in gc.rows:
        out += tg.to_bytes(16, "big")
        out += te.to_bytes(16, "big")
    return bytes(out)


def parse_garbled(data: bytes) -> GarbledCircuit:
    if len(data) < HEADER_SIZE or data[:4] != _MAGIC:
        raise GarblingError("bad garbled-circuit header")
    if data[4] != _VERSION:
        raise GarblingError(f"unsupported garbled-circuit version {data[4]}")
    digest = data[5:37]
    (n_and,) = struct.unpack(">I", data[37:41])
    cz = int.from_bytes(data[41:57], "big")
    co = int.from_bytes(data[57:73], "big")
    body = data[HEADER_SIZE:]
    if len(body) != 32 * n_and:
        raise GarblingError(
            f"garbled table truncated: expected {32 * n_and} bytes, got {len(body)}"
        )
    rows = tuple(
        (
            int.from_bytes(body[i : i + 16], "big"),
            int.from_bytes(body[i + 16 : i + 32], "big"),
        )
        for i in range(0, len(body), 32)
    )
    return GarbledCircuit(bytes(digest), n_and, rows, cz, co)


def garble(
    circuit: Circuit,
    delta: GlobalDelta,
    zero_label: Callable[[int], int],
) -> tuple[GarbledCircuit, DecodingInfo]:
    """Garble a circuit given the zero-label source for input + constant wires.

    Deterministic: a fixed delta and label source reproduce the garbling
    byte for byte.
    """
    circuit.ensure_valid()
    d = delta.bits
    n_in = circuit.n_inputs
    labels = [0] * circuit.n_wires
    for i in range(n_in):
        labels[i] = zero_label(i) & MASK128
    labels[circuit.const_zero] = zero_label(circuit.const_zero) & MASK128
    labels[circuit.const_one] = zero_label(circuit.const_one) & MASK128

    rows: list[tuple[int, int]] = []
    enc = _new_cipher()
    update = enc.update
    append = rows.append
    g_idx = 0
    for kind, a, b, out in circuit.gates:
        if kind == XOR:
            labels[out] = labels[a] ^ labels[b]
        elif kind == INV:
            labels[out] = labels[a] ^ d
        else:
            a0 = labels[a]
            b0 = labels[b]
            pa = a0 & 1
            pb = b0 & 1
            j0 = 2 * g_idx + 1
            j1 = j0 + 1
            k_a0 = _double(a0) ^ j0
            k_a1 = _double(a0 ^ d) ^ j0
            k_b0 = _double(b0) ^ j1
            k_b1 = _double(b0 ^ d) ^ j1
            blob = update(
                k_a0.to_bytes(16, "big")
                + k_a1.to_bytes(16, "big")
                + k_b0.to_bytes(16, "big")
                + k_b1.to_bytes(16, "big")
            )
            h_a0 = int.from_bytes(blob[0:16], "big") ^ k_a0
            h_a1 = int.from_bytes(blob[16:32], "big") ^ k_a1
            h_b0 = int.from_bytes(blob[32:48], "big") ^ k_b0
            h_b1 = int.from_bytes(blob[48:64], "big") ^ k_b1
            tg = h_a0 ^ h_a1
            if pb:
                tg ^= d
            wg = h_a0 ^ (tg if pa else 0)
            te = h_b0 ^ h_b1 ^ a0
            we = h_b0 ^ ((te ^ a0) if pb else 0)
            labels[out] = wg ^ we
            append((tg, te))
            g_idx += 1

    gc = GarbledCircuit(
        circuit_hash=circuit_digest(circuit),
        n_and=g_idx,
        rows=tuple(rows),
        const_zero_active=labels[circuit.const_zero],
        const_one_active=labels[circuit.const_one] ^ d,
    )
    info = DecodingInfo(masks=tuple(labels[w] & 1 for w in circuit.output_wires))
    return gc, info


def evaluate(
    garbled: GarbledCircuit,
    circuit: Circuit,
    active_labels: Sequence[int],
) -> list[int]:
    """Evaluate on active input labels; returns active output labels.

    Only the table rows selected by the labels' permute bits are touched;
    the evaluator never handles a non-active label.
    """
    if len(active_labels) != circuit.n_inputs:
        raise GarblingError(
            f"expected {circuit.n_inputs} input labels, got {len(active_labels)}"
        )
    if garbled.circuit_hash != circuit_digest(circuit):
        raise GarblingError("garbled tables do not match this circuit")
    circuit.ensure_valid()
    labels = [0] * circuit.n_wires
    for i, lab in enumerate(active_labels):
        labels[i] = lab & MASK128
    labels[circuit.const_zero] = garbled.const_zero_active
    labels[circuit.const_one] = garbled.const_one_active

    rows = garbled.rows
    enc = _new_cipher()
    update = enc.update
    g_idx = 0
    for kind, a, b, out in circuit.gates:
        if kind == XOR:
            labels[out] = labels[a] ^ labels[b]
        elif kind == INV:
            labels[out] = labels[a]
        else:
            la = labels[a]
            lb = labels[b]
            tg, te = rows[g_idx]
            j0 = 2 * g_idx + 1
            j1 = j0 + 1
            k_a = _double(la) ^ j0
            k_b = _double(lb) ^ j1
            blob = update(k_a.to_bytes(16, "big") + k_b.to_bytes(16, "big"))
            h_a = int.from_bytes(blob[0:16], "big") ^ k_a
            h_b = int.from_bytes(blob[16:32], "big") ^ k_b
            wg = h_a ^ (tg if la & 1 else 0)
            we = h_b ^ ((te ^ la) if lb & 1 else 0)
            labels[out] = wg ^ we
            g_idx += 1
    if g_idx != garbled.n_and:
        raise GarblingError("AND-gate count mismatch between circuit and tables")
    return [labels[w] for w in circuit.output_wires]


def decode(info: DecodingInfo, output_labels: Sequence[int]) -> list[int]:
    """Map active output labels to plaintext bits via the permute-bit masks."""
    if len(output_labels) != len(info.masks):
        raise GarblingError(
            f"expected {len(info.masks)} output labels, got {len(output_labels)}"
        )
    return [(lab & 1) ^ m for lab, m in zip(output_labels, info.masks)]


def active_input_labels(
    circuit: Circuit,
    delta: GlobalDelta,
    zero_label: Callable[[int], int],
    input_bits: Sequence[int],
) -> list[int]:
    """Labels a label-holder submits for its plaintext bits: l0 ^ b*delta."""
    if len(input_bits) != circuit.n_inputs:
        raise GarblingError("input bit count mismatch")
    d = delta.bits
    return [
        (zero_label(i) & MASK128) ^ (d if bit & 1 else 0)
        for i, bit in enumerate(input_bits)
    ]
