"""Role state machines: CSP, datatrust, makers, buyers.

Each role consumes an ordered message stream via ``receive`` and exposes
local actions that produce the messages it originates. State hygiene is
structural: the datatrust accepts only ciphertext/label-bearing types;
makers never hold the secret key; only the CSP ever holds sk, delta, or
the label-derivation key.
"""

from __future__ import annotations

import json
import time
from typing import Mapping

import numpy as np

from .. import garbling as gb
from ..circuits.bristol import parse_circuit_cached, serialize_circuit
from ..circuits.ir import Circuit
from ..he import bfv
from ..he.bfv import HeParams
from .computations import Computation, LdComputation, LrComputation
from .messages import (
    DecryptRequest,
    DeltaKeyDist,
    EncryptedListing,
    GarbledCircuitMsg,
    InputLabels,
    ListingBundle,
    Message,
    OutputDecoding,
    OutputLabels,
    ProtocolError,
    PublicKeyDist,
    Query,
    Result,
)


class DataTrust:
    """Stores protected listings; never sees plaintext, sk, delta, or k.

    The accepted message set has no plaintext-bearing variant, which is the
    structural form of that guarantee.
    """

    def __init__(self) -> None:
        self.name = "datatrust"
        self.public_bundle: PublicKeyDist | None = None
        self.listings: list[EncryptedListing] = []
        self.labels: dict[int, int] = {}

    def receive(self, msg: Message) -> Message | None:
        if isinstance(msg, PublicKeyDist):
            self.public_bundle = msg
            return None
        if isinstance(msg, EncryptedListing):
            self.listings.append(msg)
            return None
        if isinstance(msg, InputLabels):
            for wire, label in msg.labels:
                if wire in self.labels:
                    raise ProtocolError(f"duplicate label submission for wire {wire}")
                self.labels[wire] = label
            return None
        if isinstance(msg, Query):
            if self.labels:
                return ListingBundle(labels=tuple(sorted(self.labels.items())))
            cts = tuple(
                (listing.maker, name, blob)
                for listing in self.listings
                for name, blob in listing.entries
            )
            return ListingBundle(ciphertexts=cts)
        raise ProtocolError(f"datatrust cannot accept {msg.type_name}")


class Csp:
    """Crypto service provider: key generation, garbling, final decryption."""

    def __init__(self, computation: Computation, seed: int) -> None:
        self.name = "csp"
        self.computation = computation
        self._rng = np.random.default_rng(seed)
        self.timings: dict[str, float] = {}
        # Protocol 1 state
        self._sk = None
        self._pk = None
        self._rk = None
        self._plan = None
        self._he_t: int | None = None
        # Protocol 2 state
        self._delta: gb.GlobalDelta | None = None
        self._prf_key: bytes | None = None
        self._const_seed: bytes | None = None
        self._decoding: gb.DecodingInfo | None = None

    # -- Protocol 1 ----------------------------------------------------------

    def he_setup(self, params: HeParams) -> PublicKeyDist:
        t0 = time.perf_counter()
        seed = int(self._rng.integers(0, 2**63, dtype=np.int64))
        self._sk, self._pk, self._rk = bfv.keygen(params, seed)
        if isinstance(self.computation, LdComputation):
            self._plan = self.computation.he_plan(params)
        else:
            self._he_t = self.computation.he_plain_modulus(params)
        self.timings["keygen_s"] = time.perf_counter() - t0
        return PublicKeyDist(
            params_repr=params.canonical_repr(),
            pk=bfv.public_key_to_bytes(self._pk),
            rk=bfv.relin_key_to_bytes(self._rk),
        )

    @property
    def he_plan(self):
        return self._plan

    @property
    def he_t(self) -> int | None:
        return self._he_t

    # -- Protocol 2 ----------------------------------------------------------

    def gc_setup(self) -> DeltaKeyDist:
        delta_seed = self._rng.bytes(16)
        self._delta = gb.derive_delta(delta_seed)
        self._prf_key = self._rng.bytes(16)
        self._const_seed = self._rng.bytes(16)
        return DeltaKeyDist(
            delta=self._delta.bits.to_bytes(16, "big"), prf_key=self._prf_key
        )

    def make_garbled(self) -> GarbledCircuitMsg:
        if self._delta is None or self._prf_key is None or self._const_seed is None:
            raise ProtocolError("gc_setup must run before garbling")
        circuit = self.computation.circuit
        const_source = gb.seeded_label_source(self._const_seed, domain=2)
        n_inputs = circuit.n_inputs
        input_zero = gb.derive_input_labels(self._prf_key, n_inputs)

        def zero_label(wire: int) -> int:
            if wire < n_inputs:
                return input_zero[wire]
            return const_source(wire)

        t0 = time.perf_counter()
        garbled, decoding = gb.garble(circuit, self._delta, zero_label)
        self.timings["garble_s"] = time.perf_counter() - t0
        self._decoding = decoding
        text = getattr(circuit, "_text_cache", None)
        if text is None:
            text = serialize_circuit(circuit).encode()
            object.__setattr__(circuit, "_text_cache", text)
        return GarbledCircuitMsg(
            circuit_text=text,
            garbled=gb.serialize_garbled(garbled),
        )

    # -- message handling ------------------------------------------------------

    def receive(self, msg: Message) -> Message | None:
        if isinstance(msg, DecryptRequest):
            if self._sk is None:
                raise ProtocolError("CSP has no secret key for this session")
            t0 = time.perf_counter()
            if isinstance(self.computation, LdComputation):
                result = self.computation.he_finish(self._sk, self._plan, msg.entries)
            else:
                result = self.computation.he_finish(self._sk, msg.entries)
            self.timings["decrypt_s"] = time.perf_counter() - t0
            return Result(payload_json=json.dumps(result, sort_keys=True))
        if isinstance(msg, OutputLabels):
            if self._decoding is None:
                raise ProtocolError("CSP has not garbled a circuit in this session")
            bits = gb.decode(self._decoding, list(msg.labels))
            return OutputDecoding(bits=tuple(bits))
        raise ProtocolError(f"CSP cannot accept {msg.type_name}")


class Maker:
    """A data contributor; owns a subset of the circuit's input groups."""

    def __init__(
        self,
        index: int,
        computation: Computation,
        values: Mapping[str, int],
        seed: int,
    ) -> None:
        self.name = f"maker{index}"
        self.index = index
        self.computation = computation
        self.values = dict(values)
        self._rng = np.random.default_rng(seed)
        self._delta: int | None = None
        self._prf_key: bytes | None = None
        self._plan_cache = None
        self._he_t_cache: int | None = None

    # -- Protocol 1 ----------------------------------------------------------

    def make_encrypted_listing(
        self, params: HeParams, bundle: PublicKeyDist
    ) -> EncryptedListing:
        pk = bfv.public_key_from_bytes(bundle.pk, params)
        comp = self.computation
        if isinstance(comp, LdComputation):
            if self._plan_cache is None:
                raise ProtocolError("maker needs the session plan moduli")
            entries = comp.he_encrypt_inputs(pk, self._plan_cache, self.values, self._rng)
        else:
            if self._he_t_cache is None:
                raise ProtocolError("maker needs the session plaintext modulus")
            entries = comp.he_encrypt_inputs(pk, self._he_t_cache, self.values, self._rng)
        return EncryptedListing(maker=self.index, entries=tuple(entries))

    def set_session_moduli(self, plan=None, t: int | None = None) -> None:
        """Public plan parameters (moduli) are part of the published query
        config; they carry no secrets."""
        self._plan_cache = plan
        self._he_t_cache = t

    # -- Protocol 2 ----------------------------------------------------------

    def receive(self, msg: Message) -> Message | None:
        if isinstance(msg, DeltaKeyDist):
            self._delta = int.from_bytes(msg.delta, "big")
            self._prf_key = msg.prf_key
            return None
        raise ProtocolError(f"maker cannot accept {msg.type_name}")

    def make_input_labels(self) -> InputLabels:
        """Active labels for the maker's own bits: PRF(k, wire) ^ bit*delta.
        No oblivious transfer anywhere in this exchange."""
        if self._delta is None or self._prf_key is None:
            raise ProtocolError("maker has not received delta and k")
        circuit: Circuit = self.computation.circuit
        zero = gb.derive_input_labels(self._prf_key, circuit.n_inputs)
        labels = []
        for group_name, value in self.values.items():
            group = circuit.group(group_name)
            if value < 0:
                value &= (1 << group.width) - 1
            if value >> group.width:
                raise ProtocolError(
                    f"value for {group_name} does not fit {group.width} bits"
                )
            for k in range(group.width):
                wire = group.start + k
                bit = (value >> k) & 1
                labels.append((wire, zero[wire] ^ self._delta if bit else zero[wire]))
        return InputLabels(maker=self.index, labels=tuple(labels))


class Buyer:
    """Queries the datatrust and drives the computation on protected data."""

    def __init__(self, index: int, computation: Computation) -> None:
        self.name = f"buyer{index}"
        self.index = index
        self.computation = computation
        self.timings: dict[str, float] = {}
        self._garbled_msg: GarbledCircuitMsg | None = None
        self.result: dict | None = None

    def make_query(self) -> Query:
        return Query(
            buyer=self.index,
            computation_id=self.computation.computation_id,
            params_json=self.computation.params_json(),
        )

    # -- Protocol 1 ----------------------------------------------------------

    def make_decrypt_request(
        self,
        params: HeParams,
        bundle: PublicKeyDist,
        listings: ListingBundle,
        plan=None,
        t: int | None = None,
    ) -> DecryptRequest:
        rk = bfv.relin_key_from_bytes(bundle.rk, params)
        comp = self.computation
        t0 = time.perf_counter()
        if isinstance(comp, LdComputation):
            entries = comp.he_evaluate(params, rk, plan, listings.ciphertexts)
        else:
            entries = comp.he_evaluate(params, t, listings.ciphertexts)
        self.timings["he_eval_s"] = time.perf_counter() - t0
        return DecryptRequest(entries=tuple(entries))

    def accept_result(self, msg: Result) -> dict:
        self.result = msg.as_dict()
        return self.result

    # -- Protocol 2 ----------------------------------------------------------

    def receive(self, msg: Message) -> Message | None:
        if isinstance(msg, GarbledCircuitMsg):
            self._garbled_msg = msg
            return None
        raise ProtocolError(f"buyer cannot accept {msg.type_name}")

    def evaluate_garbled(self, listings: ListingBundle) -> OutputLabels:
        if self._garbled_msg is None:
            raise ProtocolError("buyer has no garbled circuit")
        circuit = parse_circuit_cached(self._garbled_msg.circuit_text)
        garbled = gb.parse_garbled(self._garbled_msg.garbled)
        label_map = dict(listings.labels)
        if len(label_map) != circuit.n_inputs:
            raise ProtocolError(
                f"expected {circuit.n_inputs} input labels, got {len(label_map)}"
            )
        active = [label_map[i] for i in range(circuit.n_inputs)]
        t0 = time.perf_counter()
        outs = gb.evaluate(garbled, circuit, active)
        self.timings["evaluate_s"] = time.perf_counter() - t0
        return OutputLabels(labels=tuple(outs))

    def accept_decoding(self, msg: OutputDecoding) -> dict:
        self.result = self.computation.decode_output(list(msg.bits))
        return self.result
