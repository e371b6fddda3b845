"""Four-role market choreography (CSP, datatrust, makers, buyers) over
in-process or TCP transports."""

from .messages import (
    MESSAGE_TYPES,
    DecryptRequest,
    DeltaKeyDist,
    EncryptedListing,
    FramingError,
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
from .channels import InprocChannel, TcpChannel, Transcript, TransportError
from .computations import LdComputation, LrComputation
from .runner import ProtocolOutcome, run_protocol1, run_protocol2

__all__ = [
    "MESSAGE_TYPES",
    "DecryptRequest",
    "DeltaKeyDist",
    "EncryptedListing",
    "FramingError",
    "GarbledCircuitMsg",
    "InprocChannel",
    "InputLabels",
    "LdComputation",
    "ListingBundle",
    "LrComputation",
    "Message",
    "OutputDecoding",
    "OutputLabels",
    "ProtocolError",
    "ProtocolOutcome",
    "PublicKeyDist",
    "Query",
    "Result",
    "TcpChannel",
    "Transcript",
    "TransportError",
    "run_protocol1",
    "run_protocol2",
]
