"""Secure-computation toolkit for decentralized data markets.

Two interchangeable secure backends over shared workloads:

* a garbled-circuit engine (free-XOR, half-gates, OT-free input labels)
  driven by a Boolean circuit IR with composable arithmetic builders;
* a desk-scale BFV homomorphic-encryption backend with RNS/NTT
  polynomial arithmetic, batching, and noise-budget tracking.

Workloads: linkage-disequilibrium chi-square testing and fixed-point
logistic-regression inference, each with exact plaintext oracles.
"""

__version__ = "0.1.0"
