"""Deterministic per-component RNG derivation from one master seed."""

from __future__ import annotations

import hashlib

import numpy as np


def component_seed(master_seed: int, component: str) -> int:
    """Derive a stable 64-bit seed for a named pipeline component."""
    digest = hashlib.sha256(component.encode("utf-8")).digest()
    tag = int.from_bytes(digest[:8], "big")
    return (int(master_seed) ^ tag) & 0xFFFFFFFFFFFFFFFF


def component_rng(master_seed: int, component: str) -> np.random.Generator:
    return np.random.default_rng(component_seed(master_seed, component))
