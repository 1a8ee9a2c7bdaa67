"""Counter-based random streams keyed by (step, agent, particle, purpose).

A single 64-bit scenario seed deterministically derives every random draw in
a run. Each (step, agent, particle, purpose) tuple maps to a distinct
128-bit Philox key, so draws are reproducible regardless of evaluation order
or thread count.

Key layout (128 bits):

    seed                                   bits 64..127
    purpose                                bits 56..63
    agent                                  bits 48..55
    particle                               bits 24..47
    step                                   bits  0..23

Agent id 0xFF is reserved for the ground-truth simulation.
"""

from __future__ import annotations

import numpy as np

# Purpose codes (low byte of the packed word).
INIT = 1
FORECAST = 2
PREDICTED_OBS = 3
TRUTH_PROCESS = 4
TRUTH_OBS = 5

TRUTH_AGENT = 0xFF

_STEP_BITS = 24
_PARTICLE_BITS = 24
_AGENT_BITS = 8
MAX_SEED = (1 << 64) - 1


def pack_key(seed: int, step: int, agent: int, particle: int, purpose: int) -> int:
    """Pack a stream identity into a 128-bit Philox key."""
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed {seed} outside [0, 2^64)")
    if not 0 <= step < 1 << _STEP_BITS:
        raise ValueError(f"step {step} outside [0, 2^24)")
    if not 0 <= agent < 1 << _AGENT_BITS:
        raise ValueError(f"agent {agent} outside [0, 256)")
    if not 0 <= particle < 1 << _PARTICLE_BITS:
        raise ValueError(f"particle {particle} outside [0, 2^24)")
    if not 0 < purpose < 256:
        raise ValueError(f"purpose {purpose} outside (0, 256)")
    low = (purpose << 56) | (agent << 48) | (particle << _STEP_BITS) | step
    return (int(seed) << 64) | low


_WORD = (1 << 64) - 1


def _keyed_state(key: int) -> dict:
    # Equivalent to Philox(key=key) but without the OS-entropy pull the
    # BitGenerator constructor performs; draws are bit-identical.
    return {
        "bit_generator": "Philox",
        "state": {
            "counter": np.zeros(4, dtype=np.uint64),
            "key": np.array([key & _WORD, key >> 64], dtype=np.uint64),
        },
        "buffer": np.zeros(4, dtype=np.uint64),
        "buffer_pos": 4,
        "has_uint32": 0,
        "uinteger": 0,
    }


def stream(seed: int, step: int, agent: int, particle: int, purpose: int) -> np.random.Generator:
    """Independent generator for one (step, agent, particle, purpose) tuple."""
    bit_generator = np.random.Philox(0)
    bit_generator.state = _keyed_state(pack_key(seed, step, agent, particle, purpose))
    return np.random.Generator(bit_generator)


def particle_normals(seed, step, agent, purpose, n_particles, shape=()) -> np.ndarray:
    """Stack per-particle standard-normal draws into one array.

    Row i comes from the stream keyed with particle=i, so a parallel
    implementation drawing rows independently reproduces this output exactly.
    """
    shape = (shape,) if isinstance(shape, int) else tuple(shape)
    out = np.empty((n_particles,) + shape)
    bit_generator = np.random.Philox(0)
    generator = np.random.Generator(bit_generator)
    for i in range(n_particles):
        bit_generator.state = _keyed_state(pack_key(seed, step, agent, i, purpose))
        out[i] = generator.standard_normal(shape)
    return out
