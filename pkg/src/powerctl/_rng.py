"""Named, independent random streams derived from one integer seed."""

import numpy as np

# fixed keys: adding a stream never shifts another's sequence
_STREAM_KEYS = {
    "init": 0,
    "proposals": 1,
    "acceptance": 2,
    "scheduler": 3,
    "scale_down": 4,
    "arrivals": 5,
    "ties": 6,
    "instance": 7,
}


def stream(seed: int, name: str) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(_STREAM_KEYS[name],))
    return np.random.default_rng(ss)


def streams(seed: int, *names: str) -> dict:
    return {n: stream(seed, n) for n in names}
