"""Small shared helpers: angle wrapping, deterministic seeding, file output."""
from __future__ import annotations

import os
import tempfile

import numpy as np


def wrap_angle(theta):
    """Wrap an angle (scalar or array, radians) into (-pi, pi]."""
    wrapped = np.mod(-np.asarray(theta) + np.pi, 2.0 * np.pi)
    return -(wrapped - np.pi)


def child_seed(seed: int, stream: int) -> np.random.SeedSequence:
    """Derive an independent seed sequence for one named noise stream.

    Every consumer of randomness gets its own stream index so that adding
    a new stream never perturbs existing ones.
    """
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))


def fmt_float(x: float) -> str:
    """Render a float so that parsing the text recovers the exact value."""
    return repr(float(x))


def atomic_write_text(path: str, text: str) -> None:
    """Write a text file atomically (temp file + rename), LF line endings."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp_", text=False)
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
