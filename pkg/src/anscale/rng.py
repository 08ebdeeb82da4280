"""Deterministic per-path random streams and primitive variate samplers.

Streams are counter-based Philox generators keyed through numpy's
SeedSequence by (master_seed, domain, stream_id), so stream p of a given
seed always yields the same variate sequence regardless of how many other
streams exist or the order in which they are consumed.  Domain 0 is used
for path generation, domain 1 for bootstrap resampling, which keeps the
two families of draws independent even for equal stream ids.

The symmetric stable sampler maps a uniform angle and a unit exponential
through the Chambers-Mallows-Stuck transform, parameterized here by the
latent exponent L with stability index alpha = 1/L:

    X = sin(e/L) / (cos e)^L * (cos((L-1) e / L) / phi)^(L-1)

with e uniform on the open interval (-pi/2, pi/2) and phi a strictly
positive unit exponential; boundary draws are rejected and redrawn.  The
result is standard symmetric alpha-stable with characteristic function
exp(-|theta|^(1/L)).  At L = 1/2 the transform reduces to 2 sin(e) phi^(1/2),
a Gaussian of variance 2.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError

_U64 = (1 << 64) - 1

#: Stream-id namespaces: path generation vs bootstrap resampling.
PATH_DOMAIN = 0
BOOTSTRAP_DOMAIN = 1


class RngStream:
    """Single-consumer variate stream pinned to (master_seed, stream_id).

    Parameters
    ----------
    master_seed : int
        64-bit seed shared by the whole ensemble (taken modulo 2**64).
    stream_id : int
        Index of this stream, typically the path index.
    domain : int
        Namespace separating independent uses of the same stream id.

    Attributes
    ----------
    position : int
        Number of variates drawn so far (bookkeeping for reproducibility
        audits; rejection redraws are counted).
    """

    __slots__ = ("master_seed", "stream_id", "domain", "position", "_gen")

    def __init__(self, master_seed: int, stream_id: int, domain: int = PATH_DOMAIN):
        if stream_id < 0:
            raise DomainError(f"stream_id must be >= 0, got {stream_id}")
        if domain < 0:
            raise DomainError(f"domain must be >= 0, got {domain}")
        self.master_seed = int(master_seed) & _U64
        self.stream_id = int(stream_id)
        self.domain = int(domain)
        self.position = 0
        seq = np.random.SeedSequence(
            entropy=self.master_seed, spawn_key=(self.domain, self.stream_id)
        )
        self._gen = np.random.Generator(np.random.Philox(seq))

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return (
            f"RngStream(master_seed={self.master_seed}, stream_id={self.stream_id}, "
            f"domain={self.domain}, position={self.position})"
        )

    def standard_normals(self, n: int) -> np.ndarray:
        """Draw n iid N(0, 1) variates."""
        out = self._gen.standard_normal(int(n))
        self.position += int(n)
        return out

    def uniforms(self, n: int) -> np.ndarray:
        """Draw n iid uniforms on [0, 1)."""
        out = self._gen.random(int(n))
        self.position += int(n)
        return out

    def exponentials(self, n: int) -> np.ndarray:
        """Draw n iid unit exponentials."""
        out = self._gen.standard_exponential(int(n))
        self.position += int(n)
        return out

    def integers(self, low: int, high: int, n: int) -> np.ndarray:
        """Draw n iid integers uniform on [low, high)."""
        out = self._gen.integers(low, high, size=int(n), dtype=np.int64)
        self.position += int(n)
        return out


def draw_gaussian(stream: RngStream) -> float:
    """One standard normal variate from the stream."""
    return float(stream.standard_normals(1)[0])


def _validate_latent(latent: float) -> float:
    latent = float(latent)
    if not 0.5 <= latent < 1.0:
        raise DomainError(f"latent exponent must lie in [1/2, 1), got {latent}")
    return latent


def _cms_transform(latent: float, eps: np.ndarray, phi: np.ndarray) -> np.ndarray:
    # eps strictly inside (-pi/2, pi/2), phi strictly positive.
    lm1 = latent - 1.0
    return (
        np.sin(eps / latent)
        / np.cos(eps) ** latent
        * (np.cos(lm1 * eps / latent) / phi) ** lm1
    )


def levy_stable_vector(latent: float, n: int, stream: RngStream) -> np.ndarray:
    """Draw n iid standard symmetric stable variates with index 1/latent."""
    latent = _validate_latent(latent)
    n = int(n)
    if n < 0:
        raise DomainError(f"n must be >= 0, got {n}")
    out = np.empty(n)
    pending = np.arange(n)
    while pending.size:
        u = stream.uniforms(pending.size)
        w = stream.exponentials(pending.size)
        ok = (u > 0.0) & (w > 0.0)
        if np.any(ok):
            eps = np.pi * (u[ok] - 0.5)
            out[pending[ok]] = _cms_transform(latent, eps, w[ok])
        pending = pending[~ok]
    return out


def draw_levy_stable(latent: float, stream: RngStream) -> float:
    """One standard symmetric stable variate with index 1/latent."""
    return float(levy_stable_vector(latent, 1, stream)[0])
