"""Path-ensemble generators for the nine process families.

Families and their increment laws (all on unit time steps):

    BM / SBM    independent Gaussians; the scaled variant draws increment k
                with the exact integrated variance
                ((k+1)^(2M) - k^(2M)) / (2M), which reduces to unit white
                noise at M = 1/2.
    FBM / SFBM  fractional Gaussian noise synthesized by circulant
                embedding (Davies-Harte), exact to the target
                autocovariance 0.5*(|k+1|^(2J) - 2|k|^(2J) + |k-1|^(2J)).
    LM / SLM    independent standard symmetric stable increments with
                stability index 1/L.
    FLM / SFLM  truncated moving-average approximation of fractional
                stable noise on a refined mesh (Stoev-Wu style): with mesh
                m and window K fine steps,
                d_k = m^(-(J-1/2)-L)/Gamma(J+1/2)
                      * sum_{i=1..K} [i^(J-1/2) - (i-m)_+^(J-1/2)] xi_{(k+1)m-i}
                over iid standard symmetric stable xi, evaluated by FFT
                convolution.
    VDP         Euler-Maruyama integration of
                dX = sqrt(t^(2H-1) * (2H/eps^2) * (1 + eps*|X|/t^H)) dB.

Scaled ("S") variants multiply increment k by (k+1)^(M-1/2), which at
M = 1/2 is the exact identity.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.fft import next_fast_len

from . import _kernels
from .core import PathEnsemble
from .errors import DomainError, NegativeEigenvalueError, RsUnreliableWarning
from .parallel import run_chunked
from .rng import RngStream, levy_stable_vector

#: Relative tolerance below which embedding eigenvalues count as negative
#: (tiny negative rounding noise is floored to zero instead).
_EIG_TOL = 1e-12

FAMILIES = ("BM", "SBM", "FBM", "SFBM", "LM", "SLM", "FLM", "SFLM", "VDP")

_REQUIRED_EXPONENTS = {
    "BM": (),
    "SBM": ("moses",),
    "FBM": ("joseph",),
    "SFBM": ("joseph", "moses"),
    "LM": ("latent",),
    "SLM": ("latent", "moses"),
    "FLM": ("joseph", "latent"),
    "SFLM": ("joseph", "latent", "moses"),
    "VDP": ("hurst",),
}


def _check_open_unit(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 < value < 1.0:
        raise DomainError(f"{name} must lie in (0, 1), got {value}")
    return value


# ---------------------------------------------------------------------------
# Gaussian families
# ---------------------------------------------------------------------------


def _fgn_covariance(joseph: float, lags: np.ndarray) -> np.ndarray:
    k = lags.astype(np.float64)
    h2 = 2.0 * joseph
    return 0.5 * (
        np.abs(k + 1.0) ** h2 - 2.0 * np.abs(k) ** h2 + np.abs(k - 1.0) ** h2
    )


@lru_cache(maxsize=32)
def _embedding_eigenvalues(joseph: float, half: int) -> np.ndarray:
    """Eigenvalues of the circulant embedding of the fGn covariance.

    The embedding has even size 2*half; the first row is
    [gamma_0 .. gamma_half, gamma_{half-1} .. gamma_1].
    """
    cov = _fgn_covariance(joseph, np.arange(half + 1))
    first_row = np.concatenate([cov, cov[-2:0:-1]])
    lam = np.fft.rfft(first_row).real
    floor = -_EIG_TOL * float(lam.max(initial=0.0))
    if np.any(lam < floor):
        raise NegativeEigenvalueError(
            f"circulant embedding of size {2 * half} has eigenvalue "
            f"{lam.min():.3e}; covariance is not embeddable"
        )
    lam = np.maximum(lam, 0.0)
    lam.flags.writeable = False
    return lam


@lru_cache(maxsize=8)
def _fgn_size(n: int) -> int:
    """Smallest even fast FFT length >= 2*(n-1)."""
    m = next_fast_len(max(2 * (n - 1), 2), real=True)
    while m % 2:
        m = next_fast_len(m + 1, real=True)
    return m


def fgn(joseph: float, n: int, stream: RngStream) -> np.ndarray:
    """One path of n fractional-Gaussian-noise increments, exact covariance.

    Consumes one normal per embedding slot (the embedding size depends
    only on n), so equal (seed, stream) always yields the same path.

    Raises
    ------
    DomainError
        If joseph is outside (0, 1) or n < 1.
    NegativeEigenvalueError
        If the circulant embedding fails (cannot happen for admissible
        joseph; guards corrupted covariances).
    """
    joseph = _check_open_unit(joseph, "joseph")
    n = int(n)
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if n == 1:
        return stream.standard_normals(1)
    m = _fgn_size(n)
    half = m // 2
    lam = _embedding_eigenvalues(joseph, half)
    z = stream.standard_normals(m)
    spectrum = np.empty(half + 1, dtype=np.complex128)
    spectrum[0] = math.sqrt(lam[0]) * z[0]
    spectrum[half] = math.sqrt(lam[half]) * z[1]
    amp = np.sqrt(0.5 * lam[1:half])
    spectrum[1:half] = amp * (z[2::2] + 1j * z[3::2])
    return np.fft.irfft(spectrum, n=m)[:n] * math.sqrt(m)


def sbm_exact_increments(moses: float, n: int, stream: RngStream) -> np.ndarray:
    """Independent Gaussian increments with exact power-law variance growth.

    Increment k has variance ((k+1)^(2M) - k^(2M)) / (2M); at M = 1/2 this
    is plain unit white noise.
    """
    moses = _check_open_unit(moses, "moses")
    n = int(n)
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    k = np.arange(n, dtype=np.float64)
    m2 = 2.0 * moses
    var = ((k + 1.0) ** m2 - k**m2) / m2
    return stream.standard_normals(n) * np.sqrt(var)


# ---------------------------------------------------------------------------
# Stable families
# ---------------------------------------------------------------------------

#: Default kernel window per mesh step for FLM/SFLM.
DEFAULT_FLM_WINDOW = 1024


def stable_noise(latent: float, n: int, stream: RngStream) -> np.ndarray:
    """n iid standard symmetric stable increments with index 1/latent."""
    return levy_stable_vector(latent, n, stream)


@lru_cache(maxsize=16)
def _flm_plan(
    joseph: float, mesh: int, window: int, n: int
) -> tuple[np.ndarray, int]:
    """Precomputed kernel spectrum and FFT size for flm_increments."""
    p = joseph - 0.5
    i = np.arange(1, window + 1, dtype=np.float64)
    kernel = np.zeros(window + 1)
    kernel[1:] = i**p
    over = i > mesh
    kernel[1:][over] -= (i[over] - mesh) ** p
    nfft = next_fast_len(n * mesh + window + mesh + 1, real=True)
    spectrum = np.fft.rfft(kernel, nfft)
    spectrum.flags.writeable = False
    return spectrum, nfft


def flm_increments(
    joseph: float,
    latent: float,
    n: int,
    stream: RngStream,
    mesh: int = 16,
    window: int | None = None,
) -> np.ndarray:
    """One path of n fractional-stable-noise increments.

    Parameters
    ----------
    joseph, latent : float
        Memory exponent J in (0, 1) and tail exponent L in [1/2, 1).
    n : int
        Number of unit-time increments.
    mesh : int
        Fine steps per unit time (the moving average runs on the fine
        lattice).
    window : int, optional
        Kernel truncation in fine steps; defaults to DEFAULT_FLM_WINDOW
        per mesh step.

    Notes
    -----
    For J < 1/2 the increments are so rough that rescaled-range statistics
    are unreliable; this is flagged with RsUnreliableWarning, not an error.
    At J = 1/2 the kernel collapses to a plain mesh average and the output
    is exactly iid standard stable in distribution.
    """
    joseph = _check_open_unit(joseph, "joseph")
    n = int(n)
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    mesh = int(mesh)
    if mesh < 1:
        raise DomainError(f"mesh must be >= 1, got {mesh}")
    if window is None:
        window = DEFAULT_FLM_WINDOW * mesh
    window = int(window)
    if window < mesh:
        raise DomainError(f"window must be >= mesh, got {window} < {mesh}")
    if joseph < 0.5:
        warnings.warn(
            f"joseph={joseph} < 1/2: rescaled-range statistics will be unreliable",
            RsUnreliableWarning,
            stacklevel=2,
        )
    spectrum, nfft = _flm_plan(joseph, mesh, window, n)
    noise = levy_stable_vector(latent, n * mesh + window, stream)
    conv = np.fft.irfft(np.fft.rfft(noise, nfft) * spectrum, nfft)
    picks = conv[mesh + window : n * mesh + window + 1 : mesh]
    scale = mesh ** (-(joseph - 0.5) - latent) / math.gamma(joseph + 0.5)
    return scale * picks


# ---------------------------------------------------------------------------
# Nonstationary scaling and diffusion
# ---------------------------------------------------------------------------


def moses_weights(increments: np.ndarray, moses: float) -> np.ndarray:
    """Scale increment k by (k+1)^(M-1/2) along the last axis.

    Accepts 0 < M <= 1; at M = 1/2 the weights are exactly 1 and the
    values are returned bit-identically (in a fresh array).
    """
    moses = float(moses)
    if not 0.0 < moses <= 1.0:
        raise DomainError(f"moses must lie in (0, 1], got {moses}")
    arr = np.asarray(increments, dtype=np.float64)
    if arr.ndim < 1 or arr.shape[-1] < 1:
        raise DomainError("increments must have a nonempty last axis")
    k = np.arange(arr.shape[-1], dtype=np.float64)
    return arr * (k + 1.0) ** (moses - 0.5)


@lru_cache(maxsize=8)
def _vdp_factors(hurst: float, n: int, substeps: int) -> tuple[np.ndarray, np.ndarray]:
    """Time-power factors t^(2H-1) and t^(-H) on the fine lattice."""
    t = (np.arange(n * substeps - 1, dtype=np.float64) + 1.0) / substeps
    f_diff = t ** (2.0 * hurst - 1.0)
    f_scale = t ** (-hurst)
    f_diff.flags.writeable = False
    f_scale.flags.writeable = False
    return f_diff, f_scale


def vdp_path(
    hurst: float,
    epsilon: float,
    n: int,
    substeps: int,
    stream: RngStream,
    constant_diffusion: float | None = None,
) -> np.ndarray:
    """One diffusion path of n unit-time increments by Euler-Maruyama.

    The generic diffusion is dX = sqrt(D(X, t)) dB with
    D = t^(2H-1) * (2H/eps^2) * (1 + eps*|X|/t^H), integrated on step
    h = 1/substeps from X = 0 at t = h.  With constant_diffusion = D0 the
    state dependence is dropped (D = t^(2H-1) * D0), which at H = 1/2 is
    plain Brownian motion of variance D0 per unit time.
    """
    hurst = _check_open_unit(hurst, "hurst")
    epsilon = float(epsilon)
    n = int(n)
    substeps = int(substeps)
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if substeps < 1:
        raise DomainError(f"substeps must be >= 1, got {substeps}")
    if constant_diffusion is None:
        if epsilon <= 0.0:
            raise DomainError(f"epsilon must be positive, got {epsilon}")
        c0 = 2.0 * hurst / (epsilon * epsilon)
        eps_eff = epsilon
    else:
        c0 = float(constant_diffusion)
        if c0 <= 0.0:
            raise DomainError(f"constant_diffusion must be positive, got {c0}")
        eps_eff = 0.0
    out = np.empty(n)
    if n * substeps - 1 == 0:
        out[0] = 0.0
        return out
    f_diff, f_scale = _vdp_factors(hurst, n, substeps)
    z = stream.standard_normals(n * substeps - 1)
    _kernels.vdp_em_path(z, f_diff, f_scale, c0, eps_eff, substeps, out)
    return out


# ---------------------------------------------------------------------------
# Family dispatch
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProcessSpec:
    """Parameter record for one process family.

    Exponent fields that are meaningless for the family must be left None;
    the numeric knobs (epsilon, flm_mesh, flm_window, vdp_substeps) are
    validated only where they apply.
    """

    family: str
    joseph: float | None = None
    latent: float | None = None
    moses: float | None = None
    hurst: float | None = None
    epsilon: float = 1.0
    flm_mesh: int = 16
    flm_window: int | None = None
    vdp_substeps: int = 16

    def __post_init__(self):
        fam = str(self.family).upper()
        object.__setattr__(self, "family", fam)
        if fam not in FAMILIES:
            raise DomainError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        required = _REQUIRED_EXPONENTS[fam]
        for name in ("joseph", "latent", "moses", "hurst"):
            value = getattr(self, name)
            if name in required:
                if value is None:
                    raise DomainError(f"family {fam} requires {name}")
            elif value is not None:
                raise DomainError(f"family {fam} does not take {name}")
        if self.joseph is not None:
            _check_open_unit(self.joseph, "joseph")
        if self.moses is not None:
            _check_open_unit(self.moses, "moses")
        if self.hurst is not None:
            _check_open_unit(self.hurst, "hurst")
        if self.latent is not None and not 0.5 <= self.latent < 1.0:
            raise DomainError(f"latent must lie in [1/2, 1), got {self.latent}")
        if fam == "VDP" and self.epsilon <= 0.0:
            raise DomainError(f"epsilon must be positive, got {self.epsilon}")
        if fam in ("FLM", "SFLM"):
            if self.flm_mesh < 1:
                raise DomainError(f"flm_mesh must be >= 1, got {self.flm_mesh}")
            if self.flm_window is not None and self.flm_window < self.flm_mesh:
                raise DomainError("flm_window must be >= flm_mesh")
        if fam == "VDP" and self.vdp_substeps < 1:
            raise DomainError(f"vdp_substeps must be >= 1, got {self.vdp_substeps}")

    @property
    def rs_unreliable(self) -> bool:
        """True when rescaled-range statistics are unreliable for this family."""
        return self.family in ("FLM", "SFLM") and self.joseph is not None and self.joseph < 0.5

    def nominal_exponents(self) -> dict[str, float]:
        """The (J, L, M, H) values this family is constructed to realize."""
        j = self.joseph if self.joseph is not None else 0.5
        l = self.latent if self.latent is not None else 0.5
        m = self.moses if self.moses is not None else 0.5
        if self.family == "VDP":
            m = self.hurst
            h = self.hurst
        else:
            h = j + l + m - 1.0
        return {"joseph": j, "latent": l, "moses": m, "hurst": h}

    def descriptor(self) -> str:
        record: dict = {"family": self.family}
        for name in ("joseph", "latent", "moses", "hurst"):
            value = getattr(self, name)
            if value is not None:
                record[name] = value
        if self.family == "VDP":
            record["epsilon"] = self.epsilon
            record["substeps"] = self.vdp_substeps
        if self.family in ("FLM", "SFLM"):
            record["mesh"] = self.flm_mesh
            record["window"] = (
                self.flm_window
                if self.flm_window is not None
                else DEFAULT_FLM_WINDOW * self.flm_mesh
            )
        if self.rs_unreliable:
            record["rs_unreliable"] = True
        return json.dumps(record, sort_keys=True)


def _generate_path(spec: ProcessSpec, n: int, stream: RngStream) -> np.ndarray:
    fam = spec.family
    if fam == "BM":
        return sbm_exact_increments(0.5, n, stream)
    if fam == "SBM":
        return sbm_exact_increments(spec.moses, n, stream)
    if fam == "FBM":
        return fgn(spec.joseph, n, stream)
    if fam == "SFBM":
        return moses_weights(fgn(spec.joseph, n, stream), spec.moses)
    if fam == "LM":
        return stable_noise(spec.latent, n, stream)
    if fam == "SLM":
        return moses_weights(stable_noise(spec.latent, n, stream), spec.moses)
    if fam == "FLM":
        return flm_increments(
            spec.joseph, spec.latent, n, stream, spec.flm_mesh, spec.flm_window
        )
    if fam == "SFLM":
        raw = flm_increments(
            spec.joseph, spec.latent, n, stream, spec.flm_mesh, spec.flm_window
        )
        return moses_weights(raw, spec.moses)
    if fam == "VDP":
        return vdp_path(spec.hurst, spec.epsilon, n, spec.vdp_substeps, stream)
    raise DomainError(f"unknown family {fam!r}")  # pragma: no cover


def generate(
    spec: ProcessSpec,
    n_paths: int,
    n_steps: int,
    master_seed: int,
    threads: int | None = None,
) -> PathEnsemble:
    """Generate an ensemble; path p consumes stream (master_seed, p) only.

    Streams are keyed per path, so any sub-ensemble of paths is
    reproducible independently of n_paths, and results do not depend on
    the thread count.
    """
    n_paths = int(n_paths)
    n_steps = int(n_steps)
    if n_paths < 1:
        raise DomainError(f"n_paths must be >= 1, got {n_paths}")
    if n_steps < 1:
        raise DomainError(f"n_steps must be >= 1, got {n_steps}")
    out = np.empty((n_paths, n_steps))

    def worker(lo: int, hi: int) -> None:
        for p in range(lo, hi):
            out[p] = _generate_path(spec, n_steps, RngStream(master_seed, p))

    run_chunked(worker, n_paths, threads)
    return PathEnsemble(
        increments=out, descriptor=spec.descriptor(), master_seed=int(master_seed)
    )
