"""Shared encoding matrices for sum-preserving coded transmission.

Every transmitter applies one identical tall matrix ``phi`` (l_tilde x l)
to its source vector, so the receiver sees a coded version of the sum and
can undo the code with a single pseudo-inverse. A valid matrix satisfies

    trace(phi^H phi) = l            (power preservation)
    every l-row subset of phi has full rank   (decoding feasibility)

and the distortion of the decoded sum depends on phi only through the
eigenvalues of phi^H phi (the Gram spectrum). Orthonormal columns make the
spectrum all ones, which is the distortion-optimal choice.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np

from .errors import InvalidShape, RankDeficient
from .numerics import (
    RANK_TOLERANCE,
    Rng,
    hermitian_eigenvalues,
    pseudo_inverse,
    qr_orthonormal,
    sample_complex_gaussian,
)

# Relative slack on the power constraint trace(phi^H phi) = l.
POWER_TOLERANCE = 1e-8

# Gram eigenvalues are squared singular values, hence the squared cutoff.
_GRAM_RANK_TOLERANCE = RANK_TOLERANCE**2

DEFAULT_MAX_EXHAUSTIVE_SUBSETS = 100_000
DEFAULT_SAMPLE_COUNT = 1_000


class Construction(str, Enum):
    RANDOM_ORTHONORMAL = "random_orthonormal"
    IDENTITY = "identity"
    REPETITION = "repetition"
    CUSTOM = "custom"


class RankMode(str, Enum):
    EXHAUSTIVE = "exhaustive"
    SAMPLED = "sampled"


@dataclass(eq=False)
class ValidationReport:
    """Findings from checking the power and row-subset rank conditions."""

    power_ok: bool
    rank_mode: RankMode
    subsets_checked: int
    rank_ok: bool
    worst_min_singular_ratio: float
    gram_spectrum: list[float]

    @property
    def ok(self) -> bool:
        return self.power_ok and self.rank_ok


@dataclass(eq=False)
class EncodingMatrix:
    """Tall encoding matrix shared by every transmitter.

    Rows are channel uses (l_tilde), columns are source dimensions (l).
    Instances are treated as immutable once built; the decoder
    (pseudo-inverse) and Gram matrix are cached lazily.
    """

    phi: np.ndarray
    l_tilde: int
    l: int
    construction: Construction
    validation: ValidationReport | None = None

    def __post_init__(self):
        if self.l < 1 or self.l_tilde < self.l:
            raise InvalidShape(
                f"encoding shape needs l_tilde >= l >= 1, got "
                f"({self.l_tilde}, {self.l})"
            )
        phi = np.asarray(self.phi, dtype=np.complex128)
        if phi.shape != (self.l_tilde, self.l):
            raise InvalidShape(
                f"matrix shape {phi.shape} does not match "
                f"({self.l_tilde}, {self.l})"
            )
        if not np.isfinite(phi).all():
            raise ValueError("encoding matrix entries must be finite")
        self.phi = phi

    @property
    def rate(self) -> float:
        return self.l / self.l_tilde

    @cached_property
    def gram(self) -> np.ndarray:
        return self.phi.conj().T @ self.phi

    @cached_property
    def decoder(self) -> np.ndarray:
        """Left pseudo-inverse used to undo the code at the receiver."""
        return pseudo_inverse(self.phi)


def construct_random_orthonormal(l_tilde: int, l: int, rng: Rng) -> EncodingMatrix:
    """Optimal construction: orthonormalize an i.i.d. CN(0,1) matrix.

    The resulting columns are orthonormal (phi^H phi = I up to round-off),
    and the row-subset rank condition holds almost surely. Deterministic
    given the rng key.
    """
    if l < 1 or l_tilde < l:
        raise InvalidShape(
            f"need l_tilde >= l >= 1, got ({l_tilde}, {l})"
        )
    a = sample_complex_gaussian(rng, l_tilde * l, 1.0).reshape(l_tilde, l)
    return EncodingMatrix(
        phi=qr_orthonormal(a),
        l_tilde=l_tilde,
        l=l,
        construction=Construction.RANDOM_ORTHONORMAL,
    )


def construct_identity(l: int) -> EncodingMatrix:
    """Uncoded baseline: phi = I_l, one channel use per source dimension."""
    if l < 1:
        raise InvalidShape("need l >= 1")
    return EncodingMatrix(
        phi=np.eye(l, dtype=np.complex128),
        l_tilde=l,
        l=l,
        construction=Construction.IDENTITY,
    )


def construct_repetition(l: int, m: int = 1) -> EncodingMatrix:
    """Stack m scaled copies of the identity: phi = [I_l; ...; I_l]/sqrt(m).

    m = 1 is the uncoded baseline. For m >= 2 the Gram matrix is still the
    identity (so the expected distortion is optimal), but duplicate rows
    break the row-subset rank condition, which validation will flag.
    """
    if l < 1:
        raise InvalidShape("need l >= 1")
    if m < 1:
        raise InvalidShape("need at least one repetition block")
    phi = np.tile(np.eye(l, dtype=np.complex128), (m, 1)) / math.sqrt(m)
    return EncodingMatrix(
        phi=phi, l_tilde=m * l, l=l, construction=Construction.REPETITION
    )


def from_array(phi, construction: Construction = Construction.CUSTOM) -> EncodingMatrix:
    phi = np.asarray(phi, dtype=np.complex128)
    if phi.ndim != 2:
        raise InvalidShape("encoding matrix must be 2-D")
    return EncodingMatrix(
        phi=phi, l_tilde=phi.shape[0], l=phi.shape[1], construction=construction
    )


def validate(
    enc: EncodingMatrix,
    max_exhaustive_subsets: int = DEFAULT_MAX_EXHAUSTIVE_SUBSETS,
    sample_count: int = DEFAULT_SAMPLE_COUNT,
    rng: Rng | None = None,
) -> ValidationReport:
    """Check the power constraint and the row-subset rank condition.

    All C(l_tilde, l) row subsets are tested when there are at most
    ``max_exhaustive_subsets`` of them; otherwise ``sample_count`` subsets
    are drawn uniformly (requires ``rng``). A subset passes when its
    min/max singular-value ratio exceeds the rank tolerance. The report
    also carries the Gram spectrum, which fully determines the distortion
    law downstream.
    """
    trace = float(np.trace(enc.gram).real)
    power_ok = abs(trace - enc.l) <= POWER_TOLERANCE * enc.l

    total = math.comb(enc.l_tilde, enc.l)
    # exhaustive whenever it is no more work than sampling, so sampled
    # reports always check strictly fewer subsets than exist
    if total <= max(max_exhaustive_subsets, sample_count):
        mode = RankMode.EXHAUSTIVE
        subsets = itertools.combinations(range(enc.l_tilde), enc.l)
        count = total
    else:
        if rng is None:
            raise ValueError("sampled rank validation requires an rng")
        if sample_count < 1:
            raise ValueError("sample_count must be positive")
        mode = RankMode.SAMPLED
        subsets = (
            tuple(sorted(rng.gen.choice(enc.l_tilde, size=enc.l, replace=False)))
            for _ in range(sample_count)
        )
        count = sample_count

    worst = math.inf
    for rows in subsets:
        sv = np.linalg.svd(enc.phi[list(rows), :], compute_uv=False)
        ratio = float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0
        worst = min(worst, ratio)
    rank_ok = worst > RANK_TOLERANCE

    spectrum = hermitian_eigenvalues(enc.gram)
    return ValidationReport(
        power_ok=power_ok,
        rank_mode=mode,
        subsets_checked=count,
        rank_ok=rank_ok,
        worst_min_singular_ratio=worst,
        gram_spectrum=[float(x) for x in spectrum],
    )


def gram_spectrum(enc: EncodingMatrix) -> np.ndarray:
    """Eigenvalues of phi^H phi, ascending. Sums to trace(phi^H phi)."""
    return hermitian_eigenvalues(enc.gram)


def _full_rank_spectrum(enc: EncodingMatrix) -> np.ndarray:
    spectrum = gram_spectrum(enc)
    if spectrum[0] <= _GRAM_RANK_TOLERANCE * spectrum[-1] or spectrum[0] <= 0:
        raise RankDeficient(
            "Gram spectrum has a vanishing eigenvalue; encoding matrix is "
            "rank deficient"
        )
    return spectrum


def theoretical_mse_expectation(enc: EncodingMatrix, rho: float) -> float:
    """Expected decoded-sum MSE at normalized SNR rho.

    Equals (1 / (l * rho)) * sum_l 1/lambda_l over the Gram spectrum; the
    minimum over trace-l matrices is 1/rho, attained exactly by orthonormal
    columns.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    spectrum = _full_rank_spectrum(enc)
    return float(np.sum(1.0 / spectrum) / (enc.l * rho))


def effective_noise_covariance(enc: EncodingMatrix, rho: float) -> np.ndarray:
    """Covariance of the residual noise in the decoded sum: (phi^H phi)^-1 / rho."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    _full_rank_spectrum(enc)
    inv = np.linalg.inv(enc.gram) / rho
    return (inv + inv.conj().T) / 2.0


# ---------------------------------------------------------------------------
# Matrix file format: {"rows": int, "cols": int, "re": [...], "im": [...]}
# with row-major entry order.
# ---------------------------------------------------------------------------


def matrix_to_json(phi: np.ndarray) -> dict:
    phi = np.asarray(phi, dtype=np.complex128)
    return {
        "rows": int(phi.shape[0]),
        "cols": int(phi.shape[1]),
        "re": [float(v) for v in phi.real.ravel()],
        "im": [float(v) for v in phi.imag.ravel()],
    }


def save_matrix(enc: EncodingMatrix, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(matrix_to_json(enc.phi), fh)
        fh.write("\n")


def load_matrix(path) -> EncodingMatrix:
    """Read a matrix file and wrap it as a Custom encoding matrix.

    The file is validated structurally here; run ``validate`` afterwards to
    check the power/rank conditions (custom matrices are accepted even when
    they violate them, with the report carrying the findings).
    """
    with open(path, "r", encoding="utf-8") as fh:
        blob = json.load(fh)
    try:
        rows, cols = int(blob["rows"]), int(blob["cols"])
        re, im = blob["re"], blob["im"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed matrix file {path}: {exc}") from exc
    if len(re) != rows * cols or len(im) != rows * cols:
        raise ValueError(
            f"matrix file {path} carries {len(re)}/{len(im)} entries, "
            f"expected {rows * cols}"
        )
    phi = np.asarray(re, dtype=float).reshape(rows, cols) + 1j * np.asarray(
        im, dtype=float
    ).reshape(rows, cols)
    return from_array(phi, Construction.CUSTOM)
