"""Phase averaging and single-frequency harmonic projection.

Phase averaging at an integer period P (in samples) averages the record at
the stride P:  (1/Q) * sum_{k=0}^{Q-1} y_{kP}.  For a mean-free record this
estimates the real sum of the conjugate mode pair oscillating with period
P*dt, evaluated at the phase of sample 0.  Components whose period also
divides P (harmonics P/m) survive the average as well; they are not
filtered out here.

The harmonic amplitude is the single-frequency Fourier coefficient over
whole cycles and supplies the complex mode needed for RMS gradient
estimates.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BiasWarning, PeriodError
from .spectral import MEAN_FREE_RTOL
from .timeseries import SnapshotMatrix


@dataclass(frozen=True)
class PhaseAverageResult:
    """Stride average plus the matching harmonic coefficient.

    ``sum_real`` is the real M-vector estimate of the conjugate mode-pair
    sum at phase 0; ``harmonic`` is the complex single-frequency coefficient
    (for a pure tone over whole cycles, sum_real ~ 2 Re(harmonic) up to
    leakage).
    """

    period_samples: int
    cycles_used: int
    sum_real: np.ndarray
    harmonic: np.ndarray
    dt: float
    channel_ids: tuple[str, ...]
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        for name in ("sum_real", "harmonic"):
            arr = np.asarray(getattr(self, name))
            object.__setattr__(self, name, arr)
            arr.setflags(write=False)
        if self.cycles_used < 2:
            raise PeriodError(
                f"phase average needs at least 2 cycles, got {self.cycles_used}"
            )
        if not np.all(np.isfinite(self.sum_real)):
            raise PeriodError("phase average produced non-finite values")


def _check_mean_free(s: SnapshotMatrix) -> tuple[str, ...]:
    means = np.abs(s.values.mean(axis=1))
    rms = np.sqrt((s.values**2).mean(axis=1))
    bad = means > MEAN_FREE_RTOL * np.maximum(rms, 1.0)
    if np.any(bad):
        worst = int(np.argmax(means / np.maximum(rms, 1.0)))
        msg = (
            f"input does not look mean-removed (channel "
            f"{s.channel_ids[worst]!r} has |mean| = {means[worst]:.3g}); "
            "the average will absorb the bias"
        )
        warnings.warn(msg, BiasWarning, stacklevel=3)
        return (msg,)
    return ()


def phase_average(s: SnapshotMatrix, period_samples: int) -> PhaseAverageResult:
    """Average the record at stride ``period_samples``.

    The caller is responsible for removing the per-channel mean first; a
    BiasWarning is attached (and emitted) when the input still carries one.

    Raises PeriodError unless 2 <= period_samples <= (N-1)//2.
    """
    P = int(period_samples)
    N = s.n_snapshots
    if P != period_samples or P < 2 or P > (N - 1) // 2:
        raise PeriodError(
            f"period_samples must be an integer in [2, {(N - 1) // 2}], got {period_samples}"
        )
    notes = _check_mean_free(s)
    Q = (N - 1) // P + 1
    sum_real = s.values[:, :: P][:, :Q].mean(axis=1)
    harmonic = harmonic_amplitude(s, P, _warn_bias=False)
    return PhaseAverageResult(
        period_samples=P,
        cycles_used=Q,
        sum_real=sum_real,
        harmonic=harmonic,
        dt=s.dt,
        channel_ids=s.channel_ids,
        warnings=notes,
    )


def harmonic_amplitude(
    s: SnapshotMatrix, period_samples: int, _warn_bias: bool = True
) -> np.ndarray:
    """Single-frequency Fourier coefficient over whole cycles.

    A := (1/L) * sum_{k=0}^{L-1} y_k exp(-i 2 pi k / P) with L = P * floor(N/P),
    so that a pure tone y_k = 2 Re[A0 exp(i 2 pi k / P)] gives back A0 exactly.

    Raises PeriodError when fewer than two whole cycles fit the record.
    """
    P = int(period_samples)
    if P != period_samples or P < 2:
        raise PeriodError(f"period_samples must be an integer >= 2, got {period_samples}")
    N = s.n_snapshots
    L = P * (N // P)
    if L < 2 * P:
        raise PeriodError(
            f"need at least 2 whole cycles ({2 * P} samples), record has {N}"
        )
    if _warn_bias:
        _check_mean_free(s)
    k = np.arange(L)
    phases = np.exp(-2j * np.pi * k / P)
    return (s.values[:, :L] @ phases) / L


# -- serialization ------------------------------------------------------------

def result_to_csv(res: PhaseAverageResult) -> str:
    lines = ["channel_id,sum_real,harmonic_re,harmonic_im"]
    for cid, v, h in zip(res.channel_ids, res.sum_real, res.harmonic):
        lines.append(f"{cid},{float(v)!r},{float(h.real)!r},{float(h.imag)!r}")
    return "\n".join(lines) + "\n"


def result_to_json(res: PhaseAverageResult) -> str:
    payload = {
        "period_samples": res.period_samples,
        "cycles_used": res.cycles_used,
        "dt_seconds": res.dt,
        "warnings": list(res.warnings),
        "channels": [
            {
                "channel_id": cid,
                "sum_real": float(v),
                "harmonic": {"re": h.real, "im": h.imag},
            }
            for cid, v, h in zip(res.channel_ids, res.sum_real, res.harmonic)
        ],
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"
