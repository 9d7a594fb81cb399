"""Global metrics, cold-start subsetting, the rescue/misguidance protocol,
and deterministic case selection.

Everything here is a pure function over aligned dollar-space predictions.
The error threshold tau comes from train+val residuals only; the residual
pool records the fingerprints of the splits it was built from so tests can
prove no test-season residual ever entered the computation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Key
from .errors import EvaluationError

RESCUE = "Rescue"
NEUTRAL = "Neutral"
MISGUIDANCE = "Misguidance"

TRI_STATE_THRESHOLD = 500_000.0


# ---------------------------------------------------------------------------
# global metrics
# ---------------------------------------------------------------------------


def _aligned(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    yt = np.asarray(y_true, dtype=np.float64)
    yp = np.asarray(y_pred, dtype=np.float64)
    if yt.shape != yp.shape or yt.ndim != 1:
        raise EvaluationError(f"length mismatch: {yt.shape} vs {yp.shape}")
    if yt.size == 0:
        raise EvaluationError("empty inputs")
    return yt, yp


def rmse(y_true, y_pred) -> float:
    yt, yp = _aligned(y_true, y_pred)
    return float(np.sqrt(np.mean((yt - yp) ** 2)))


def r2(y_true, y_pred) -> float:
    """1 - SSE/SST about the true mean; negative values are meaningful and
    never clamped. Constant truth leaves SST = 0 and the score undefined."""
    yt, yp = _aligned(y_true, y_pred)
    sst = float(((yt - yt.mean()) ** 2).sum())
    if sst == 0.0:
        raise EvaluationError("r2 undefined: zero-variance truth")
    sse = float(((yt - yp) ** 2).sum())
    return 1.0 - sse / sst


def cold_start_subset(test_keys, train_keys) -> set:
    """Test instances whose player appears in no training-season record.
    Players seen only in validation count as cold-start."""
    trained_players = {k[0] for k in train_keys}
    return {k for k in test_keys if k[0] not in trained_players}


# ---------------------------------------------------------------------------
# threshold
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResidualPool:
    """Absolute baseline residuals in dollars with provenance: which splits
    produced them, by name and dataset fingerprint."""

    abs_residuals: np.ndarray
    split_names: tuple[str, ...]
    split_fingerprints: tuple[str, ...]

    @staticmethod
    def from_predictions(y_true_dollars, y_pred_dollars, split_names, split_fingerprints) -> "ResidualPool":
        yt, yp = _aligned(y_true_dollars, y_pred_dollars)
        return ResidualPool(
            abs_residuals=np.abs(yt - yp),
            split_names=tuple(split_names),
            split_fingerprints=tuple(split_fingerprints),
        )

    def merged_with(self, other: "ResidualPool") -> "ResidualPool":
        return ResidualPool(
            abs_residuals=np.concatenate([self.abs_residuals, other.abs_residuals]),
            split_names=self.split_names + other.split_names,
            split_fingerprints=self.split_fingerprints + other.split_fingerprints,
        )


def compute_tau(pool: ResidualPool, q: float = 0.75) -> float:
    """Linear-interpolation percentile of the absolute residual pool."""
    if pool.abs_residuals.size == 0:
        raise EvaluationError("cannot compute an error threshold from an empty residual pool")
    return float(np.percentile(pool.abs_residuals, q * 100.0, method="linear"))


# ---------------------------------------------------------------------------
# tri-state protocol
# ---------------------------------------------------------------------------


def delta_e(y: float, y_base: float, y_graph: float) -> float:
    """Correction margin |Y - base| - |Y - graph|; positive = graph closer."""
    if not (np.isfinite(y) and np.isfinite(y_base) and np.isfinite(y_graph)):
        raise EvaluationError("delta_e requires finite dollar values")
    return abs(y - y_base) - abs(y - y_graph)


def tri_state(de: float, threshold: float = TRI_STATE_THRESHOLD) -> str:
    """Strict inequalities at +-threshold; the closed interval is Neutral."""
    if de > threshold:
        return RESCUE
    if de < -threshold:
        return MISGUIDANCE
    return NEUTRAL


def quadrant(y: float, y_base: float, y_graph: float) -> tuple[str, str]:
    """(Underrated|Overrated, Precision|Overshoot).

    Underrated iff the baseline sits below the truth. The correction is
    Precision while the graph prediction stays on the baseline's side of the
    truth (or lands exactly on it); crossing the truth is Overshoot.
    """
    if y_base == y:
        raise EvaluationError("quadrant undefined when the baseline equals the truth")
    first = "Underrated" if y_base < y else "Overrated"
    g = y_graph - y
    b = y_base - y
    second = "Precision" if g == 0 or (g > 0) == (b > 0) else "Overshoot"
    return first, second


@dataclass(frozen=True)
class LedgerEntry:
    key: Key
    y: float
    y_base: float
    y_graph: float
    delta_e: float
    state: str
    quadrant: tuple[str, str]


@dataclass
class TriStateReport:
    baseline: str
    graph_model: str
    tau: float
    eligible_count: int
    rescue_count: int
    neutral_count: int
    misguidance_count: int
    ledger: list[LedgerEntry] = field(default_factory=list)
    flagged: bool = False

    @property
    def rescue_rate(self) -> float:
        return self.rescue_count / self.eligible_count if self.eligible_count else float("nan")

    @property
    def neutral_rate(self) -> float:
        return self.neutral_count / self.eligible_count if self.eligible_count else float("nan")

    @property
    def misguidance_rate(self) -> float:
        return self.misguidance_count / self.eligible_count if self.eligible_count else float("nan")


def tri_state_report(
    y_true: dict,
    base_pred: dict,
    graph_pred: dict,
    tau: float,
    baseline: str = "",
    graph_model: str = "",
    threshold: float = TRI_STATE_THRESHOLD,
) -> TriStateReport:
    """Classify every eligible outlier (strict |Y - base| > tau) by whether
    the graph model moved its valuation toward or away from the truth."""
    if tau <= 0:
        raise EvaluationError(f"error threshold must be positive, got {tau}")
    if set(y_true) != set(base_pred) or set(y_true) != set(graph_pred):
        raise EvaluationError("prediction sets must cover identical keys")
    counts = {RESCUE: 0, NEUTRAL: 0, MISGUIDANCE: 0}
    ledger: list[LedgerEntry] = []
    for key in sorted(y_true):
        # plain floats keep ledger reprs stable no matter what array type
        # the predictions arrived in
        y = float(y_true[key])
        b = float(base_pred[key])
        if abs(y - b) <= tau:
            continue
        g = float(graph_pred[key])
        de = delta_e(y, b, g)
        state = tri_state(de, threshold)
        counts[state] += 1
        ledger.append(LedgerEntry(key, y, b, g, de, state, quadrant(y, b, g)))
    eligible = len(ledger)
    return TriStateReport(
        baseline=baseline,
        graph_model=graph_model,
        tau=tau,
        eligible_count=eligible,
        rescue_count=counts[RESCUE],
        neutral_count=counts[NEUTRAL],
        misguidance_count=counts[MISGUIDANCE],
        ledger=ledger,
        flagged=eligible == 0,
    )


# ---------------------------------------------------------------------------
# case selection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CaseStudy:
    key: Key
    quadrant: tuple[str, str]
    y: float
    y_base: float
    y_graph: float
    delta_e: float
    state: str


def select_cases(report: TriStateReport, min_per_model: int = 3) -> list[CaseStudy]:
    """One maximal-|dE| case per populated quadrant, drawn strictly from
    rescues and misguidances, topped up to min_per_model by descending |dE|.
    Ties resolve to the ascending instance key. Empty pool -> empty list."""
    pool = [e for e in report.ledger if e.state in (RESCUE, MISGUIDANCE)]
    if not pool:
        return []
    by_quadrant: dict[tuple[str, str], LedgerEntry] = {}
    for entry in sorted(pool, key=lambda e: (-abs(e.delta_e), e.key)):
        by_quadrant.setdefault(entry.quadrant, entry)
    chosen = sorted(by_quadrant.values(), key=lambda e: (-abs(e.delta_e), e.key))
    if len(chosen) < min_per_model:
        taken = {e.key for e in chosen}
        rest = [e for e in pool if e.key not in taken]
        rest.sort(key=lambda e: (-abs(e.delta_e), e.key))
        chosen.extend(rest[: min_per_model - len(chosen)])
    return [
        CaseStudy(e.key, e.quadrant, e.y, e.y_base, e.y_graph, e.delta_e, e.state)
        for e in chosen
    ]


# ---------------------------------------------------------------------------
# flat exports
# ---------------------------------------------------------------------------


def _meta_line(meta: dict | None) -> str:
    """Optional leading comment carrying artifact provenance; readers skip
    lines starting with '#'."""
    if not meta:
        return ""
    return "# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n"


def write_tri_state_csv(reports: list[TriStateReport], path: str | Path, meta: dict | None = None) -> None:
    """One row per (graph model, baseline) pairing."""
    with open(path, "w") as fh:
        fh.write(_meta_line(meta))
        fh.write(
            "model,baseline,tau_dollars,eligible,rescues,neutrals,misguidances,"
            "rescue_rate,neutral_rate,misguidance_rate,flagged\n"
        )
        for r in reports:
            fh.write(
                f"{r.graph_model},{r.baseline},{r.tau!r},{r.eligible_count},"
                f"{r.rescue_count},{r.neutral_count},{r.misguidance_count},"
                f"{r.rescue_rate!r},{r.neutral_rate!r},{r.misguidance_rate!r},{int(r.flagged)}\n"
            )


def write_cases_csv(cases: list[tuple[str, str, CaseStudy]], path: str | Path, meta: dict | None = None) -> None:
    """Rows of (graph model, baseline, case)."""
    with open(path, "w") as fh:
        fh.write(_meta_line(meta))
        fh.write("model,baseline,player_id,season,state,quadrant,y_dollars,y_base_dollars,y_graph_dollars,delta_e_dollars\n")
        for model, baseline, c in cases:
            quad = f"{c.quadrant[0]}-{c.quadrant[1]}"
            fh.write(
                f"{model},{baseline},{c.key[0]},{c.key[1]},{c.state},{quad},"
                f"{c.y!r},{c.y_base!r},{c.y_graph!r},{c.delta_e!r}\n"
            )


def write_metrics_csv(rows: list[dict], path: str | Path, meta: dict | None = None) -> None:
    """Wide metric rows; every row must share the same keys."""
    if not rows:
        with open(path, "w") as fh:
            fh.write(_meta_line(meta))
            fh.write("\n")
        return
    header = list(rows[0])
    with open(path, "w") as fh:
        fh.write(_meta_line(meta))
        fh.write(",".join(header) + "\n")
        for row in rows:
            if list(row) != header:
                raise EvaluationError("metric rows must share one schema")
            fh.write(",".join(_fmt_cell(row[k]) for k in header) + "\n")


def _fmt_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)
