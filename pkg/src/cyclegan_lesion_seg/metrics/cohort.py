"""Cohort tables: per-case overlap and region metrics with mean and SD summaries."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..shared.schemas import MetricsConfig, RegionDiagnosis
from .overlap import MaskLike, bool_pair, overlap_report
from .regions import aggregate_diagnoses, region_diagnosis

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

OVERLAP_COLUMNS = ["DSC(%)", "PSC(%)", "SEN(%)"]
REGION_COLUMNS = ["ACC", "PSC", "SEN"]


@dataclass
class CohortReport:
    """Per-case rows plus a mean/sd summary over the metric columns."""
    cases: pd.DataFrame
    summary: pd.DataFrame
    metric_columns: List[str]

    def formatted(self) -> Dict[str, str]:
        """Metric -> 'mean±sd' with one decimal."""
        return {
            col: f"{self.summary.loc['mean', col]:.1f}±{self.summary.loc['sd', col]:.1f}"
            for col in self.metric_columns
        }

    def table(self) -> pd.DataFrame:
        """Case rows followed by the mean and sd rows."""
        summary = self.summary.reset_index().rename(columns={"index": "case_id"})
        return pd.concat([self.cases, summary], ignore_index=True)


def _summarize(cases: pd.DataFrame, columns: List[str]) -> pd.DataFrame:
    # population SD (divisor n)
    return pd.DataFrame(
        {"mean": cases[columns].mean(), "sd": cases[columns].std(ddof=0)}
    ).T


def _case_ids(n: int, case_ids: Optional[Sequence[str]]) -> List[str]:
    if case_ids is None:
        return [f"case_{i:03d}" for i in range(n)]
    if len(case_ids) != n:
        raise ValueError(f"{len(case_ids)} case ids for {n} cases")
    return list(case_ids)


def _within_lung(pred: MaskLike, gt: MaskLike, lung: MaskLike) -> Tuple[np.ndarray, np.ndarray]:
    p, g = bool_pair(pred, gt)
    _, lung_arr = bool_pair(pred, lung)
    return p & lung_arr, g & lung_arr


def evaluate_cohort(
    cases: Sequence[Union[Tuple[MaskLike, MaskLike], Tuple[MaskLike, MaskLike, MaskLike]]],
    case_ids: Optional[Sequence[str]] = None,
) -> CohortReport:
    """DSC/PSC/SEN per (pred, gt) or (pred, gt, lung) case and their mean and population SD.

    With a lung mask both pred and gt are restricted to it before counting.
    """
    if not cases:
        raise ValueError("evaluate_cohort needs at least one case")
    ids = _case_ids(len(cases), case_ids)
    rows = []
    for case_id, case in zip(ids, cases):
        if len(case) == 3:
            pred, gt = _within_lung(*case)
        elif len(case) == 2:
            pred, gt = case
        else:
            raise ValueError(f"case {case_id} must be (pred, gt) or (pred, gt, lung), got {len(case)} items")
        report = overlap_report(pred, gt)
        rows.append({
            "case_id": case_id,
            "DSC(%)": report.dsc,
            "PSC(%)": report.psc,
            "SEN(%)": report.sen,
            "n_pred": report.n_pred,
            "n_gt": report.n_gt,
            "n_overlap": report.n_overlap,
            "flags": "; ".join(report.flags),
        })
    df = pd.DataFrame(rows)
    report = CohortReport(cases=df, summary=_summarize(df, OVERLAP_COLUMNS), metric_columns=OVERLAP_COLUMNS)
    logger.info(f"Cohort of {len(df)} cases: {report.formatted()}")
    return report


def evaluate_regions(
    cases: Sequence[Tuple[MaskLike, MaskLike, MaskLike]],
    cfg: Optional[MetricsConfig] = None,
    case_ids: Optional[Sequence[str]] = None,
) -> Tuple[CohortReport, RegionDiagnosis]:
    """Region diagnosis per (pred, gt, lung) case plus the pooled cohort totals.

    Ratios appear both as fractions and as percentages.
    """
    if not cases:
        raise ValueError("evaluate_regions needs at least one case")
    ids = _case_ids(len(cases), case_ids)
    diagnoses = [region_diagnosis(pred, gt, lung, cfg) for pred, gt, lung in cases]
    rows = [_region_row(case_id, d) for case_id, d in zip(ids, diagnoses)]
    df = pd.DataFrame(rows)
    total = aggregate_diagnoses(diagnoses)
    report = CohortReport(cases=df, summary=_summarize(df, REGION_COLUMNS), metric_columns=REGION_COLUMNS)
    logger.info(
        f"Region diagnosis over {len(df)} cases: ACC={total.accuracy:.2f} "
        f"PSC={total.precision:.2f} SEN={total.sensitivity:.2f}"
    )
    return report, total


def _region_row(case_id: str, d: RegionDiagnosis) -> Dict[str, object]:
    return {
        "case_id": case_id,
        "ACC": d.accuracy,
        "PSC": d.precision,
        "SEN": d.sensitivity,
        "ACC(%)": d.accuracy_pct,
        "PSC(%)": d.precision_pct,
        "SEN(%)": d.sensitivity_pct,
        "TP": d.tp,
        "FP": d.fp,
        "FN": d.fn,
        "TN": d.tn,
        "flags": "; ".join(d.flags),
    }


def _jsonable(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return value


def write_cohort_report(
    report: CohortReport,
    directory: PathLike,
    stem: str = "metrics",
    totals: Optional[RegionDiagnosis] = None,
) -> Tuple[Path, Path]:
    """``stem``.csv (cases + mean/sd rows) and ``stem``.json (cases, summary, formatted)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / f"{stem}.csv"
    report.table().to_csv(csv_path, index=False, float_format="%.6f")

    data = {
        "cases": [
            {k: _jsonable(v) for k, v in row.items()} for row in report.cases.to_dict(orient="records")
        ],
        "summary": {
            col: {"mean": float(report.summary.loc["mean", col]), "sd": float(report.summary.loc["sd", col])}
            for col in report.metric_columns
        },
        "formatted": report.formatted(),
    }
    if totals is not None:
        data["totals"] = totals.model_dump(exclude={"predicted", "truth"})
    json_path = directory / f"{stem}.json"
    with open(json_path, 'w', encoding='utf-8') as f:
        json.dump(data, f, indent=2, default=str)
    logger.debug(f"Wrote {csv_path} and {json_path}")
    return csv_path, json_path
