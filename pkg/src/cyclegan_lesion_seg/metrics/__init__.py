"""Overlap metrics, region diagnosis and cohort reporting."""

from .cohort import (
    OVERLAP_COLUMNS,
    REGION_COLUMNS,
    CohortReport,
    evaluate_cohort,
    evaluate_regions,
    write_cohort_report,
)
from .overlap import bool_pair, dsc, overlap_counts, overlap_report, psc, sen
from .regions import (
    aggregate_diagnoses,
    diagnosis_from_presence,
    divide_regions,
    region_diagnosis,
    region_presence,
)

__all__ = [
    "CohortReport",
    "OVERLAP_COLUMNS",
    "REGION_COLUMNS",
    "aggregate_diagnoses",
    "bool_pair",
    "diagnosis_from_presence",
    "divide_regions",
    "dsc",
    "evaluate_cohort",
    "evaluate_regions",
    "overlap_counts",
    "overlap_report",
    "psc",
    "region_diagnosis",
    "region_presence",
    "sen",
    "write_cohort_report",
]
