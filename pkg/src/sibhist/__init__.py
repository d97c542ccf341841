"""Adult death-rate estimation from sibling-history surveys."""

from .data import (Cell, FrameDefinition, Respondent, SiblingReport, SurveyDataset,
                   is_frame_member, load_dataset, make_cells, write_dataset)
from .errors import SibhistError
from .estimators import (Estimator, HeuristicMode, estimate, estimate_aggregate,
                         estimate_individual, heuristic_agg_adjustment)
from .tally import ExposureMode, Tally, TallyTable, tally

__version__ = "0.1.0"

__all__ = [
    "Cell", "FrameDefinition", "Respondent", "SiblingReport", "SurveyDataset",
    "is_frame_member", "load_dataset", "make_cells", "write_dataset", "SibhistError",
    "Estimator", "HeuristicMode", "estimate", "estimate_aggregate", "estimate_individual",
    "heuristic_agg_adjustment", "ExposureMode", "Tally", "TallyTable", "tally",
]
