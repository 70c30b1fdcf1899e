"""Exception types shared across the pipeline."""


class PanelsurvError(Exception):
    """Base class for all panelsurv errors."""


class IngestError(PanelsurvError):
    """Malformed input data: schema mismatch, duplicate keys, reject overflow."""


class EstimationError(PanelsurvError):
    """An estimator was handed input it cannot produce a result from."""


class EmptyCohortError(EstimationError):
    """A cohort selection matched no spells."""
