"""Nonstationary seasonal dynamic factor models for monthly panels."""

__version__ = "0.1.0"

from .dfm import DfmFit, FactorSpec, SeasonalDFM, fit, refit_residual_diagnostic
from .impute import SeasonalImputer, impute_panel
from .panel import Panel, PanelStandardizer, TimeIndex, destandardize, load_csv, standardize, write_csv
from .sarima import SARIMA, SarimaSpec, fit_sarima, ljung_box, monthly_pattern, simulate_sarima
from .sgcv import eigen_sequence, eigen_symmetric, sgcv, symmetrize
from .simulate import SimScenario, gen_scenario, principal_angle

__all__ = [
    "DfmFit", "FactorSpec", "SeasonalDFM", "fit", "refit_residual_diagnostic",
    "SeasonalImputer", "impute_panel",
    "Panel", "PanelStandardizer", "TimeIndex", "destandardize", "load_csv", "standardize", "write_csv",
    "SARIMA", "SarimaSpec", "fit_sarima", "ljung_box", "monthly_pattern", "simulate_sarima",
    "eigen_sequence", "eigen_symmetric", "sgcv", "symmetrize",
    "SimScenario", "gen_scenario", "principal_angle",
]
