"""AUROC family, analyses, the results store and report emission."""
from .analysis import (
    GAP, Discrepancy, NegativeTransfer, discrepancy_table, fewshot_curves, negative_transfer_matrix,
    regime_values, sex_discrepancy,
)
from .reports import discrepancy_csv, fewshot_figures, fewshot_svg, negative_transfer_csv, table2
from .scores import AurocResult, MacroResult, TTestResult, auroc, auroc_macro, r_squared, regression_analog, t_test
from .store import ResultStore

__all__ = [
    "AurocResult", "Discrepancy", "GAP", "MacroResult", "NegativeTransfer", "ResultStore",
    "TTestResult", "auroc", "auroc_macro", "discrepancy_csv", "discrepancy_table", "fewshot_curves",
    "fewshot_figures", "fewshot_svg", "negative_transfer_csv", "negative_transfer_matrix",
    "r_squared", "regime_values", "regression_analog", "sex_discrepancy", "t_test", "table2",
]
