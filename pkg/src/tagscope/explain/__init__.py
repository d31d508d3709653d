from .ablation import SUBSETS, AblationReport, ablation
from .importance import ImportanceReport, permutation_importance, weight_importance
from .shap import ShapExplanation, booster_base_value, shap_matrix, shap_summary, shap_values

__all__ = [
    "SUBSETS",
    "AblationReport",
    "ImportanceReport",
    "ShapExplanation",
    "ablation",
    "booster_base_value",
    "permutation_importance",
    "shap_matrix",
    "shap_summary",
    "shap_values",
    "weight_importance",
]
