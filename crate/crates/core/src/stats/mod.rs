//! Hypothesis tests with automatic selection, agreement coefficients, ROC
//! comparison and the feature robustness harness.

mod agreement;
mod auto;
mod descriptive;
mod hypothesis;
mod normality;
mod robustness;
mod roc;

pub use agreement::{anova_mean_squares, ccc, icc, occc, AnovaMeanSquares, IccForm, RaterMatrix};
pub use auto::{
    ttest_with_auto_checks, variance_test_auto, AutoTestOptions, TestReport, BROWN_FORSYTHE, F_TEST, LEVENE,
    MANN_WHITNEY, PAIRED_T_TEST, TRIMMED_BROWN_FORSYTHE, T_TEST, WELCH_T_TEST, WILCOXON,
};
pub use descriptive::{excess_kurtosis, mean, median, rankdata, skewness, tie_term, trim_both, variance};
pub use hypothesis::{
    f_test, kolmogorov_sf, ks_compare, levene_test, mann_whitney_u, paired_t_test, student_t_test, welch_t_test,
    wilcoxon_signed_rank, Alternative, LeveneCenter, TestResult,
};
pub use normality::{normality_test, NormalityResult, MIN_NORMALITY_N};
pub use robustness::{
    eval_feature_robustness, write_robustness_csv, RobustnessMode, RobustnessOptions, RobustnessRow, RobustnessTable,
};
pub use roc::{auc, auc_confidence_interval, delong_test, DelongResult, RocData};
