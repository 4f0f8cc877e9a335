//! Risk-aware training for the toy policy: objective terms, gradient
//! descent, gradient verification, and the anti-chasing selector.

pub mod anti_chasing;
pub mod gradcheck;
pub mod objective;
pub mod train;

pub use anti_chasing::{anti_chasing_select, AntiChasingConfig, AntiChasingWrapper, ErrorHistory, Selection};
pub use gradcheck::finite_diff_check;
pub use objective::{
    loss_averse_loss, prob_calibration_loss, risk_regularizer, total_loss, AblationFlags, ObjectiveTerms, TrainingConfig,
};
pub use train::{train_toy_policy, TrainingOutcome};
