//! Image metrics, view-recall consistency and dynamic-suppression scores.

mod metrics;
mod recall;
mod suppression;

pub use metrics::{gaussian_taps, luma, psnr, psnr_from_mse, ssim, ssim_map, ssim_masked, PSNR_CAP, SSIM_SIGMA, SSIM_WINDOW};
pub use recall::{samples_from_run, view_recall_eval, Aggregate, PairScore, RecallReport, RecallSample};
pub use suppression::{suppression_metrics, SuppressionReport};
