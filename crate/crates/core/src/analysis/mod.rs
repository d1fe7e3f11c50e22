//! Filters, GRF segmentation and summary statistics.

pub mod filters;
pub mod grf;

pub use filters::{
    gaussian_kernel, gaussian_lowpass, resultant, savgol, Series, GAUSSIAN_SIGMA_S, SAVGOL_ORDER, SAVGOL_WINDOW,
};
pub use grf::{
    prominences, quantile, segment_and_peaks, spike_height, stance_intervals, stance_peaks, summarize, CyclePeaks,
    GrfRecord, Summary, CONTACT_THRESHOLD_N, PROMINENCE_FRACTION,
};
