//! Evaluation metrics: coefficient-of-determination fit, normalized
//! computation time, and one-sided spectra of joint trajectories.

use crate::sim::{Channel, Trajectory};
use rustfft::{num_complex::Complex, FftPlanner};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("series must have equal lengths >= 2 (got {0} and {1})")]
    BadLengths(usize, usize),
    #[error("reference series is constant; fit is undefined")]
    ConstantReference,
    #[error("trajectory is not uniformly sampled (spread {spread:e} s at sample {index})")]
    NonUniformSampling { index: usize, spread: f64 },
    #[error("trajectory too short for a spectrum")]
    TooShort,
}

/// Goodness of fit in percent:
/// `100 (1 - Σ(est - ref)² / Σ(ref - mean(ref))²)`.
///
/// 100 is a perfect fit, 0 matches predicting the mean, and negative values
/// are worse than that.
pub fn goodness_of_fit(reference: &[f64], estimate: &[f64]) -> Result<f64, MetricsError> {
    if reference.len() != estimate.len() || reference.len() < 2 {
        return Err(MetricsError::BadLengths(reference.len(), estimate.len()));
    }
    let mean = reference.iter().sum::<f64>() / reference.len() as f64;
    let denom: f64 = reference.iter().map(|r| (r - mean) * (r - mean)).sum();
    if denom == 0.0 {
        return Err(MetricsError::ConstantReference);
    }
    let num: f64 = reference
        .iter()
        .zip(estimate)
        .map(|(r, e)| (e - r) * (e - r))
        .sum();
    Ok(100.0 * (1.0 - num / denom))
}

/// Wall time normalized by the data it processed:
/// `comp_time / (experiment_time × fs)`.
pub fn normalized_time(comp_time: f64, experiment_time: f64, fs: f64) -> f64 {
    comp_time / (experiment_time * fs)
}

/// Per-joint fits plus the timing metrics of the producing run.
#[derive(Debug, Clone, Copy)]
pub struct FitReport {
    pub r2_theta0: f64,
    pub r2_theta1: f64,
    pub computation_time: f64,
    pub normalized_time: f64,
}

/// One-sided spectrum of a single channel, DC through Nyquist.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    pub magnitude: Vec<f64>,
    pub phase: Vec<f64>,
}

/// Raw full-record DFT of one trajectory channel, no windowing or padding.
///
/// Magnitudes are unnormalized DFT amplitudes; phases are `atan2(im, re)`.
pub fn spectrum(traj: &Trajectory, channel: Channel) -> Result<Spectrum, MetricsError> {
    let n = traj.len();
    if n < 2 {
        return Err(MetricsError::TooShort);
    }
    let dt = traj.times[1] - traj.times[0];
    for (i, w) in traj.times.windows(2).enumerate() {
        let spread = (w[1] - w[0] - dt).abs();
        if spread > 1e-9 * dt.max(1.0) {
            return Err(MetricsError::NonUniformSampling {
                index: i + 1,
                spread,
            });
        }
    }
    let mut buf: Vec<Complex<f64>> = traj
        .channel(channel)
        .into_iter()
        .map(|x| Complex::new(x, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let n_out = n / 2 + 1;
    let df = 1.0 / (n as f64 * dt);
    let mut out = Spectrum {
        frequencies: Vec::with_capacity(n_out),
        magnitude: Vec::with_capacity(n_out),
        phase: Vec::with_capacity(n_out),
    };
    for (k, c) in buf.iter().take(n_out).enumerate() {
        out.frequencies.push(k as f64 * df);
        out.magnitude.push(c.norm());
        out.phase.push(c.im.atan2(c.re));
    }
    Ok(out)
}

/// Serialize both position-channel spectra as
/// `f,mag_theta0,phase_theta0,mag_theta1,phase_theta1`.
pub fn spectrum_csv_string(traj: &Trajectory) -> Result<String, MetricsError> {
    let s0 = spectrum(traj, Channel::Theta0)?;
    let s1 = spectrum(traj, Channel::Theta1)?;
    let mut out = String::with_capacity(s0.frequencies.len() * 100 + 120);
    out.push_str("# f in Hz, magnitudes unnormalized, phases in rad\n");
    out.push_str("f,mag_theta0,phase_theta0,mag_theta1,phase_theta1\n");
    for i in 0..s0.frequencies.len() {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            s0.frequencies[i], s0.magnitude[i], s0.phase[i], s1.magnitude[i], s1.phase[i]
        );
    }
    Ok(out)
}

pub fn write_spectrum_csv(traj: &Trajectory, path: &Path) -> Result<(), crate::sim::SimError> {
    let text = spectrum_csv_string(traj).map_err(|e| crate::sim::SimError::Parse {
        line: 0,
        message: e.to_string(),
    })?;
    std::fs::write(path, text).map_err(|source| crate::sim::SimError::Io {
        path: path.display().to_string(),
        source,
    })
}
