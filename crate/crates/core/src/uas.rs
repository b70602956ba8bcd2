//! High-gain universal adaptive observer for friction-parameter
//! identification.
//!
//! The observer runs a copy of the plant model with estimated friction
//! coefficients and is driven by a Nussbaum-modulated velocity-error input
//!
//! ```text
//! e  = q̇_meas - q̂̇            (velocity error)
//! k̇  = ‖e‖²                    (monotone gain state)
//! u  = H(q̂) · N(k) · e         (UAS input)
//! ẑ̇_n = (γ + λ_u·(upper pull) + λ_l·(z_l - ẑ_n)) · ‖e‖
//! ```
//!
//! `N` is a Nussbaum function — its running integral average swings to
//! arbitrarily large positive and negative values — so no sign assumption on
//! the effective gain is needed. The Mittag-Leffler choice
//! `N(k) = E_α(-λ k^α)` with `α ∈ (2, 3]` vibrates fastest and is the
//! default; three classical alternatives are selectable.
//!
//! Identification co-integrates the observer against recorded measurements
//! (zero-order hold between samples) and snapshots the parameter estimates
//! the first time the error norm drops below a threshold after having been
//! above it. While the error persists, estimates relax toward their lower
//! bound; the system freezes wherever the observer locks onto the data.

use crate::model::{
    self, FrictionParams, GeneralizedForces, ModelError, NormalForceModel, PhysicalParams, State,
};
use crate::sim::{rk4_step, RkError, Trajectory};
use nalgebra::{SVector, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::function::gamma::ln_gamma;
use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

/// Number of identified friction parameters (five per joint).
pub const N_PARAMS: usize = 10;

/// Argument magnitude beyond which the Mittag-Leffler series is not trusted.
pub const SERIES_ARG_LIMIT: f64 = 700.0;

/// Default relative stopping tolerance for the series.
pub const DEFAULT_SERIES_TOL: f64 = 1e-15;

/// Default term budget for the series.
pub const DEFAULT_MAX_TERMS: usize = 400;

/// Errors from the observer stack.
#[derive(Debug, thiserror::Error)]
pub enum UasError {
    #[error("invalid {what}: {why}")]
    InvalidConfig { what: &'static str, why: String },
    #[error("Mittag-Leffler series unreliable for |z| = {z_abs:e} > {limit}")]
    SeriesUnreliable { z_abs: f64, limit: f64 },
    #[error("Mittag-Leffler series failed to converge after {terms} terms (last term {last:e})")]
    SeriesDiverged { terms: usize, last: f64 },
    #[error("model failure at t = {t} s: {source}")]
    Model { t: f64, source: ModelError },
    #[error("non-finite observer state at t = {t} s")]
    NonFinite { t: f64 },
    #[error("measured trajectory unusable: {0}")]
    BadTrajectory(&'static str),
}

/// Truncated-series evaluation of the Mittag-Leffler function
/// `E_α(z) = Σ_γ z^γ / Γ(αγ + 1)`.
///
/// Terms are computed through `ln Γ` so large indices cannot overflow. The
/// sum stops once a term falls below `series_tol` relative to the running
/// sum. Arguments beyond [`SERIES_ARG_LIMIT`] are rejected rather than
/// returning a catastrophically cancelled result.
pub fn mittag_leffler(
    z: f64,
    alpha: f64,
    series_tol: f64,
    max_terms: usize,
) -> Result<f64, UasError> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(UasError::InvalidConfig {
            what: "alpha",
            why: format!("{alpha} must be positive"),
        });
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    if z.abs() > SERIES_ARG_LIMIT {
        return Err(UasError::SeriesUnreliable {
            z_abs: z.abs(),
            limit: SERIES_ARG_LIMIT,
        });
    }
    let ln_abs_z = z.abs().ln();
    let negative = z < 0.0;
    let mut sum = 0.0;
    let mut prev_mag = f64::INFINITY;
    let mut last_mag = f64::INFINITY;
    for g in 0..max_terms {
        let ln_term = g as f64 * ln_abs_z - ln_gamma(alpha * g as f64 + 1.0);
        let mut term = ln_term.exp();
        if negative && g % 2 == 1 {
            term = -term;
        }
        sum += term;
        prev_mag = last_mag;
        last_mag = term.abs();
        if g > 2 && last_mag < series_tol * sum.abs() {
            return Ok(sum);
        }
    }
    if last_mag > prev_mag {
        Err(UasError::SeriesDiverged {
            terms: max_terms,
            last: last_mag,
        })
    } else {
        Ok(sum)
    }
}

/// Which switching function modulates the gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NussbaumKind {
    /// `N(k) = E_α(-λ k^α)`; vibrates fastest of the four.
    MittagLeffler,
    /// `N(k) = k cos(√k)`.
    N2,
    /// `N(k) = k² cos(k)`.
    N3,
    /// `N(k) = cos(πk/2) e^{k²}`.
    N4,
}

/// Nussbaum function selection plus the Mittag-Leffler series controls.
///
/// `lambda` and `alpha` only shape the Mittag-Leffler variant; the closed
/// forms take the gain state directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NussbaumSpec {
    pub kind: NussbaumKind,
    pub lambda: f64,
    pub alpha: f64,
    pub series_tol: f64,
    pub max_terms: usize,
}

impl NussbaumSpec {
    /// The default used for identification: Mittag-Leffler with `λ = 1`,
    /// `α = 3`.
    pub fn mittag_leffler(lambda: f64, alpha: f64) -> Self {
        Self {
            kind: NussbaumKind::MittagLeffler,
            lambda,
            alpha,
            series_tol: DEFAULT_SERIES_TOL,
            max_terms: DEFAULT_MAX_TERMS,
        }
    }

    pub fn validate(&self) -> Result<(), UasError> {
        if !self.lambda.is_finite() || self.lambda <= 0.0 {
            return Err(UasError::InvalidConfig {
                what: "lambda",
                why: format!("{} must be positive", self.lambda),
            });
        }
        if self.kind == NussbaumKind::MittagLeffler
            && (self.alpha <= 2.0 || self.alpha > 3.0 || self.alpha.is_nan())
        {
            return Err(UasError::InvalidConfig {
                what: "alpha",
                why: format!(
                    "{} must lie in (2, 3] for the Mittag-Leffler Nussbaum function",
                    self.alpha
                ),
            });
        }
        if self.series_tol.is_nan() || self.series_tol <= 0.0 || self.max_terms == 0 {
            return Err(UasError::InvalidConfig {
                what: "series controls",
                why: "series_tol must be positive and max_terms nonzero".into(),
            });
        }
        Ok(())
    }
}

/// Evaluate the selected Nussbaum function at gain state `k ≥ 0`.
pub fn nussbaum(spec: &NussbaumSpec, k: f64) -> Result<f64, UasError> {
    match spec.kind {
        NussbaumKind::MittagLeffler => mittag_leffler(
            -spec.lambda * k.powf(spec.alpha),
            spec.alpha,
            spec.series_tol,
            spec.max_terms,
        ),
        NussbaumKind::N2 => Ok(k * k.abs().sqrt().cos()),
        NussbaumKind::N3 => Ok(k * k * k.abs().cos()),
        NussbaumKind::N4 => Ok((std::f64::consts::FRAC_PI_2 * k).cos() * (k * k).exp()),
    }
}

/// How the two bound terms act on an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdaptationLaw {
    /// Both pulls always active:
    /// `ẑ̇ = (γ + λ_u(z_u - ẑ) + λ_l(z_l - ẑ))‖e‖`. The estimate relaxes to
    /// the fixed point `(γ + λ_u z_u + λ_l z_l)/(λ_u + λ_l)` whenever error
    /// persists.
    Affine,
    /// The upper term engages only above `z_u` (a ceiling), so inside the
    /// corridor the estimate decays toward `z_l + γ/λ_l` at rate `λ_l‖e‖`
    /// and freezes where the observer locks onto the data. This is the law
    /// that yields working identification; it is the default.
    #[default]
    Bounded,
}

/// Per-parameter steady-state corridor, confidences, shared adaptation rate
/// and the estimate-extraction policy.
#[derive(Debug, Clone)]
pub struct AdaptationConfig {
    /// Lower steady-state bounds `z_l` (parameter units).
    pub z_lower: [f64; N_PARAMS],
    /// Upper steady-state bounds `z_u` (parameter units).
    pub z_upper: [f64; N_PARAMS],
    /// Confidence in the lower bounds (1/s).
    pub lambda_lower: [f64; N_PARAMS],
    /// Confidence in the upper bounds (1/s).
    pub lambda_upper: [f64; N_PARAMS],
    /// Shared adaptation rate offset.
    pub gamma: f64,
    /// Bound-term gating.
    pub law: AdaptationLaw,
    /// Error-norm threshold for estimate extraction (rad/s).
    pub threshold: f64,
    /// Average the estimates from the threshold crossing to the end of the
    /// record instead of taking the snapshot.
    pub averaging: bool,
}

impl AdaptationConfig {
    pub fn validate(&self) -> Result<(), UasError> {
        for n in 0..N_PARAMS {
            if self.lambda_lower[n] <= 0.0
                || self.lambda_upper[n] <= 0.0
                || self.lambda_lower[n].is_nan()
                || self.lambda_upper[n].is_nan()
            {
                return Err(UasError::InvalidConfig {
                    what: "confidences",
                    why: format!("lambda bounds for parameter {} must be positive", n + 1),
                });
            }
            if self.z_lower[n] > self.z_upper[n] {
                return Err(UasError::InvalidConfig {
                    what: "bounds",
                    why: format!("z_l > z_u for parameter {}", n + 1),
                });
            }
        }
        if self.threshold.is_nan() || self.threshold <= 0.0 {
            return Err(UasError::InvalidConfig {
                what: "threshold",
                why: "must be positive".into(),
            });
        }
        Ok(())
    }
}

/// Full observer state: estimated kinematics, gain state and the ten
/// parameter estimates `(μ_d, μ_s, μ_v, θ̇_t, F_nt)` per joint, arm first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverState {
    pub q_hat: Vector2<f64>,
    pub q_hat_dot: Vector2<f64>,
    pub k: f64,
    pub z_hat: [f64; N_PARAMS],
}

impl ObserverState {
    /// Start the observer on a measured state with gain `k0 > 0` and
    /// initial parameter guesses `z0`.
    pub fn from_measurement(s: &State, k0: f64, z0: [f64; N_PARAMS]) -> Self {
        Self {
            q_hat: Vector2::new(s.theta0, s.theta1),
            q_hat_dot: Vector2::new(s.omega0, s.omega1),
            k: k0,
            z_hat: z0,
        }
    }

    fn to_vector(self) -> SVector<f64, 15> {
        let mut v = SVector::<f64, 15>::zeros();
        v[0] = self.q_hat[0];
        v[1] = self.q_hat[1];
        v[2] = self.q_hat_dot[0];
        v[3] = self.q_hat_dot[1];
        v[4] = self.k;
        v.fixed_rows_mut::<N_PARAMS>(5).copy_from_slice(&self.z_hat);
        v
    }

    fn from_vector(v: &SVector<f64, 15>) -> Self {
        let mut z_hat = [0.0; N_PARAMS];
        z_hat.copy_from_slice(v.fixed_rows::<N_PARAMS>(5).as_slice());
        Self {
            q_hat: Vector2::new(v[0], v[1]),
            q_hat_dot: Vector2::new(v[2], v[3]),
            k: v[4],
            z_hat,
        }
    }

    /// Estimated state in plant form.
    pub fn as_state(&self) -> State {
        State::new(
            self.q_hat[0],
            self.q_hat[1],
            self.q_hat_dot[0],
            self.q_hat_dot[1],
        )
    }

    /// Friction parameters of one joint as currently estimated.
    pub fn friction(&self, joint: model::Joint) -> FrictionParams {
        let o = match joint {
            model::Joint::Arm => 0,
            model::Joint::Pendulum => 5,
        };
        FrictionParams::from_array([
            self.z_hat[o],
            self.z_hat[o + 1],
            self.z_hat[o + 2],
            self.z_hat[o + 3],
            self.z_hat[o + 4],
        ])
    }
}

/// UAS input `u = H(q̂) N(k) e`.
pub fn uas_input(
    p: &PhysicalParams,
    obs: &ObserverState,
    e: Vector2<f64>,
    spec: &NussbaumSpec,
) -> Result<GeneralizedForces, UasError> {
    let n_k = nussbaum(spec, obs.k)?;
    let u = model::eval_h(p, &obs.as_state()) * e * n_k;
    Ok(GeneralizedForces {
        tau0: u[0],
        tau1: u[1],
    })
}

/// Parameter-estimate rates under the selected law at error norm `e_norm`.
pub fn adapt_rhs(cfg: &AdaptationConfig, z_hat: &[f64; N_PARAMS], e_norm: f64) -> [f64; N_PARAMS] {
    let mut out = [0.0; N_PARAMS];
    for n in 0..N_PARAMS {
        let mut up = cfg.z_upper[n] - z_hat[n];
        if cfg.law == AdaptationLaw::Bounded && up > 0.0 {
            up = 0.0;
        }
        out[n] = (cfg.gamma
            + cfg.lambda_upper[n] * up
            + cfg.lambda_lower[n] * (cfg.z_lower[n] - z_hat[n]))
            * e_norm;
    }
    out
}

/// Stacked observer derivative against one held measurement.
///
/// Layout matches [`ObserverState`]: estimated kinematics under the model
/// with estimated friction plus the UAS input, `k̇ = ‖e‖²`, and the
/// adaptation rates.
pub fn observer_rhs<N: NormalForceModel + ?Sized>(
    p: &PhysicalParams,
    obs: &ObserverState,
    measured: &State,
    cfg: &AdaptationConfig,
    spec: &NussbaumSpec,
    normal: &N,
) -> Result<SVector<f64, 15>, UasError> {
    let e = Vector2::new(
        measured.omega0 - obs.q_hat_dot[0],
        measured.omega1 - obs.q_hat_dot[1],
    );
    let e_norm_sq = e.norm_squared();
    let u = uas_input(p, obs, e, spec)?;
    let est = obs.as_state();
    let acc = model::dynamics_rhs(
        p,
        &obs.friction(model::Joint::Arm),
        &obs.friction(model::Joint::Pendulum),
        normal,
        &est,
        u,
    )
    .map_err(|source| UasError::Model {
        t: f64::NAN,
        source,
    })?;
    let zdot = adapt_rhs(cfg, &obs.z_hat, e_norm_sq.sqrt());

    let mut out = SVector::<f64, 15>::zeros();
    out[0] = obs.q_hat_dot[0];
    out[1] = obs.q_hat_dot[1];
    out[2] = acc[2];
    out[3] = acc[3];
    out[4] = e_norm_sq;
    out.fixed_rows_mut::<N_PARAMS>(5).copy_from_slice(&zdot);
    Ok(out)
}

/// Recorded observer history, one row per measurement sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub times: Vec<f64>,
    pub z_hat: Vec<[f64; N_PARAMS]>,
    pub k: Vec<f64>,
    pub e_norm: Vec<f64>,
}

impl Trace {
    /// Serialize as `t,z1..z10,k,e_norm`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.times.len() * 220 + 64);
        out.push_str("t,z1,z2,z3,z4,z5,z6,z7,z8,z9,z10,k,e_norm\n");
        for i in 0..self.times.len() {
            let _ = write!(out, "{:.16e}", self.times[i]);
            for z in &self.z_hat[i] {
                let _ = write!(out, ",{z:.16e}");
            }
            let _ = writeln!(out, ",{:.16e},{:.16e}", self.k[i], self.e_norm[i]);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), std::io::Error> {
        std::fs::write(path, self.to_csv_string())
    }
}

/// Outcome of one identification run.
#[derive(Debug, Clone)]
pub struct IdentificationReport {
    /// Extracted parameter estimates; `None` when the error norm never
    /// settled below the threshold.
    pub estimates: Option<[f64; N_PARAMS]>,
    /// Time of extraction (s).
    pub crossing_time: Option<f64>,
    /// Smallest error norm seen over the run.
    pub min_e_norm: f64,
    /// Final gain state.
    pub final_k: f64,
    /// Full parameter/gain/error history.
    pub trace: Trace,
    /// Time spent co-integrating the observer.
    pub wall_time: Duration,
}

impl IdentificationReport {
    pub fn converged(&self) -> bool {
        self.estimates.is_some()
    }
}

/// Co-integrate the observer against a measured trajectory and extract the
/// parameter estimates.
///
/// Measurements are held constant between samples (zero-order hold) and the
/// observer advances one RK4 step per sample interval. Extraction takes the
/// estimates at the first sample where `‖e‖₂` sits below the threshold
/// after having been above it; if the error never rises above the threshold
/// at all, the initial sample is used. With `averaging` set, the estimates
/// are instead averaged from that crossing to the end of the record.
pub fn identify<N: NormalForceModel + ?Sized>(
    measured: &Trajectory,
    p: &PhysicalParams,
    cfg: &AdaptationConfig,
    spec: &NussbaumSpec,
    init: ObserverState,
    normal: &N,
) -> Result<IdentificationReport, UasError> {
    cfg.validate()?;
    spec.validate()?;
    if measured.len() < 2 {
        return Err(UasError::BadTrajectory("need at least two samples"));
    }
    let dt = measured.times[1] - measured.times[0];
    if !dt.is_finite() || dt <= 0.0 {
        return Err(UasError::BadTrajectory("times must be strictly increasing"));
    }
    if measured
        .times
        .windows(2)
        .any(|w| (w[1] - w[0] - dt).abs() > 1e-9 * dt.max(1.0))
    {
        return Err(UasError::BadTrajectory("samples must be uniformly spaced"));
    }
    let started = Instant::now();

    let n = measured.len();
    let mut trace = Trace {
        times: measured.times.clone(),
        z_hat: Vec::with_capacity(n),
        k: Vec::with_capacity(n),
        e_norm: Vec::with_capacity(n),
    };
    let mut v = init.to_vector();

    let record = |trace: &mut Trace, v: &SVector<f64, 15>, meas: &State| {
        let e0 = meas.omega0 - v[2];
        let e1 = meas.omega1 - v[3];
        trace.e_norm.push((e0 * e0 + e1 * e1).sqrt());
        trace.k.push(v[4]);
        let mut z = [0.0; N_PARAMS];
        z.copy_from_slice(v.fixed_rows::<N_PARAMS>(5).as_slice());
        trace.z_hat.push(z);
    };

    record(&mut trace, &v, &measured.states[0]);
    for i in 0..n - 1 {
        let meas = measured.states[i];
        let t = measured.times[i];
        let mut rhs = |_t: f64, sv: &SVector<f64, 15>| {
            observer_rhs(p, &ObserverState::from_vector(sv), &meas, cfg, spec, normal)
        };
        v = rk4_step(&mut rhs, t, &v, dt).map_err(|e| match e {
            RkError::Rhs(UasError::Model { source, .. }) => UasError::Model { t, source },
            RkError::Rhs(other) => other,
            RkError::NonFinite => UasError::NonFinite { t },
        })?;
        record(&mut trace, &v, &measured.states[i + 1]);
    }

    let min_e_norm = trace.e_norm.iter().copied().fold(f64::INFINITY, f64::min);
    let crossing = find_crossing(&trace.e_norm, cfg.threshold);
    let (estimates, crossing_time) = match crossing {
        Some(idx) => {
            let est = if cfg.averaging {
                let mut acc = [0.0; N_PARAMS];
                for row in &trace.z_hat[idx..] {
                    for (a, z) in acc.iter_mut().zip(row) {
                        *a += z;
                    }
                }
                let count = (n - idx) as f64;
                acc.map(|a| a / count)
            } else {
                trace.z_hat[idx]
            };
            (Some(est), Some(trace.times[idx]))
        }
        None => (None, None),
    };

    Ok(IdentificationReport {
        estimates,
        crossing_time,
        min_e_norm,
        final_k: trace.k[n - 1],
        trace,
        wall_time: started.elapsed(),
    })
}

/// Index of the extraction sample: the first dip below `threshold` after
/// the error has been above it, or sample 0 when the error never rises
/// above the threshold at all.
fn find_crossing(e_norm: &[f64], threshold: f64) -> Option<usize> {
    let mut seen_above = false;
    for (i, &e) in e_norm.iter().enumerate() {
        if e >= threshold {
            seen_above = true;
        } else if seen_above {
            return Some(i);
        }
    }
    if !seen_above {
        Some(0)
    } else {
        None
    }
}

/// Draw initial parameter guesses: per-parameter Gaussian centered on the
/// bound midpoint with standard deviation `(z_u - z_l)/6`, clamped into the
/// corridor. Deterministic per seed.
pub fn initial_guess_sample(cfg: &AdaptationConfig, seed: u64) -> [f64; N_PARAMS] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = [0.0; N_PARAMS];
    for (n, slot) in out.iter_mut().enumerate() {
        let (lo, hi) = (cfg.z_lower[n], cfg.z_upper[n]);
        if lo == hi {
            *slot = lo;
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let sd = (hi - lo) / 6.0;
        let normal = Normal::new(mid, sd).expect("valid bounds");
        *slot = normal.sample(&mut rng).clamp(lo, hi);
    }
    out
}

/// Post-hoc diagnostic: decompose the per-joint friction-torque mismatch
/// between a reference parameter set and the estimates into its four
/// structural channels (dynamic `tanh`, gated viscous, static Stribeck
/// numerator, dynamic Stribeck numerator), evaluated at one velocity pair.
///
/// Each row sums to `f_ref(ω_i) - f_est(ω_i)`, so a row of near-zeros at
/// nonzero velocity is the condition under which matched torques pin down
/// matched parameters. Not used by the identification loop itself.
pub fn mismatch_matrix(
    reference: &(FrictionParams, FrictionParams),
    z_hat: &[f64; N_PARAMS],
    omega: Vector2<f64>,
    f_n: Vector2<f64>,
) -> [[f64; 4]; 2] {
    let channels = |fp: &FrictionParams, w: f64, fn_i: f64| {
        let r = w / fp.theta_dot_t;
        let stribeck = r / (0.25 * r * r + 0.75);
        [
            fn_i * fp.mu_d * (4.0 * r).tanh(),
            fp.mu_v * w * (4.0 * fn_i / fp.f_nt).tanh(),
            fn_i * fp.mu_s * stribeck,
            fn_i * fp.mu_d * stribeck,
        ]
    };
    let mut out = [[0.0; 4]; 2];
    for (i, (fp, offset)) in [(&reference.0, 0), (&reference.1, 5)].into_iter().enumerate() {
        let est = FrictionParams::from_array([
            z_hat[offset],
            z_hat[offset + 1],
            z_hat[offset + 2],
            z_hat[offset + 3],
            z_hat[offset + 4],
        ]);
        let truth = channels(fp, omega[i], f_n[i]);
        let guess = channels(&est, omega[i], f_n[i]);
        // The Stribeck dynamic channel enters the torque negatively.
        out[i] = [
            truth[0] - guess[0],
            truth[1] - guess[1],
            truth[2] - guess[2],
            guess[3] - truth[3],
        ];
    }
    out
}
