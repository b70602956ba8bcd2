//! Grey-box optimization baseline: fit the ten friction parameters by
//! minimizing simulation-vs-measurement error with a bounded derivative-free
//! simplex search.
//!
//! This is the conventional method the adaptive observer is compared
//! against. The objective replays the full plant simulation per candidate,
//! so evaluations are costly; the search is a classic Nelder-Mead
//! (reflect/expand/contract/shrink) with bound handling by projection.

use crate::model::{FrictionParams, NormalForceModel, PhysicalParams};
use crate::sim::{simulate, SimConfig, Trajectory};
use crate::uas::N_PARAMS;
use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

/// Simplex-search budget and geometry.
#[derive(Debug, Clone)]
pub struct OptConfig {
    /// Hard cap on objective evaluations.
    pub max_evals: usize,
    /// Initial simplex size as a fraction of each parameter's bound range.
    pub init_simplex_scale: f64,
    /// Relative objective-spread stall tolerance.
    pub tolerance: f64,
    /// Per-parameter lower bounds (shared with the adaptation corridor).
    pub z_lower: [f64; N_PARAMS],
    /// Per-parameter upper bounds.
    pub z_upper: [f64; N_PARAMS],
    /// Explicit start point; when absent the start is sampled from the seed
    /// like the observer's initial guesses.
    pub start: Option<[f64; N_PARAMS]>,
}

impl OptConfig {
    pub fn validate(&self) -> Result<(), BaselineError> {
        if self.max_evals == 0 {
            return Err(BaselineError::InvalidConfig("max_evals must be positive"));
        }
        if self.init_simplex_scale.is_nan() || self.init_simplex_scale <= 0.0 {
            return Err(BaselineError::InvalidConfig(
                "init_simplex_scale must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error("invalid optimizer config: {0}")]
    InvalidConfig(&'static str),
    #[error("measured trajectory unusable: {0}")]
    BadTrajectory(&'static str),
    #[error("simulation failed during objective evaluation: {0}")]
    Simulation(#[from] crate::sim::SimError),
}

/// Summed squared position error of a simulation started from the measured
/// initial state with friction parameters `z`, against the measurement.
pub fn objective<N: NormalForceModel + ?Sized>(
    z: &[f64; N_PARAMS],
    measured: &Trajectory,
    p: &PhysicalParams,
    normal: &N,
) -> Result<f64, BaselineError> {
    if measured.len() < 2 {
        return Err(BaselineError::BadTrajectory("need at least two samples"));
    }
    let dt = measured.times[1] - measured.times[0];
    let cfg = SimConfig {
        dt,
        duration: measured.times[measured.len() - 1] - measured.times[0],
        seed: 0,
        noise_sigma: 0.0,
        noise_enabled: false,
    };
    let fp0 = FrictionParams::from_array([z[0], z[1], z[2], z[3], z[4]]);
    let fp1 = FrictionParams::from_array([z[5], z[6], z[7], z[8], z[9]]);
    let sim = simulate(p, &fp0, &fp1, normal, measured.states[0], &cfg, None)?;
    let n = sim.len().min(measured.len());
    let mut acc = 0.0;
    for i in 0..n {
        let d0 = sim.states[i].theta0 - measured.states[i].theta0;
        let d1 = sim.states[i].theta1 - measured.states[i].theta1;
        acc += d0 * d0 + d1 * d1;
    }
    Ok(acc)
}

/// One objective evaluation as recorded in the trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub eval: usize,
    pub objective: f64,
    pub best: f64,
}

/// History of objective evaluations; `best` is non-increasing.
#[derive(Debug, Clone, Default)]
pub struct ObjectiveTrace(pub Vec<Evaluation>);

impl ObjectiveTrace {
    /// Serialize as `eval,objective,best`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.0.len() * 50 + 24);
        out.push_str("eval,objective,best\n");
        for e in &self.0 {
            let _ = writeln!(out, "{},{:.16e},{:.16e}", e.eval, e.objective, e.best);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), std::io::Error> {
        std::fs::write(path, self.to_csv_string())
    }
}

/// Result of a simplex search. Budget exhaustion is a normal outcome and
/// simply reports the best point found.
#[derive(Debug, Clone)]
pub struct OptimizationReport {
    pub best: [f64; N_PARAMS],
    pub best_objective: f64,
    pub evals: usize,
    /// True when the simplex collapsed below the stall tolerance before the
    /// budget ran out.
    pub stalled: bool,
    pub trace: ObjectiveTrace,
    pub wall_time: Duration,
}

/// Bounded Nelder-Mead search over the friction parameters.
///
/// Candidates are projected into the bound box before evaluation, so the
/// returned point never leaves it. A candidate whose simulation fails is
/// charged a penalty of 10⁶ times the start point's objective and the
/// failure is kept in the trace. Deterministic given the seed.
pub fn optimize<N: NormalForceModel + ?Sized>(
    measured: &Trajectory,
    p: &PhysicalParams,
    cfg: &OptConfig,
    seed: u64,
    normal: &N,
) -> Result<OptimizationReport, BaselineError> {
    cfg.validate()?;
    let started = Instant::now();
    let start = cfg.start.unwrap_or_else(|| sample_start(cfg, seed));

    let mut trace = ObjectiveTrace::default();
    let mut evals = 0usize;
    let mut best_seen = f64::INFINITY;
    // Penalty scale fixed by the start point; set after its evaluation.
    let mut penalty = f64::MAX;

    let project = |z: &[f64; N_PARAMS]| {
        let mut out = *z;
        for (n, v) in out.iter_mut().enumerate() {
            *v = v.clamp(cfg.z_lower[n], cfg.z_upper[n]);
        }
        out
    };

    macro_rules! eval {
        ($z:expr) => {{
            let value = match objective($z, measured, p, normal) {
                Ok(v) if v.is_finite() => v,
                Ok(_) => penalty,
                Err(BaselineError::BadTrajectory(m)) => {
                    return Err(BaselineError::BadTrajectory(m))
                }
                Err(_) => penalty,
            };
            evals += 1;
            best_seen = best_seen.min(value);
            trace.0.push(Evaluation {
                eval: evals,
                objective: value,
                best: best_seen,
            });
            value
        }};
    }

    // Initial simplex: start point plus one step per coordinate.
    let x0 = project(&start);
    let f0 = eval!(&x0);
    penalty = 1e6 * f0.max(1.0);
    let mut simplex: Vec<([f64; N_PARAMS], f64)> = Vec::with_capacity(N_PARAMS + 1);
    simplex.push((x0, f0));
    for n in 0..N_PARAMS {
        if evals >= cfg.max_evals {
            break;
        }
        let mut x = x0;
        let span = cfg.z_upper[n] - cfg.z_lower[n];
        let step = if span > 0.0 {
            cfg.init_simplex_scale * span
        } else {
            1e-8
        };
        x[n] = if x[n] + step <= cfg.z_upper[n] {
            x[n] + step
        } else {
            x[n] - step
        };
        let x = project(&x);
        let f = eval!(&x);
        simplex.push((x, f));
    }

    const ALPHA: f64 = 1.0; // reflection
    const GAMMA: f64 = 2.0; // expansion
    const RHO: f64 = 0.5; // contraction
    const SIGMA: f64 = 0.5; // shrink

    let mut stalled = false;
    while evals < cfg.max_evals && simplex.len() == N_PARAMS + 1 {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let f_best = simplex[0].1;
        let f_worst = simplex[N_PARAMS].1;
        if (f_worst - f_best).abs() <= cfg.tolerance * (f_best.abs() + 1e-30) {
            stalled = true;
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = [0.0; N_PARAMS];
        for (x, _) in &simplex[..N_PARAMS] {
            for n in 0..N_PARAMS {
                centroid[n] += x[n] / N_PARAMS as f64;
            }
        }
        let worst = simplex[N_PARAMS];

        let blend = |a: f64| {
            let mut x = [0.0; N_PARAMS];
            for n in 0..N_PARAMS {
                x[n] = centroid[n] + a * (centroid[n] - worst.0[n]);
            }
            project(&x)
        };

        let xr = blend(ALPHA);
        let fr = eval!(&xr);
        if fr < simplex[0].1 {
            if evals >= cfg.max_evals {
                simplex[N_PARAMS] = (xr, fr);
                break;
            }
            let xe = blend(GAMMA);
            let fe = eval!(&xe);
            simplex[N_PARAMS] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[N_PARAMS - 1].1 {
            simplex[N_PARAMS] = (xr, fr);
        } else {
            if evals >= cfg.max_evals {
                break;
            }
            let xc = if fr < worst.1 {
                blend(RHO) // outside contraction
            } else {
                blend(-RHO) // inside contraction
            };
            let fc = eval!(&xc);
            if fc < worst.1.min(fr) {
                simplex[N_PARAMS] = (xc, fc);
            } else {
                // Shrink toward the best vertex.
                let best = simplex[0].0;
                for vertex in simplex.iter_mut().skip(1) {
                    if evals >= cfg.max_evals {
                        break;
                    }
                    let mut x = [0.0; N_PARAMS];
                    for n in 0..N_PARAMS {
                        x[n] = best[n] + SIGMA * (vertex.0[n] - best[n]);
                    }
                    let x = project(&x);
                    let f = eval!(&x);
                    *vertex = (x, f);
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(OptimizationReport {
        best: simplex[0].0,
        best_objective: simplex[0].1,
        evals,
        stalled,
        trace,
        wall_time: started.elapsed(),
    })
}

/// Seeded start: Gaussian at the bound midpoints with σ = range/6, clamped
/// (mirrors the observer's initial-guess sampler).
fn sample_start(cfg: &OptConfig, seed: u64) -> [f64; N_PARAMS] {
    let adapt = crate::uas::AdaptationConfig {
        z_lower: cfg.z_lower,
        z_upper: cfg.z_upper,
        lambda_lower: [1.0; N_PARAMS],
        lambda_upper: [1.0; N_PARAMS],
        gamma: 0.0,
        law: crate::uas::AdaptationLaw::Bounded,
        threshold: 1.0,
        averaging: false,
    };
    crate::uas::initial_guess_sample(&adapt, seed)
}
