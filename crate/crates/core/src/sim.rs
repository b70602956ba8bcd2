//! Fixed-step RK4 propagation of the plant, measurement-noise injection and
//! trajectory recording.
//!
//! The integrator is the classical fourth-order Runge-Kutta scheme with a
//! constant step; no adaptivity, so runs are bit-deterministic given the
//! parameters, the initial condition and the seed.

use crate::model::{
    dynamics_rhs, FrictionParams, GeneralizedForces, ModelError, NormalForceModel, PhysicalParams,
    State,
};
use nalgebra::SVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::fmt::Write as _;
use std::path::Path;

/// Integration setup: step, horizon and the measurement-noise channel.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    /// Integration step (s).
    pub dt: f64,
    /// Total simulated time (s).
    pub duration: f64,
    /// Seed for every stochastic element tied to this run.
    pub seed: u64,
    /// Measurement noise standard deviation, in the native state units
    /// (rad and rad/s).
    pub noise_sigma: f64,
    /// Disable to record the exact simulated states.
    pub noise_enabled: bool,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !self.dt.is_finite() || self.dt <= 0.0 {
            return Err(SimError::InvalidConfig("dt must be positive and finite"));
        }
        if self.duration.is_nan() || self.duration < self.dt {
            return Err(SimError::InvalidConfig("duration must be at least dt"));
        }
        if self.noise_sigma < 0.0 || !self.noise_sigma.is_finite() {
            return Err(SimError::InvalidConfig("noise_sigma must be non-negative"));
        }
        Ok(())
    }

    /// Number of recorded samples: one per step plus the initial state.
    pub fn sample_count(&self) -> usize {
        (self.duration / self.dt).floor() as usize + 1
    }
}

/// Uniformly sampled state history.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Sampling interval, inferred from the first two samples.
    pub fn dt(&self) -> Option<f64> {
        (self.times.len() >= 2).then(|| self.times[1] - self.times[0])
    }

    /// One position/velocity channel as a column.
    pub fn channel(&self, ch: Channel) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| match ch {
                Channel::Theta0 => s.theta0,
                Channel::Theta1 => s.theta1,
                Channel::Omega0 => s.omega0,
                Channel::Omega1 => s.omega1,
            })
            .collect()
    }

    /// Serialize as `t,theta0,theta1,omega0,omega1` with 17 significant
    /// digits, enough for a bit-exact round trip through text.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.len() * 100 + 90);
        out.push_str("# t in s, angles in rad, angular velocities in rad/s\n");
        out.push_str("t,theta0,theta1,omega0,omega1\n");
        for (t, s) in self.times.iter().zip(&self.states) {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                t, s.theta0, s.theta1, s.omega0, s.omega1
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), SimError> {
        std::fs::write(path, self.to_csv_string()).map_err(|source| SimError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Parse a trajectory CSV. The header decides the layout: the full
    /// five-column form is taken as-is, while the position-only form
    /// `t,theta0,theta1` gets velocities reconstructed by central
    /// differences (one-sided at the ends). Lines starting with `#` are
    /// comments. Angles are radians.
    pub fn from_csv_str(text: &str) -> Result<Self, SimError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim_start().starts_with('#'));
        let (_, header) = lines.next().ok_or(SimError::Parse {
            line: 1,
            message: "empty file".into(),
        })?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let with_velocities = match cols.as_slice() {
            ["t", "theta0", "theta1", "omega0", "omega1"] => true,
            ["t", "theta0", "theta1"] => false,
            _ => {
                return Err(SimError::Parse {
                    line: 1,
                    message: format!("unrecognized header `{header}`"),
                })
            }
        };
        let want = if with_velocities { 5 } else { 3 };
        let mut times = Vec::new();
        let mut states = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = [0.0f64; 5];
            let mut n = 0;
            for part in line.split(',') {
                if n >= want {
                    n += 1;
                    break;
                }
                fields[n] = part.trim().parse().map_err(|e| SimError::Parse {
                    line: idx + 1,
                    message: format!("bad number `{}`: {e}", part.trim()),
                })?;
                n += 1;
            }
            if n != want {
                return Err(SimError::Parse {
                    line: idx + 1,
                    message: format!("expected {want} fields, found {n}"),
                });
            }
            times.push(fields[0]);
            states.push(State::new(fields[1], fields[2], fields[3], fields[4]));
        }
        if times.len() < 2 {
            return Err(SimError::Parse {
                line: times.len() + 1,
                message: "need at least two samples".into(),
            });
        }
        for w in times.windows(2) {
            if w[1] <= w[0] {
                return Err(SimError::Parse {
                    line: 0,
                    message: "times must be strictly increasing".into(),
                });
            }
        }
        let mut traj = Self { times, states };
        if !with_velocities {
            reconstruct_velocities(&mut traj);
        }
        Ok(traj)
    }

    pub fn read_csv(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv_str(&text)
    }
}

/// Channels of a trajectory, in CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Theta0,
    Theta1,
    Omega0,
    Omega1,
}

/// Fill in `omega` channels by centrally differencing the positions;
/// one-sided differences at the two ends.
pub fn reconstruct_velocities(traj: &mut Trajectory) {
    let n = traj.len();
    if n < 2 {
        return;
    }
    let th0: Vec<f64> = traj.states.iter().map(|s| s.theta0).collect();
    let th1: Vec<f64> = traj.states.iter().map(|s| s.theta1).collect();
    let t = &traj.times;
    for i in 0..n {
        let (lo, hi) = if i == 0 {
            (0, 1)
        } else if i == n - 1 {
            (n - 2, n - 1)
        } else {
            (i - 1, i + 1)
        };
        let dt = t[hi] - t[lo];
        traj.states[i].omega0 = (th0[hi] - th0[lo]) / dt;
        traj.states[i].omega1 = (th1[hi] - th1[lo]) / dt;
    }
}

/// Errors from integration and trajectory I/O.
#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(&'static str),
    #[error("model failure at t = {t} s: {source}")]
    Model { t: f64, source: ModelError },
    #[error("non-finite state at t = {t} s")]
    NonFinite { t: f64 },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("CSV line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// One classical RK4 update of `ds/dt = rhs(t, s)`.
///
/// Deterministic; fails if any stage or the result is non-finite, which is
/// how model singularities surface mid-run.
pub fn rk4_step<const N: usize, E>(
    rhs: &mut impl FnMut(f64, &SVector<f64, N>) -> Result<SVector<f64, N>, E>,
    t: f64,
    s: &SVector<f64, N>,
    dt: f64,
) -> Result<SVector<f64, N>, RkError<E>> {
    let k1 = rhs(t, s).map_err(RkError::Rhs)?;
    let k2 = rhs(t + dt / 2.0, &(s + k1 * (dt / 2.0))).map_err(RkError::Rhs)?;
    let k3 = rhs(t + dt / 2.0, &(s + k2 * (dt / 2.0))).map_err(RkError::Rhs)?;
    let k4 = rhs(t + dt, &(s + k3 * dt)).map_err(RkError::Rhs)?;
    let next = s + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    if next.iter().all(|x| x.is_finite()) {
        Ok(next)
    } else {
        Err(RkError::NonFinite)
    }
}

/// Step failure: either the derivative callback failed or the update left
/// the finite range.
#[derive(Debug)]
pub enum RkError<E> {
    Rhs(E),
    NonFinite,
}

/// Propagate the pendulum from `ic` and record every step.
///
/// `input` is an optional torque schedule; `None` simulates the passive
/// plant. Noise is *not* applied here — measurements are corrupted
/// separately by [`add_noise`] so the plant integration stays exact.
pub fn simulate<N: NormalForceModel + ?Sized>(
    p: &PhysicalParams,
    fp0: &FrictionParams,
    fp1: &FrictionParams,
    normal: &N,
    ic: State,
    cfg: &SimConfig,
    input: Option<&dyn Fn(f64) -> GeneralizedForces>,
) -> Result<Trajectory, SimError> {
    cfg.validate()?;
    p.validate()
        .map_err(|source| SimError::Model { t: 0.0, source })?;
    let n_steps = cfg.sample_count() - 1;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut s = ic.to_vector();
    times.push(0.0);
    states.push(ic);
    let mut rhs = |t: f64, v: &SVector<f64, 4>| {
        let u = input.map_or(GeneralizedForces::ZERO, |f| f(t));
        dynamics_rhs(p, fp0, fp1, normal, &State::from_vector(v), u)
    };
    for i in 0..n_steps {
        let t = i as f64 * cfg.dt;
        s = rk4_step(&mut rhs, t, &s, cfg.dt).map_err(|e| match e {
            RkError::Rhs(source) => SimError::Model { t, source },
            RkError::NonFinite => SimError::NonFinite { t },
        })?;
        times.push((i + 1) as f64 * cfg.dt);
        states.push(State::from_vector(&s));
    }
    Ok(Trajectory { times, states })
}

/// Perturb one state with i.i.d. zero-mean Gaussian noise on every channel;
/// used to corrupt the observer's initial condition separately from the
/// measurement stream. Deterministic per seed.
pub fn perturb_state(s: &State, sigma: f64, seed: u64) -> State {
    if sigma == 0.0 {
        return *s;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma must be finite and non-negative");
    State::new(
        s.theta0 + normal.sample(&mut rng),
        s.theta1 + normal.sample(&mut rng),
        s.omega0 + normal.sample(&mut rng),
        s.omega1 + normal.sample(&mut rng),
    )
}

/// Corrupt every state channel with i.i.d. zero-mean Gaussian noise of
/// standard deviation `sigma`; deterministic per seed.
pub fn add_noise(traj: &Trajectory, sigma: f64, seed: u64) -> Trajectory {
    if sigma == 0.0 {
        return traj.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma must be finite and non-negative");
    let states = traj
        .states
        .iter()
        .map(|s| {
            State::new(
                s.theta0 + normal.sample(&mut rng),
                s.theta1 + normal.sample(&mut rng),
                s.omega0 + normal.sample(&mut rng),
                s.omega1 + normal.sample(&mut rng),
            )
        })
        .collect();
    Trajectory {
        times: traj.times.clone(),
        states,
    }
}
