//! Flat `key = value` run configuration.
//!
//! One key per line, `#` comments, whitespace-insensitive. Keys mirror the
//! model symbols (`m1`, `j2x`, `z_u.mu_d0`, ...). Angles cross this boundary
//! in degrees; everything is converted to radians on load. The tilt
//! `phi_deg` has no physical default and must be present in every file.

use anyhow::{anyhow, bail, Context, Result};
use furuta_core::model::{FrictionParams, PhysicalParams, State};
use furuta_core::sim::SimConfig;
use furuta_core::uas::{AdaptationConfig, AdaptationLaw, NussbaumKind, NussbaumSpec, N_PARAMS};
use std::collections::HashMap;
use std::path::Path;

/// Friction-parameter key suffixes, in the canonical `z1..z10` order.
pub const PARAM_NAMES: [&str; N_PARAMS] = [
    "mu_d0",
    "mu_s0",
    "mu_v0",
    "theta_dot_t0",
    "f_nt0",
    "mu_d1",
    "mu_s1",
    "mu_v1",
    "theta_dot_t1",
    "f_nt1",
];

/// Units in which `noise.sigma` and `noise.ic_sigma` are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseUnits {
    /// Native state units: radians and radians per second.
    Rad,
    /// Degrees and degrees per second, converted on load.
    Deg,
}

/// Everything a run needs, already converted to SI/radians.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub physical: PhysicalParams,
    /// Plant friction ground truth; needed by `simulate` and `compare`.
    pub truth: Option<(FrictionParams, FrictionParams)>,
    /// Initial condition (radians).
    pub ic: State,
    pub sim: SimConfig,
    /// Extra perturbation applied to the observer's initial state only (rad).
    pub ic_noise_sigma: f64,
    pub adaptation: AdaptationConfig,
    pub nussbaum: NussbaumSpec,
    /// Initial gain state `k(0) > 0`.
    pub k0: f64,
    /// Explicit initial parameter guesses; sampled from the seed when absent.
    pub initial_guesses: Option<[f64; N_PARAMS]>,
    pub opt_max_evals: usize,
    pub opt_init_simplex_scale: f64,
    pub opt_tolerance: f64,
}

impl RunConfig {
    /// The bench scenario: tilted pendulum dropped from 120 degrees,
    /// 0.1 degree measurement noise, bounded adaptation inside the
    /// parameter corridor, Mittag-Leffler gain.
    pub fn bench_defaults() -> Self {
        RunConfig {
            physical: furuta_core::model::reference::physical_params(1.0),
            truth: Some((
                furuta_core::model::reference::friction_arm(),
                furuta_core::model::reference::friction_pendulum(),
            )),
            ic: State::new(0.0, 120f64.to_radians(), 0.0, 0.0),
            sim: SimConfig {
                dt: 1e-3,
                duration: 35.0,
                seed: 42,
                noise_sigma: 0.1f64.to_radians(),
                noise_enabled: true,
            },
            ic_noise_sigma: 0.0,
            adaptation: AdaptationConfig {
                z_lower: [2.22e-16; N_PARAMS],
                z_upper: [
                    0.0750, 0.0750, 0.0100, 0.0100, 0.1, 0.150, 0.151, 0.0100, 0.0100, 0.100,
                ],
                lambda_lower: [50.0; N_PARAMS],
                lambda_upper: [1.0; N_PARAMS],
                gamma: 0.0,
                law: AdaptationLaw::Bounded,
                threshold: 0.01,
                averaging: false,
            },
            nussbaum: NussbaumSpec::mittag_leffler(1.0, 3.0),
            k0: 6.7,
            initial_guesses: Some([
                5.135e-3, 5.875e-3, 2.531e-3, 4.853e-2, 1.029e-1, //
                5.705e-3, 6.683e-3, 2.399e-3, 4.820e-2, 9.720e-2,
            ]),
            opt_max_evals: 800,
            opt_init_simplex_scale: 0.1,
            opt_tolerance: 1e-12,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    /// Parse a config file over the bench defaults. `phi_deg` is required;
    /// unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv: HashMap<String, (usize, String)> = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", idx + 1))?;
            let key = key.trim().to_string();
            if kv.contains_key(&key) {
                bail!("line {}: duplicate key `{key}`", idx + 1);
            }
            kv.insert(key, (idx + 1, value.trim().to_string()));
        }

        let mut cfg = Self::bench_defaults();
        let mut noise_units = NoiseUnits::Deg;
        let mut noise_sigma = 0.1f64;
        let mut ic_sigma = 0.0f64;
        let mut ic_deg: [f64; 4] = [0.0, 120.0, 0.0, 0.0];
        let mut init: [Option<f64>; N_PARAMS] = [None; N_PARAMS];
        let mut phi_deg: Option<f64> = None;

        let mut take = |key: &str| kv.remove(key);
        macro_rules! num {
            ($key:expr, $slot:expr) => {
                if let Some((line, v)) = take($key) {
                    $slot = v
                        .parse()
                        .map_err(|e| anyhow!("line {line}: key `{}`: {e}", $key))?;
                }
            };
        }

        num!("m1", cfg.physical.m1);
        num!("m2", cfg.physical.m2);
        num!("j1z", cfg.physical.j1z);
        num!("j2x", cfg.physical.j2x);
        num!("j2y", cfg.physical.j2y);
        num!("j2z", cfg.physical.j2z);
        num!("l1", cfg.physical.l1);
        num!("l2", cfg.physical.l2);
        num!("L1", cfg.physical.big_l1);
        num!("L2", cfg.physical.big_l2);
        num!("g", cfg.physical.g);
        if let Some((line, v)) = take("phi_deg") {
            phi_deg = Some(
                v.parse()
                    .map_err(|e| anyhow!("line {line}: key `phi_deg`: {e}"))?,
            );
        }

        num!("ic.theta0_deg", ic_deg[0]);
        num!("ic.theta1_deg", ic_deg[1]);
        num!("ic.omega0_deg", ic_deg[2]);
        num!("ic.omega1_deg", ic_deg[3]);

        num!("sim.dt", cfg.sim.dt);
        num!("sim.duration", cfg.sim.duration);
        num!("seed", cfg.sim.seed);
        num!("noise.sigma", noise_sigma);
        num!("noise.ic_sigma", ic_sigma);
        if let Some((line, v)) = take("noise.enabled") {
            cfg.sim.noise_enabled = parse_bool(&v).map_err(|e| anyhow!("line {line}: {e}"))?;
        }
        if let Some((line, v)) = take("noise.units") {
            noise_units = match v.as_str() {
                "rad" => NoiseUnits::Rad,
                "deg" => NoiseUnits::Deg,
                other => bail!("line {line}: noise.units must be `rad` or `deg`, got `{other}`"),
            };
        }

        let mut truth: [Option<f64>; N_PARAMS] = [None; N_PARAMS];
        for (n, name) in PARAM_NAMES.iter().enumerate() {
            if let Some((line, v)) = take(&format!("truth.{name}")) {
                truth[n] = Some(
                    v.parse()
                        .map_err(|e| anyhow!("line {line}: key `truth.{name}`: {e}"))?,
                );
            }
            if let Some((line, v)) = take(&format!("init.{name}")) {
                init[n] = Some(
                    v.parse()
                        .map_err(|e| anyhow!("line {line}: key `init.{name}`: {e}"))?,
                );
            }
            let mut bound = |prefix: &str, slot: &mut f64| -> Result<()> {
                if let Some((line, v)) = take(&format!("{prefix}.{name}")) {
                    *slot = v
                        .parse()
                        .map_err(|e| anyhow!("line {line}: key `{prefix}.{name}`: {e}"))?;
                }
                Ok(())
            };
            bound("z_l", &mut cfg.adaptation.z_lower[n])?;
            bound("z_u", &mut cfg.adaptation.z_upper[n])?;
            bound("lambda_l", &mut cfg.adaptation.lambda_lower[n])?;
            bound("lambda_u", &mut cfg.adaptation.lambda_upper[n])?;
        }

        num!("gamma", cfg.adaptation.gamma);
        num!("threshold", cfg.adaptation.threshold);
        if let Some((line, v)) = take("averaging") {
            cfg.adaptation.averaging = parse_bool(&v).map_err(|e| anyhow!("line {line}: {e}"))?;
        }
        if let Some((line, v)) = take("law") {
            cfg.adaptation.law = match v.as_str() {
                "bounded" => AdaptationLaw::Bounded,
                "affine" => AdaptationLaw::Affine,
                other => bail!("line {line}: law must be `bounded` or `affine`, got `{other}`"),
            };
        }

        if let Some((line, v)) = take("nussbaum.kind") {
            cfg.nussbaum.kind = match v.as_str() {
                "mittag-leffler" => NussbaumKind::MittagLeffler,
                "n2" => NussbaumKind::N2,
                "n3" => NussbaumKind::N3,
                "n4" => NussbaumKind::N4,
                other => bail!("line {line}: unknown nussbaum.kind `{other}`"),
            };
        }
        num!("nussbaum.lambda", cfg.nussbaum.lambda);
        num!("nussbaum.alpha", cfg.nussbaum.alpha);
        num!("nussbaum.series_tol", cfg.nussbaum.series_tol);
        num!("nussbaum.max_terms", cfg.nussbaum.max_terms);
        num!("observer.k0", cfg.k0);

        num!("opt.max_evals", cfg.opt_max_evals);
        num!("opt.init_simplex_scale", cfg.opt_init_simplex_scale);
        num!("opt.tolerance", cfg.opt_tolerance);

        if let Some((key, (line, _))) = kv.into_iter().next() {
            bail!("line {line}: unknown key `{key}`");
        }

        let phi_deg =
            phi_deg.ok_or_else(|| anyhow!("`phi_deg` is required (tilt has no default)"))?;
        cfg.physical.phi = phi_deg.to_radians();
        cfg.ic = State::new(
            ic_deg[0].to_radians(),
            ic_deg[1].to_radians(),
            ic_deg[2].to_radians(),
            ic_deg[3].to_radians(),
        );
        let convert = |sigma: f64| match noise_units {
            NoiseUnits::Rad => sigma,
            NoiseUnits::Deg => sigma.to_radians(),
        };
        cfg.sim.noise_sigma = convert(noise_sigma);
        cfg.ic_noise_sigma = convert(ic_sigma);
        if truth.iter().any(Option::is_some) {
            if truth.iter().any(Option::is_none) {
                bail!("partial truth.* friction set: provide all ten or none");
            }
            let t: Vec<f64> = truth.iter().map(|v| v.unwrap()).collect();
            cfg.truth = Some((
                FrictionParams::from_array([t[0], t[1], t[2], t[3], t[4]]),
                FrictionParams::from_array([t[5], t[6], t[7], t[8], t[9]]),
            ));
        }
        if init.iter().any(Option::is_some) {
            if init.iter().any(Option::is_none) {
                bail!("partial init.* guess set: provide all ten or none");
            }
            let mut z = [0.0; N_PARAMS];
            for (slot, v) in z.iter_mut().zip(init) {
                *slot = v.unwrap();
            }
            cfg.initial_guesses = Some(z);
        }

        cfg.physical
            .validate()
            .map_err(|e| anyhow!("physical parameters: {e}"))?;
        cfg.sim.validate().map_err(|e| anyhow!("{e}"))?;
        cfg.adaptation.validate().map_err(|e| anyhow!("{e}"))?;
        cfg.nussbaum.validate().map_err(|e| anyhow!("{e}"))?;
        if let Some((fp0, fp1)) = &cfg.truth {
            fp0.validate().map_err(|e| anyhow!("truth (arm): {e}"))?;
            fp1.validate()
                .map_err(|e| anyhow!("truth (pendulum): {e}"))?;
        }
        if cfg.k0.is_nan() || cfg.k0 <= 0.0 {
            bail!("observer.k0 must be positive");
        }
        Ok(cfg)
    }
}

fn parse_bool(v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(anyhow!("expected a boolean, got `{other}`")),
    }
}

/// Render the bench configuration as a commented template.
pub fn template() -> String {
    let c = RunConfig::bench_defaults();
    let p = &c.physical;
    let (fp0, fp1) = c.truth.as_ref().unwrap();
    let tr: Vec<f64> = fp0.to_array().into_iter().chain(fp1.to_array()).collect();
    let init = c.initial_guesses.unwrap();
    let mut s = String::new();
    s += "# Tilted Furuta pendulum identification run.\n";
    s += "# Angles at this boundary are degrees; trajectory CSVs are radians.\n\n";
    s += &format!("m1 = {}\nm2 = {}\n", p.m1, p.m2);
    s += &format!(
        "j1z = {}\nj2x = {}\nj2y = {}\nj2z = {}\n",
        p.j1z, p.j2x, p.j2y, p.j2z
    );
    s += &format!(
        "l1 = {}\nl2 = {}\nL1 = {}\nL2 = {}\n",
        p.l1, p.l2, p.big_l1, p.big_l2
    );
    s += &format!("g = {}\n", p.g);
    s += &format!(
        "phi_deg = {}   # base-axis tilt; required\n\n",
        p.phi.to_degrees()
    );
    s += "ic.theta0_deg = 0\nic.theta1_deg = 120\nic.omega0_deg = 0\nic.omega1_deg = 0\n\n";
    s += &format!(
        "sim.dt = {}\nsim.duration = {}\nseed = {}\n",
        c.sim.dt, c.sim.duration, c.sim.seed
    );
    s += "noise.sigma = 0.1\nnoise.units = deg   # `rad` uses native state units\n";
    s += "noise.ic_sigma = 0\nnoise.enabled = true\n\n";
    s += "# Plant friction ground truth (for simulate/compare)\n";
    for (name, v) in PARAM_NAMES.iter().zip(&tr) {
        s += &format!("truth.{name} = {v}\n");
    }
    s += "\n# Adaptation corridor and confidences\n";
    for (n, name) in PARAM_NAMES.iter().enumerate() {
        s += &format!(
            "z_l.{name} = {}\nz_u.{name} = {}\nlambda_l.{name} = {}\nlambda_u.{name} = {}\n",
            c.adaptation.z_lower[n],
            c.adaptation.z_upper[n],
            c.adaptation.lambda_lower[n],
            c.adaptation.lambda_upper[n]
        );
    }
    s += &format!(
        "gamma = {}\nthreshold = {}\naveraging = {}\nlaw = bounded\n\n",
        c.adaptation.gamma, c.adaptation.threshold, c.adaptation.averaging
    );
    s += "nussbaum.kind = mittag-leffler\n";
    s += &format!(
        "nussbaum.lambda = {}\nnussbaum.alpha = {}\nobserver.k0 = {}\n\n",
        c.nussbaum.lambda, c.nussbaum.alpha, c.k0
    );
    s += "# Observer initial parameter guesses (omit to sample from the seed)\n";
    for (name, v) in PARAM_NAMES.iter().zip(&init) {
        s += &format!("init.{name} = {v}\n");
    }
    s += &format!(
        "\nopt.max_evals = {}\nopt.init_simplex_scale = {}\nopt.tolerance = {}\n",
        c.opt_max_evals, c.opt_init_simplex_scale, c.opt_tolerance
    );
    s
}
