//! Stochastic conditional trajectories of the monitored mode.
//!
//! For a Gaussian filter the covariance evolves deterministically (the
//! Riccati path of [`crate::dynamics`]); only the conditional means are
//! stochastic:
//!
//! ```text
//!     d m = A m dt + K dW,      K = 2 sqrt(eta mu) V H'
//! ```
//!
//! with one Wiener increment per monitored channel. The measurement record
//! of channel i is accumulated as dy_i = 2 sqrt(eta mu) (H m)_i dt + dW_i;
//! this scale makes the conditioning terms of the covariance equation come
//! out with their 4 eta mu coefficients, which is the module's record
//! convention.
//!
//! Reproducibility: the noise is a counter-based stream cipher keyed by
//! (seed, stream), so any ensemble member can be regenerated in isolation
//! and ensembles parallelize without shared state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{
    drift_matrix, integrate_riccati, steady_state_numeric, CovariancePath, CovarianceState,
};
use crate::error::{Error, Result};
use crate::params::{RotatingFrameParams, Scheme};

/// Knobs for [`simulate_conditional`]; `Default` is the physical setup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryOptions {
    /// Conditional means at t = 0.
    pub initial_means: (f64, f64),
    /// Covariance at t = 0; thermal at the bath occupation when `None`.
    pub initial_cov: Option<CovarianceState>,
    /// Multiplies every Wiener increment; 0 gives the noise-free drift
    /// (test hook, not physical).
    pub noise_scale: f64,
    /// Multiplies the Kalman gain only (the record keeps the true scale);
    /// values other than 1 deliberately break the filter (test hook).
    pub gain_scale: f64,
    /// Noise stream index; `(seed, stream)` identifies the realization.
    pub stream: u64,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        TrajectoryOptions {
            initial_means: (0.0, 0.0),
            initial_cov: None,
            noise_scale: 1.0,
            gain_scale: 1.0,
            stream: 0,
        }
    }
}

/// One conditional trajectory: means, records, and the deterministic
/// covariance path they were filtered with.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    /// Sample times, same grid as `cov_path`.
    pub times: Vec<f64>,
    pub mean_x: Vec<f64>,
    pub mean_y: Vec<f64>,
    /// Cumulative measurement record per monitored channel (2 channels for
    /// the driven scheme, 1 for the evading readout).
    pub records: Vec<Vec<f64>>,
    pub cov_path: CovariancePath,
    pub rng_seed: u64,
    pub stream: u64,
}

impl TrajectoryRecord {
    /// CSV export `t,mean_x,mean_y,v_x,v_y,c,record_1,record_2`; time in
    /// units of 1/gamma; `record_2` left empty for single-channel schemes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,mean_x,mean_y,v_x,v_y,c,record_1,record_2\n");
        let gamma = self.cov_path.gamma;
        for i in 0..self.times.len() {
            let s = &self.cov_path.states[i];
            let rec2 = self
                .records
                .get(1)
                .map(|r| r[i].to_string())
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                self.times[i] * gamma,
                self.mean_x[i],
                self.mean_y[i],
                s.v_x,
                s.v_y,
                s.c,
                self.records[0][i],
                rec2,
            ));
        }
        out
    }
}

fn monitored_channels(scheme: Scheme) -> usize {
    match scheme {
        Scheme::Dmpa => 2,
        Scheme::Bae => 1,
    }
}

/// Stationary filter bandwidth, used to bound the step size.
fn stationary_filter_width(p: &RotatingFrameParams, scheme: Scheme) -> Result<f64> {
    let v = steady_state_numeric(p, scheme)?;
    Ok(p.gamma + 2.0 * p.eta * p.mu * (v.v_x + v.v_y))
}

/// Largest admissible step for the Euler mean update.
pub fn max_time_step(p: &RotatingFrameParams, scheme: Scheme) -> Result<f64> {
    Ok(0.01 / stationary_filter_width(p, scheme)?)
}

/// Step used by [`ensemble_validate`].
pub fn ensemble_time_step(p: &RotatingFrameParams, scheme: Scheme) -> Result<f64> {
    Ok(0.005 / p.gamma.max(stationary_filter_width(p, scheme)?))
}

/// Simulate one conditional trajectory with the Euler-Maruyama scheme.
/// Requires stable parameters and dt at most 0.01 over the stationary
/// filter width; the covariance path is integrated with the same routine
/// as [`integrate_riccati`], so it is identical to it sample for sample.
pub fn simulate_conditional(
    p: &RotatingFrameParams,
    scheme: Scheme,
    seed: u64,
    t_end: f64,
    dt: f64,
    opts: &TrajectoryOptions,
) -> Result<TrajectoryRecord> {
    let max_dt = max_time_step(p, scheme)?; // also rejects unstable params
    if dt > max_dt * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "dt = {dt:.3e} too coarse for the mean update; need dt <= {max_dt:.3e}"
        )));
    }
    if !(opts.noise_scale >= 0.0 && opts.noise_scale.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise_scale must be finite and nonnegative, got {}",
            opts.noise_scale
        )));
    }
    let initial = opts
        .initial_cov
        .unwrap_or_else(|| CovarianceState::thermal(p.n_th + 0.5));
    let cov_path = integrate_riccati(&initial, p, scheme, t_end, dt)?;
    let gains = precompute_gains(p, scheme, &cov_path, opts.gain_scale);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(opts.stream);

    let n = cov_path.t.len();
    let channels = monitored_channels(scheme);
    let a = drift_matrix(p, scheme);
    let record_gain = 2.0 * (p.eta * p.mu).sqrt();
    let mut mean_x = Vec::with_capacity(n);
    let mut mean_y = Vec::with_capacity(n);
    let mut records = vec![vec![0.0]; channels];
    let (mut mx, mut my) = opts.initial_means;
    mean_x.push(mx);
    mean_y.push(my);
    for (k, w) in gains.iter().zip(cov_path.t.windows(2)) {
        let step = w[1] - w[0];
        let sqrt_step = step.sqrt();
        let mut dwx = 0.0;
        let mut dwy = 0.0;
        for (ch, rec) in records.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            let dw = z * sqrt_step * opts.noise_scale;
            // channel 0 reads X, channel 1 reads Y
            let projected = if ch == 0 { mx } else { my };
            let dy = record_gain * projected * step + dw;
            let cum = *rec.last().unwrap() + dy;
            rec.push(cum);
            if ch == 0 {
                dwx = dw;
            } else {
                dwy = dw;
            }
        }
        let (nmx, nmy) = (
            mx + (a[0][0] * mx + a[0][1] * my) * step + k[0] * dwx + k[1] * dwy,
            my + (a[1][0] * mx + a[1][1] * my) * step + k[2] * dwx + k[3] * dwy,
        );
        mx = nmx;
        my = nmy;
        mean_x.push(mx);
        mean_y.push(my);
    }
    Ok(TrajectoryRecord {
        times: cov_path.t.clone(),
        mean_x,
        mean_y,
        records,
        cov_path,
        rng_seed: seed,
        stream: opts.stream,
    })
}

/// Kalman gain K = 2 sqrt(eta mu) V H' per step, flattened as
/// [k_x<-dw1, k_x<-dw2, k_y<-dw1, k_y<-dw2]; single-channel schemes leave
/// the second column zero.
fn precompute_gains(
    p: &RotatingFrameParams,
    scheme: Scheme,
    cov_path: &CovariancePath,
    gain_scale: f64,
) -> Vec<[f64; 4]> {
    let base = 2.0 * (p.eta * p.mu).sqrt() * gain_scale;
    cov_path
        .states
        .iter()
        .map(|v| match scheme {
            Scheme::Dmpa => [base * v.v_x, base * v.c, base * v.c, base * v.v_y],
            Scheme::Bae => [base * v.v_x, 0.0, base * v.c, 0.0],
        })
        .collect()
}

/// One comparison line of an [`EnsembleReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleEntry {
    pub name: &'static str,
    pub measured: f64,
    pub expected: f64,
    pub z: f64,
}

/// Ensemble statistics of the conditional means against the unconditional
/// covariance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleReport {
    pub n_traj: usize,
    pub t_end: f64,
    pub entries: Vec<EnsembleEntry>,
    pub z_scores: Vec<f64>,
    pub pass: bool,
}

impl EnsembleReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Validate the filter by the law of total variance: the ensemble
/// covariance of the conditional means plus the conditional covariance must
/// reproduce the unconditional covariance, and the means must average to
/// zero. Entries are z-scored against the ensemble size; the report passes
/// when every |z| < 4.
///
/// The expected unconditional covariance is propagated from the same
/// initial state over the same grid, so the identity holds at any t_end,
/// not just in steady state.
pub fn ensemble_validate(
    p: &RotatingFrameParams,
    scheme: Scheme,
    n_traj: usize,
    t_end: f64,
    base_seed: u64,
    opts: &TrajectoryOptions,
) -> Result<EnsembleReport> {
    if n_traj < 100 {
        return Err(Error::InvalidParameter(format!(
            "ensemble needs at least 100 trajectories, got {n_traj}"
        )));
    }
    let dt = ensemble_time_step(p, scheme)?;
    let initial = opts
        .initial_cov
        .unwrap_or_else(|| CovarianceState::thermal(p.n_th + 0.5));
    let cov_path = integrate_riccati(&initial, p, scheme, t_end, dt)?;
    let gains = precompute_gains(p, scheme, &cov_path, opts.gain_scale);
    let steps: Vec<f64> = cov_path.t.windows(2).map(|w| w[1] - w[0]).collect();
    let channels = monitored_channels(scheme);
    let a = drift_matrix(p, scheme);

    // lean replay of the mean update only; covariance and gains are shared
    let finals: Vec<(f64, f64)> = (0..n_traj as u64)
        .into_par_iter()
        .map(|stream| {
            let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
            rng.set_stream(opts.stream.wrapping_add(stream));
            let (mut mx, mut my) = opts.initial_means;
            for (i, &step) in steps.iter().enumerate() {
                let sqrt_step = step.sqrt();
                let k = &gains[i];
                let mut dwx = 0.0;
                let mut dwy = 0.0;
                for ch in 0..channels {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let dw = z * sqrt_step * opts.noise_scale;
                    if ch == 0 {
                        dwx = dw;
                    } else {
                        dwy = dw;
                    }
                }
                let (nmx, nmy) = (
                    mx + (a[0][0] * mx + a[0][1] * my) * step + k[0] * dwx + k[1] * dwy,
                    my + (a[1][0] * mx + a[1][1] * my) * step + k[2] * dwx + k[3] * dwy,
                );
                mx = nmx;
                my = nmy;
            }
            (mx, my)
        })
        .collect();

    // unconditional covariance from the same initial state and grid
    let v_unc = propagate_unconditional(&initial, p, scheme, &cov_path)?;
    let v_cond = cov_path.final_state();
    let spread = CovarianceState::new(
        (v_unc.v_x - v_cond.v_x).max(0.0),
        (v_unc.v_y - v_cond.v_y).max(0.0),
        v_unc.c - v_cond.c,
    );

    let n = n_traj as f64;
    let mean_x: f64 = finals.iter().map(|f| f.0).sum::<f64>() / n;
    let mean_y: f64 = finals.iter().map(|f| f.1).sum::<f64>() / n;
    // means are zero by construction, so second moments need no centering
    let s_xx: f64 = finals.iter().map(|f| f.0 * f.0).sum::<f64>() / n;
    let s_yy: f64 = finals.iter().map(|f| f.1 * f.1).sum::<f64>() / n;
    let s_xy: f64 = finals.iter().map(|f| f.0 * f.1).sum::<f64>() / n;

    let z_mean = |m: f64, var: f64| z_guarded(m, (var / n).sqrt());
    let z_second = |s: f64, expect: f64, var: f64| z_guarded(s - expect, (var / n).sqrt());
    let entries = vec![
        EnsembleEntry {
            name: "mean_x",
            measured: mean_x,
            expected: 0.0,
            z: z_mean(mean_x, spread.v_x),
        },
        EnsembleEntry {
            name: "mean_y",
            measured: mean_y,
            expected: 0.0,
            z: z_mean(mean_y, spread.v_y),
        },
        EnsembleEntry {
            name: "v_x",
            measured: s_xx + v_cond.v_x,
            expected: v_unc.v_x,
            z: z_second(s_xx, spread.v_x, 2.0 * spread.v_x * spread.v_x),
        },
        EnsembleEntry {
            name: "v_y",
            measured: s_yy + v_cond.v_y,
            expected: v_unc.v_y,
            z: z_second(s_yy, spread.v_y, 2.0 * spread.v_y * spread.v_y),
        },
        EnsembleEntry {
            name: "c",
            measured: s_xy + v_cond.c,
            expected: v_unc.c,
            z: z_second(
                s_xy,
                spread.c,
                spread.v_x * spread.v_y + spread.c * spread.c,
            ),
        },
    ];
    let z_scores: Vec<f64> = entries.iter().map(|e| e.z).collect();
    let pass = z_scores.iter().all(|z| z.abs() < 4.0);
    Ok(EnsembleReport {
        n_traj,
        t_end,
        entries,
        z_scores,
        pass,
    })
}

/// z-score with a guard for exactly-zero statistical spread (no noise or no
/// gain): any deviation beyond roundoff then fails hard.
fn z_guarded(deviation: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        deviation / sigma
    } else if deviation.abs() < 1e-9 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Unconditional covariance at the end of the grid: same diffusion, no
/// conditioning term, integrated with the matching step sequence.
fn propagate_unconditional(
    initial: &CovarianceState,
    p: &RotatingFrameParams,
    scheme: Scheme,
    cov_path: &CovariancePath,
) -> Result<CovarianceState> {
    let unmonitored = RotatingFrameParams { eta: 0.0, ..*p };
    let path = integrate_riccati(
        initial,
        &unmonitored,
        scheme,
        *cov_path.t.last().unwrap(),
        cov_path.t[1] - cov_path.t[0],
    )?;
    Ok(path.final_state())
}
