//! Closed-form results for the stationary conditional state.
//!
//! On the amplification line |delta| = chi the monitored parametric
//! oscillator is equivalent to a plain single-quadrature measurement of a
//! rotated quadrature with an enhanced rate mu_eff = mu (1 + g^2), where
//! g = c / v_x is the stationary covariance gain. Everything here follows
//! from that equivalence: the enhancement ratio, the squeezing angle, the
//! filter bandwidth, purity formulas for both readout schemes, and the
//! strong-drive asymptotics of the squeezed variance.
//!
//! All expressions are arranged to avoid subtractive cancellation, so they
//! stay accurate deep in the weak- and strong-measurement limits. They
//! depend on the detuning only through chi' and the measurement
//! signal-to-noise ratio, hence hold for either sign of the detuning.

use serde::Serialize;

use crate::dynamics::CovarianceState;
use crate::error::{Error, Result};
use crate::params::{RotatingFrameParams, Scheme};

/// Stationary conditional readout summary at |delta| = chi.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveMeasurement {
    /// Covariance gain c / v_x of the stationary state.
    pub g: f64,
    /// Enhancement of the effective measurement rate, mu_eff / mu = 1 + g^2.
    pub mu_eff_ratio: f64,
    /// Backaction occupation mu / (2 gamma) seen by the unprotected quadrature.
    pub n_bad_eff: f64,
    /// Squeezing angle, g = cot(2 alpha); pi/4 for an unmonitored drive.
    pub alpha: f64,
    /// Bandwidth of the stationary filter, gamma + 2 eta mu (v_x + v_y).
    pub gamma_filter: f64,
}

/// mu_eff / mu as a function of chi' = chi/gamma and the measurement
/// signal-to-noise ratio eta mu (2N + 2N_ba + 1) / gamma.
///
/// Ranges from 1 + chi'^2 at snr = 0 down to 1 at strong monitoring: a fast
/// measurement pins the state before the drive can correlate the
/// quadratures.
pub fn mu_eff_ratio(chi_prime: f64, snr: f64) -> f64 {
    let c = chi_prime * chi_prime;
    let s = snr;
    let r = ((1.0 + 4.0 * s) * (1.0 + 4.0 * s) + 16.0 * c * s).sqrt();
    // denominator 1 + r - 4s, rewritten so large s does not cancel
    let d = 1.0 + (1.0 + 8.0 * s + 16.0 * c * s) / (r + 4.0 * s);
    2.0 * (1.0 + c) / d
}

/// g = sqrt(mu_eff_ratio - 1), computed without forming the difference.
pub fn covariance_gain(chi_prime: f64, snr: f64) -> f64 {
    let c = chi_prime * chi_prime;
    let s = snr;
    let r = ((1.0 + 4.0 * s) * (1.0 + 4.0 * s) + 16.0 * c * s).sqrt();
    let d = 1.0 + (1.0 + 8.0 * s + 16.0 * c * s) / (r + 4.0 * s);
    // ratio - 1 = 4c [(1+8s) + c (1+24s) + 16 c^2 s]
    //             / {[r (1+2c) + 1 + 4s + 8cs] (r + 4s) d}  (all terms positive)
    let num = 4.0 * c * ((1.0 + 8.0 * s) + c * (1.0 + 24.0 * s) + 16.0 * c * c * s);
    let den = (r * (1.0 + 2.0 * c) + 1.0 + 4.0 * s + 8.0 * c * s) * (r + 4.0 * s) * d;
    (num / den).sqrt()
}

/// Stationary filter bandwidth over gamma:
/// Gamma/gamma = sqrt((1 + 4 snr + sqrt((1+4snr)^2 + 16 chi'^2 snr)) / 2).
///
/// Identically equal to chi'/g for chi' > 0.
pub fn filter_width_ratio(chi_prime: f64, snr: f64) -> f64 {
    let c = chi_prime * chi_prime;
    let s = snr;
    let r = ((1.0 + 4.0 * s) * (1.0 + 4.0 * s) + 16.0 * c * s).sqrt();
    (0.5 * (1.0 + 4.0 * s + r)).sqrt()
}

/// Gamma/gamma - 1 without subtractive cancellation; needed by expressions
/// that divide by it in the weak-monitoring limit.
fn filter_width_ratio_minus_one(chi_prime: f64, snr: f64) -> f64 {
    let c = chi_prime * chi_prime;
    let s = snr;
    let r = ((1.0 + 4.0 * s) * (1.0 + 4.0 * s) + 16.0 * c * s).sqrt();
    let gf = (0.5 * (1.0 + 4.0 * s + r)).sqrt();
    (4.0 * s + (8.0 * s + 16.0 * s * s + 16.0 * c * s) / (r + 1.0)) / (2.0 * (gf + 1.0))
}

/// Weak-monitoring approximation sqrt(1 + 4 snr (1 + chi'^2));
/// accurate when snr (1 + chi'^2) << 1.
pub fn filter_width_weak_approx(chi_prime: f64, snr: f64) -> f64 {
    (1.0 + 4.0 * snr * (1.0 + chi_prime * chi_prime)).sqrt()
}

/// Strong-monitoring approximation (chi'^2 snr)^(1/4); captures the
/// quarter-power growth but not the order-unity prefactor.
pub fn filter_width_strong_approx(chi_prime: f64, snr: f64) -> f64 {
    (chi_prime * chi_prime * snr).powf(0.25)
}

/// Closed-form readout summary at |delta| = chi. Detunings off the
/// amplification line are rejected: there the stationary state is not
/// equivalent to a single-quadrature measurement and no closed form applies.
pub fn effective_measurement(p: &RotatingFrameParams) -> Result<EffectiveMeasurement> {
    p.check()?;
    if !p.on_qnd_line() {
        return Err(Error::Unsupported(format!(
            "effective measurement closed forms hold only at |delta| = chi \
             (got delta = {:.6e}, chi = {:.6e})",
            p.delta, p.chi
        )));
    }
    let d = p.derived();
    let g = covariance_gain(d.chi_prime, d.snr);
    Ok(EffectiveMeasurement {
        g,
        mu_eff_ratio: mu_eff_ratio(d.chi_prime, d.snr),
        n_bad_eff: d.n_ba,
        alpha: 0.5 * 1.0_f64.atan2(g),
        gamma_filter: p.gamma * filter_width_ratio(d.chi_prime, d.snr),
    })
}

/// Leading-order stationary covariances for a strong drive, chi' >> 1,
/// monitored somewhere between the backaction-dominated extremes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrongDriveAsymptotics {
    /// Squeezed variance [(2N + 2N_ba + 1)^3 / (4 chi'^2 eta mu / gamma)]^(1/4).
    pub v_x_strong: f64,
    /// Amplified variance (chi/(eta mu))^(2/3) (v_x_strong / 2)^(1/3).
    pub v_y_strong: f64,
    /// Correlation chi v_x_strong / (2 eta mu v_y_strong).
    pub c_strong: f64,
    /// Strong-drive limit of the optimal measurement rate, gamma (N + 1/2).
    pub mu_opt_limit: f64,
    /// Squeezed variance at the optimal rate,
    /// (3^(3/4) / (2 eta^(1/4))) sqrt((2N+1)/chi').
    pub v_x_optimal: f64,
    /// v_x_strong re-expressed through the signal-to-noise ratio,
    /// snr^(3/4) / (sqrt(2 chi') eta mu / gamma); agrees with v_x_strong
    /// identically.
    pub v_x_intermediate: f64,
    /// True when chi' > 10 and chi'^-2 < snr < chi'^2, the regime the
    /// expansions were derived for.
    pub valid: bool,
}

/// Evaluate the strong-drive expansion at the given parameters. Works for
/// any input; consult `valid` before trusting the numbers.
pub fn strong_drive_asymptotics(p: &RotatingFrameParams) -> Result<StrongDriveAsymptotics> {
    p.check()?;
    let d = p.derived();
    let chip = d.chi_prime;
    let em = p.eta * p.mu;
    let tot = 2.0 * p.n_th + 2.0 * d.n_ba + 1.0;
    let v_x_strong = (tot.powi(3) / (4.0 * chip * chip * em / p.gamma)).powf(0.25);
    let v_y_strong = (p.chi / em).powf(2.0 / 3.0) * (v_x_strong / 2.0).powf(1.0 / 3.0);
    let c_strong = p.chi * v_x_strong / (2.0 * em * v_y_strong);
    let v_x_optimal =
        3.0_f64.powf(0.75) / (2.0 * p.eta.powf(0.25)) * ((2.0 * p.n_th + 1.0) / chip).sqrt();
    let v_x_intermediate = d.snr.powf(0.75) / ((2.0 * chip).sqrt() * em / p.gamma);
    let valid = chip > 10.0 && d.snr > chip.powi(-2) && d.snr < chip * chip;
    Ok(StrongDriveAsymptotics {
        v_x_strong,
        v_y_strong,
        c_strong,
        mu_opt_limit: p.gamma * (p.n_th + 0.5),
        v_x_optimal,
        v_x_intermediate,
        valid,
    })
}

/// Exact stationary covariance of the driven scheme at |delta| = chi,
/// via the effective-measurement equivalence:
/// v_x = 2 sigma_tot^2 / (1 + Gamma/gamma), c = g v_x, and v_x + v_y fixed
/// by the filter width Gamma = gamma + 2 eta mu (v_x + v_y).
///
/// Much cheaper than the Riccati solver and exact for every mu >= 0; the
/// numerical solver remains as an independent cross-check.
pub fn dmpa_closed_form(p: &RotatingFrameParams) -> Result<CovarianceState> {
    p.check()?;
    if !p.on_qnd_line() {
        return Err(Error::Unsupported(format!(
            "stationary closed form holds only at |delta| = chi \
             (got delta = {:.6e}, chi = {:.6e})",
            p.delta, p.chi
        )));
    }
    let d = p.derived();
    let s_tot = d.sigma_sq + d.n_ba;
    if p.eta * p.mu == 0.0 {
        // no conditioning: unconditional stationary state of the drive
        let c = d.chi_prime;
        return Ok(CovarianceState::new(
            d.sigma_sq,
            d.sigma_sq * (1.0 + 2.0 * c * c),
            c * d.sigma_sq,
        ));
    }
    let g = covariance_gain(d.chi_prime, d.snr);
    let gf = filter_width_ratio(d.chi_prime, d.snr);
    let v_x = 2.0 * s_tot / (1.0 + gf);
    let v_sum =
        p.gamma * filter_width_ratio_minus_one(d.chi_prime, d.snr) / (2.0 * p.eta * p.mu);
    Ok(CovarianceState::new(v_x, v_sum - v_x, g * v_x))
}

/// Exact stationary covariance of the backaction-evading readout.
///
/// The measured quadrature solves a scalar Riccati equation;
/// v_x = 2 (N + n_bad + 1/2) / (1 + sqrt(1 + 8 eta mu (N + n_bad + 1/2)/gamma)).
/// Since n_bad is capped by mu/(2 gamma), this reaches the thermal N + 1/2
/// continuously as the measurement is switched off.
pub fn bae_closed_form(p: &RotatingFrameParams) -> Result<CovarianceState> {
    p.check()?;
    let protected = p.n_th + p.n_bad + 0.5;
    let x = 8.0 * p.eta * p.mu * protected / p.gamma;
    let v_x = 2.0 * protected / (1.0 + (1.0 + x).sqrt());
    let v_y = p.n_th + 0.5 + p.derived().n_ba;
    Ok(CovarianceState::new(v_x, v_y, 0.0))
}

/// Purity 1/4 det(V) of a Gaussian state; 1 for pure states.
pub fn purity(state: &CovarianceState) -> Result<f64> {
    let det = state.det();
    if det <= 0.0 {
        return Err(Error::InvalidState(format!(
            "covariance is not positive definite: det = {det:.6e}"
        )));
    }
    Ok(0.25 / det)
}

/// Stationary purity from the closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PurityClosed {
    /// Stationary purity; `None` when the expression diverges (no
    /// conditioning: eta mu = 0 with a drive amplifying the state).
    pub value: Option<f64>,
    /// eta / (1 + gamma (2N + 1) / mu). The driven scheme's purity never
    /// falls below this; the evading readout can, since its unprotected
    /// quadrature keeps heating as mu grows.
    pub lower_bound: f64,
}

/// Closed-form stationary purity for either scheme. The driven scheme
/// requires |delta| = chi, as [`effective_measurement`] does.
pub fn purity_closed(p: &RotatingFrameParams, scheme: Scheme) -> Result<PurityClosed> {
    p.check()?;
    let gn = p.gamma * (2.0 * p.n_th + 1.0);
    let lower_bound = p.eta * p.mu / (p.mu + gn);
    let value = match scheme {
        Scheme::Dmpa => {
            if !p.on_qnd_line() {
                return Err(Error::Unsupported(format!(
                    "purity closed form holds only at |delta| = chi \
                     (got delta = {:.6e}, chi = {:.6e})",
                    p.delta, p.chi
                )));
            }
            if p.eta * p.mu == 0.0 {
                // filter width collapses to gamma and the purity expression
                // diverges; only the (vacuous) bound survives
                None
            } else {
                let d = p.derived();
                let gf = filter_width_ratio(d.chi_prime, d.snr);
                let gf_minus_1 = filter_width_ratio_minus_one(d.chi_prime, d.snr);
                Some(lower_bound * (gf + 1.0) / gf_minus_1)
            }
        }
        Scheme::Bae => {
            // equals purity(bae_closed_form) identically, arranged to stay
            // finite down to mu = 0
            let x = 8.0 * p.eta * p.mu * (p.n_th + p.n_bad + 0.5) / p.gamma;
            let v_x = 2.0 * (p.n_th + p.n_bad + 0.5) / (1.0 + (1.0 + x).sqrt());
            let v_y = (gn + p.mu) / (2.0 * p.gamma);
            Some(0.25 / (v_x * v_y))
        }
    };
    Ok(PurityClosed { value, lower_bound })
}
