//! Stationary power spectra of the unconditional (record-averaged) dynamics.
//!
//! The linear Langevin system dz = A z dt + dW_Q with white noise of
//! covariance Q dt has the two-sided spectral matrix
//!
//! ```text
//!     S(omega) = (i omega - A)^-1 Q (i omega - A)^-H,
//! ```
//!
//! normalized so that integrating d omega / 2 pi returns the stationary
//! covariance. Only the symmetrized (real) cross spectrum is reported; its
//! odd imaginary part carries no variance.

use serde::Serialize;

use crate::dynamics::{drift_matrix, noise_diag, CovarianceState};
use crate::error::{Error, Result};
use crate::params::{max_drift_eigenvalue_re, RotatingFrameParams, Scheme};

/// Two-sided quadrature PSDs sampled on a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumResult {
    /// Angular frequencies, same units as the rates in the parameters.
    pub omega: Vec<f64>,
    pub s_xx: Vec<f64>,
    pub s_yy: Vec<f64>,
    pub s_xy: Vec<f64>,
    /// Damping rate used to normalize the CSV export.
    pub gamma: f64,
}

impl SpectrumResult {
    /// CSV export `omega,s_xx,s_yy,s_xy` with omega in units of gamma and
    /// the densities in units of 1/gamma, so that integrating the exported
    /// columns still reproduces dimensionless variances.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega,s_xx,s_yy,s_xy\n");
        for i in 0..self.omega.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.omega[i] / self.gamma,
                self.s_xx[i] * self.gamma,
                self.s_yy[i] * self.gamma,
                self.s_xy[i] * self.gamma,
            ));
        }
        out
    }
}

/// PSD triple (s_xx, s_yy, s_xy) at a single angular frequency.
pub fn psd_at(p: &RotatingFrameParams, scheme: Scheme, omega: f64) -> (f64, f64, f64) {
    let a = drift_matrix(p, scheme);
    let (a12, a21) = (a[0][1], a[1][0]);
    let q = noise_diag(p, scheme);
    let gamma = p.gamma;
    let g2w2 = gamma * gamma + omega * omega;
    let pp = a12 * a21;
    let det_sq = {
        let re = gamma * gamma - omega * omega - pp;
        re * re + 4.0 * gamma * gamma * omega * omega
    };
    let s_xx = (g2w2 * q[0] + a12 * a12 * q[1]) / det_sq;
    let s_yy = (a21 * a21 * q[0] + g2w2 * q[1]) / det_sq;
    let s_xy = gamma * (a21 * q[0] + a12 * q[1]) / det_sq;
    (s_xx, s_yy, s_xy)
}

/// Evaluate the spectra on a caller-provided grid. The drift must be
/// stable, otherwise no stationary spectrum exists.
pub fn unconditional_psd(
    p: &RotatingFrameParams,
    scheme: Scheme,
    omega_grid: &[f64],
) -> Result<SpectrumResult> {
    p.check()?;
    let max_re = max_drift_eigenvalue_re(p, scheme);
    if max_re >= 0.0 {
        return Err(Error::UnstableDrift { max_re });
    }
    if omega_grid.is_empty() {
        return Err(Error::InvalidParameter(
            "frequency grid must not be empty".into(),
        ));
    }
    let mut s_xx = Vec::with_capacity(omega_grid.len());
    let mut s_yy = Vec::with_capacity(omega_grid.len());
    let mut s_xy = Vec::with_capacity(omega_grid.len());
    for &w in omega_grid {
        if !w.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "non-finite frequency {w} in grid"
            )));
        }
        let (xx, yy, xy) = psd_at(p, scheme, w);
        s_xx.push(xx);
        s_yy.push(yy);
        s_xy.push(xy);
    }
    Ok(SpectrumResult {
        omega: omega_grid.to_vec(),
        s_xx,
        s_yy,
        s_xy,
        gamma: p.gamma,
    })
}

/// Relative tolerance of [`integrated_covariance`].
pub const QUADRATURE_REL_TOL: f64 = 1e-6;

/// Integrate the spectra over the whole real line, d omega / 2 pi.
///
/// The substitution omega = s tan(u) maps the line onto a finite interval
/// where the 1/omega^2 tails become a smooth bounded integrand, so adaptive
/// Simpson converges to the requested tolerance with no truncation bias.
/// The result must agree with [`lyapunov_unconditional`]; that identity is
/// what the tests pin.
pub fn integrated_covariance(p: &RotatingFrameParams, scheme: Scheme) -> Result<CovarianceState> {
    p.check()?;
    let max_re = max_drift_eigenvalue_re(p, scheme);
    if max_re >= 0.0 {
        return Err(Error::UnstableDrift { max_re });
    }
    // frequency scale of the spectral features
    let scale = p.gamma + p.chi + p.delta.abs();
    let half_pi = std::f64::consts::FRAC_PI_2;
    let lim = half_pi - 1e-9;
    let two_pi = 2.0 * std::f64::consts::PI;

    let component = |pick: fn((f64, f64, f64)) -> f64| -> f64 {
        let f = |u: f64| {
            let w = scale * u.tan();
            let jac = scale / (u.cos() * u.cos());
            pick(psd_at(p, scheme, w)) * jac / two_pi
        };
        adaptive_simpson(&f, -lim, lim, QUADRATURE_REL_TOL)
    };
    Ok(CovarianceState::new(
        component(|t| t.0),
        component(|t| t.1),
        component(|t| t.2),
    ))
}

/// Adaptive Simpson on [a, b] with relative tolerance against the running
/// whole-interval estimate.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, b - a);
    // two sweeps: the first estimate sets the absolute tolerance floor
    let tol = rel_tol * whole.abs().max(f64::MIN_POSITIVE);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}
