//! Parameters of a continuously monitored, parametrically driven mechanical
//! mode, written in the frame rotating at half the pump frequency.
//!
//! Conventions: hbar = 1; quadratures X, Y with [X, Y] = i and vacuum variance
//! 1/2. The amplitude damping rate is gamma = omega_m / Q, the parametric
//! modulation rate chi = omega_m * k_r / (2 k_0), and delta is the detuning of
//! the rotating frame from omega_m. Measurement strength mu and the thermal
//! occupation N complete the model; eta is the detection efficiency.
//!
//! Monitoring at rate mu heats the mode by N_ba = mu / (2 gamma) quanta of
//! backaction. A backaction-evading readout may still leak a spurious
//! n_bad <= N_ba into the protected quadrature; n_bad is an independent input
//! here and defaults to zero.

use serde::Serialize;

use crate::error::{Error, Result};

/// Oscillator parameters as measured in the laboratory frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabFrameParams {
    /// Mechanical angular frequency omega_m (rad/s).
    pub omega_m: f64,
    /// Quality factor Q.
    pub quality: f64,
    /// Static spring constant.
    pub k0: f64,
    /// Amplitude of the spring-constant modulation at ~2 omega_m.
    pub kr: f64,
}

/// Which quadratures the measurement couples to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scheme {
    /// Detuned parametric amplification: both quadratures are monitored and
    /// the drive squeezes one of them.
    Dmpa,
    /// Backaction evasion: only X is monitored; backaction lands in Y.
    Bae,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Dmpa => "dmpa",
            Scheme::Bae => "bae",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dmpa" => Ok(Scheme::Dmpa),
            "bae" => Ok(Scheme::Bae),
            other => Err(Error::Config(format!(
                "unknown scheme {other:?} (expected dmpa or bae)"
            ))),
        }
    }
}

/// Sign of the drive detuning on the amplification line |delta| = chi.
///
/// `Minus` (delta = -chi) squeezes X; `Plus` (delta = +chi) squeezes Y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DetuningSign {
    Minus,
    Plus,
}

impl DetuningSign {
    pub fn apply(self, chi: f64) -> f64 {
        match self {
            DetuningSign::Minus => -chi,
            DetuningSign::Plus => chi,
        }
    }
}

impl std::str::FromStr for DetuningSign {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "minus" | "-" => Ok(DetuningSign::Minus),
            "plus" | "+" => Ok(DetuningSign::Plus),
            other => Err(Error::Config(format!(
                "unknown detuning sign {other:?} (expected minus or plus)"
            ))),
        }
    }
}

/// Full rotating-frame parameter set. All rates share one unit of inverse
/// time; every output of the library is reported in units of gamma, so only
/// the ratios matter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RotatingFrameParams {
    /// Amplitude damping rate (gamma > 0).
    pub gamma: f64,
    /// Parametric modulation rate (chi >= 0).
    pub chi: f64,
    /// Drive detuning.
    pub delta: f64,
    /// Measurement strength (mu >= 0).
    pub mu: f64,
    /// Detection efficiency, 0 <= eta <= 1.
    pub eta: f64,
    /// Thermal occupation N of the bath.
    pub n_th: f64,
    /// Spurious backaction occupation leaking into the protected quadrature
    /// of a backaction-evading readout; n_bad <= mu / (2 gamma).
    pub n_bad: f64,
}

/// Quantities derived from [`RotatingFrameParams`]; recomputed on demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedParams {
    /// chi' = chi / gamma.
    pub chi_prime: f64,
    /// Backaction occupation N_ba = mu / (2 gamma).
    pub n_ba: f64,
    /// snr = eta mu (2N + 2 N_ba + 1) / gamma.
    pub snr: f64,
    /// Thermal variance sigma^2 = N + 1/2.
    pub sigma_sq: f64,
    /// Variance of the vacuum measurement Gaussian, 1/2 by convention.
    pub v_g: f64,
}

impl LabFrameParams {
    /// Hard validity check; see [`LabFrameParams::warnings`] for soft issues.
    pub fn validate(&self) -> Result<()> {
        let all = [self.omega_m, self.quality, self.k0, self.kr];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "lab-frame parameters must be finite".into(),
            ));
        }
        if self.omega_m <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "omega_m must be positive, got {}",
                self.omega_m
            )));
        }
        if self.quality <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "quality factor must be positive, got {}",
                self.quality
            )));
        }
        if self.k0 <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "k0 must be positive, got {}",
                self.k0
            )));
        }
        if self.kr < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "kr must be non-negative, got {}",
                self.kr
            )));
        }
        if self.kr >= self.k0 {
            return Err(Error::InvalidParameter(format!(
                "kr = {} must stay below k0 = {}",
                self.kr, self.k0
            )));
        }
        Ok(())
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.kr > 0.1 * self.k0 {
            w.push(format!(
                "kr/k0 = {:.3} strains the rotating-wave approximation (keep below 0.1)",
                self.kr / self.k0
            ));
        }
        w
    }

    /// Convert to rotating-frame rates: chi = omega_m kr / (2 k0),
    /// gamma = omega_m / Q. Measurement fields default to mu = 0, eta = 1,
    /// N = 0, n_bad = 0; delta defaults to the amplification line with the
    /// given sign.
    pub fn to_rotating_frame(&self, sign: DetuningSign) -> Result<RotatingFrameParams> {
        self.validate()?;
        let chi = self.omega_m * self.kr / (2.0 * self.k0);
        Ok(RotatingFrameParams {
            gamma: self.omega_m / self.quality,
            chi,
            delta: sign.apply(chi),
            mu: 0.0,
            eta: 1.0,
            n_th: 0.0,
            n_bad: 0.0,
        })
    }
}

impl RotatingFrameParams {
    /// Undriven, unmonitored mode at the given damping rate.
    pub fn bare(gamma: f64) -> Self {
        RotatingFrameParams {
            gamma,
            chi: 0.0,
            delta: 0.0,
            mu: 0.0,
            eta: 1.0,
            n_th: 0.0,
            n_bad: 0.0,
        }
    }

    /// Parameters on the amplification line delta = +/- chi.
    pub fn qnd(gamma: f64, chi: f64, sign: DetuningSign) -> Self {
        RotatingFrameParams {
            gamma,
            chi,
            delta: sign.apply(chi),
            ..Self::bare(gamma)
        }
    }

    pub fn with_measurement(mut self, mu: f64, eta: f64) -> Self {
        self.mu = mu;
        self.eta = eta;
        self
    }

    pub fn with_thermal(mut self, n_th: f64) -> Self {
        self.n_th = n_th;
        self
    }

    pub fn derived(&self) -> DerivedParams {
        let n_ba = self.mu / (2.0 * self.gamma);
        DerivedParams {
            chi_prime: self.chi / self.gamma,
            n_ba,
            snr: self.eta * self.mu * (2.0 * self.n_th + 2.0 * n_ba + 1.0) / self.gamma,
            sigma_sq: self.n_th + 0.5,
            v_g: 0.5,
        }
    }

    /// True when delta sits on the amplification line |delta| = chi within a
    /// relative tolerance of 1e-9.
    pub fn on_qnd_line(&self) -> bool {
        let scale = self.gamma.abs().max(self.chi.abs());
        (self.delta.abs() - self.chi).abs() <= 1e-9 * scale
    }

    fn hard_errors(&self) -> Vec<String> {
        let mut errors = Vec::new();
        let all = [
            self.gamma, self.chi, self.delta, self.mu, self.eta, self.n_th, self.n_bad,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            errors.push("all parameters must be finite".into());
            return errors;
        }
        if self.gamma <= 0.0 {
            errors.push(format!("gamma must be positive, got {}", self.gamma));
        }
        if self.chi < 0.0 {
            errors.push(format!("chi must be non-negative, got {}", self.chi));
        }
        if self.mu < 0.0 {
            errors.push(format!("mu must be non-negative, got {}", self.mu));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            errors.push(format!("eta must lie in [0, 1], got {}", self.eta));
        }
        if self.n_th < 0.0 {
            errors.push(format!("N must be non-negative, got {}", self.n_th));
        }
        if self.n_bad < 0.0 {
            errors.push(format!("n_bad must be non-negative, got {}", self.n_bad));
        }
        if self.gamma > 0.0 && self.n_bad > self.mu / (2.0 * self.gamma) {
            errors.push(format!(
                "n_bad = {} exceeds the backaction occupation mu/(2 gamma) = {}",
                self.n_bad,
                self.mu / (2.0 * self.gamma)
            ));
        }
        errors
    }

    /// Quick hard-error check; use [`validate`] for the full report.
    pub fn check(&self) -> Result<()> {
        match self.hard_errors().into_iter().next() {
            Some(e) => Err(Error::InvalidParameter(e)),
            None => Ok(()),
        }
    }
}

/// Outcome of [`validate`]: hard errors, soft warnings, and drift stability.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
    /// True when every drift eigenvalue has negative real part.
    pub stable: bool,
    /// Largest real part among the drift eigenvalues, -gamma + Re sqrt(chi^2 - delta^2).
    pub max_eigenvalue_re: f64,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.errors.is_empty() && self.stable
    }
}

/// Largest real part of the drift eigenvalues -gamma +/- sqrt(chi^2 - delta^2).
///
/// For chi^2 <= delta^2 the square root is imaginary and both eigenvalues
/// decay at gamma; then the drift is stable for any drive strength.
pub fn max_drift_eigenvalue_re(p: &RotatingFrameParams, scheme: Scheme) -> f64 {
    match scheme {
        Scheme::Bae => -p.gamma,
        Scheme::Dmpa => {
            let disc = p.chi * p.chi - p.delta * p.delta;
            if disc > 0.0 {
                -p.gamma + disc.sqrt()
            } else {
                -p.gamma
            }
        }
    }
}

/// Full validity report: hard constraint violations, drift stability, and
/// soft warnings (rotating-wave strain when the quality factor is known,
/// proximity to the instability threshold).
pub fn validate(p: &RotatingFrameParams, scheme: Scheme, quality: Option<f64>) -> ValidationReport {
    let errors = p.hard_errors();
    let mut warnings = Vec::new();

    let max_re = if errors.is_empty() {
        max_drift_eigenvalue_re(p, scheme)
    } else {
        f64::NAN
    };
    let stable = max_re < 0.0;

    if errors.is_empty() {
        if let Some(q) = quality {
            let chi_prime = p.chi / p.gamma;
            if chi_prime > 0.01 * q {
                warnings.push(format!(
                    "chi/gamma = {chi_prime:.3e} exceeds Q/100 = {:.3e}; \
                     the rotating-wave treatment degrades here",
                    0.01 * q
                ));
            }
        }
        // Slowest decay below gamma/10 counts as uncomfortably close to threshold.
        if stable && max_re > -0.1 * p.gamma {
            warnings.push(format!(
                "drift decays at only {:.3e} gamma; parameters sit close to the \
                 instability threshold",
                -max_re / p.gamma
            ));
        }
    }

    ValidationReport {
        errors,
        warnings,
        stable,
        max_eigenvalue_re: max_re,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAU: f64 = std::f64::consts::TAU;

    #[test]
    fn lab_frame_conversion_unmodulated() {
        let lab = LabFrameParams {
            omega_m: TAU * 1e6,
            quality: 1e5,
            k0: 1.0,
            kr: 0.0,
        };
        let p = lab.to_rotating_frame(DetuningSign::Minus).unwrap();
        assert_eq!(p.chi, 0.0);
        assert!((p.gamma - TAU * 10.0).abs() < 1e-9);
        assert_eq!(p.mu, 0.0);
        assert_eq!(p.eta, 1.0);
        assert_eq!(p.n_th, 0.0);
        assert_eq!(p.n_bad, 0.0);
    }

    #[test]
    fn lab_frame_conversion_modulated() {
        let lab = LabFrameParams {
            omega_m: 1.0,
            quality: 1.0,
            k0: 1.0,
            kr: 0.2,
        };
        let p = lab.to_rotating_frame(DetuningSign::Minus).unwrap();
        assert!((p.chi - 0.1).abs() < 1e-15);
        assert!((p.gamma - 1.0).abs() < 1e-15);
        assert_eq!(p.delta, -p.chi);
    }

    #[test]
    fn lab_frame_chi_prime_ten() {
        let lab = LabFrameParams {
            omega_m: 1e6,
            quality: 1e3,
            k0: 1.0,
            kr: 0.02,
        };
        let p = lab.to_rotating_frame(DetuningSign::Minus).unwrap();
        assert!((p.derived().chi_prime - 10.0).abs() < 1e-12);
        // kr/k0 = 0.02 is comfortably inside the rotating-wave regime
        assert!(lab.warnings().is_empty());
    }

    #[test]
    fn lab_frame_rwa_warning() {
        let lab = LabFrameParams {
            omega_m: 1.0,
            quality: 10.0,
            k0: 1.0,
            kr: 0.15,
        };
        assert_eq!(lab.warnings().len(), 1);
        // still convertible, only a warning
        assert!(lab.to_rotating_frame(DetuningSign::Minus).is_ok());
    }

    #[test]
    fn lab_frame_kr_above_k0_rejected() {
        let lab = LabFrameParams {
            omega_m: 1.0,
            quality: 10.0,
            k0: 1.0,
            kr: 1.0,
        };
        assert!(lab.validate().is_err());
    }

    #[test]
    fn stability_on_amplification_line() {
        let p = RotatingFrameParams::qnd(1.0, 5.0, DetuningSign::Minus);
        let r = validate(&p, Scheme::Dmpa, None);
        assert!(r.stable);
        assert!((r.max_eigenvalue_re + 1.0).abs() < 1e-12);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn resonant_strong_drive_unstable() {
        let p = RotatingFrameParams {
            delta: 0.0,
            ..RotatingFrameParams::qnd(1.0, 5.0, DetuningSign::Minus)
        };
        let r = validate(&p, Scheme::Dmpa, None);
        assert!(!r.stable);
        assert!((r.max_eigenvalue_re - 4.0).abs() < 1e-12);
        assert!(!r.ok());
    }

    #[test]
    fn near_threshold_warns() {
        let p = RotatingFrameParams {
            delta: 4.9,
            ..RotatingFrameParams::qnd(1.0, 5.0, DetuningSign::Minus)
        };
        let r = validate(&p, Scheme::Dmpa, None);
        assert!(r.stable);
        // max Re = -1 + sqrt(25 - 24.01) = -0.005006...
        assert!(r.max_eigenvalue_re < 0.0 && r.max_eigenvalue_re > -0.01);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn derived_quantities() {
        let p = RotatingFrameParams::qnd(2.0, 6.0, DetuningSign::Minus)
            .with_measurement(8.0, 0.5)
            .with_thermal(3.0);
        let d = p.derived();
        assert!((d.chi_prime - 3.0).abs() < 1e-15);
        assert!((d.n_ba - 2.0).abs() < 1e-15);
        // snr = 0.5 * 8 * (6 + 4 + 1) / 2 = 22
        assert!((d.snr - 22.0).abs() < 1e-12);
        assert!((d.sigma_sq - 3.5).abs() < 1e-15);
        assert_eq!(d.v_g, 0.5);
    }

    #[test]
    fn n_bad_bound_enforced() {
        let mut p = RotatingFrameParams::qnd(1.0, 0.0, DetuningSign::Minus).with_measurement(2.0, 1.0);
        p.n_bad = 0.5;
        assert!(p.check().is_ok()); // n_ba = 1.0, bound holds
        p.n_bad = 1.5;
        assert!(p.check().is_err());
        let r = validate(&p, Scheme::Bae, None);
        assert_eq!(r.errors.len(), 1);
        assert!(!r.ok());
    }

    #[test]
    fn eta_out_of_range_rejected() {
        let p = RotatingFrameParams::qnd(1.0, 1.0, DetuningSign::Minus).with_measurement(1.0, 1.2);
        assert!(p.check().is_err());
    }

    #[test]
    fn rwa_warning_from_quality() {
        let p = RotatingFrameParams::qnd(1.0, 50.0, DetuningSign::Minus);
        let r = validate(&p, Scheme::Dmpa, Some(1e3));
        assert!(r.stable);
        assert_eq!(r.warnings.len(), 1);
        let r2 = validate(&p, Scheme::Dmpa, Some(1e5));
        assert!(r2.warnings.is_empty());
    }

    #[test]
    fn qnd_line_detection() {
        let p = RotatingFrameParams::qnd(1.0, 3.0, DetuningSign::Plus);
        assert!(p.on_qnd_line());
        let q = RotatingFrameParams {
            delta: 2.9,
            ..p
        };
        assert!(!q.on_qnd_line());
    }
}
