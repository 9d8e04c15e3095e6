//! Second-moment dynamics of the monitored mode.
//!
//! The conditional state is Gaussian, so it is fully described by the means
//! and the covariance matrix
//!
//! ```text
//!     V = [ v_x  c  ]
//!         [ c    v_y]
//! ```
//!
//! in units with vacuum variance 1/2. The covariance obeys a matrix Riccati
//! equation
//!
//! ```text
//!     dV/dt = A V + V A' + Q - 4 eta mu V H'H V
//! ```
//!
//! with drift A = [[-gamma, delta + chi], [chi - delta, -gamma]], diffusion
//! Q = 2 gamma diag(N + 1/2 + q_x, N + 1/2 + q_y), and H selecting the
//! monitored quadratures (both for [`Scheme::Dmpa`], X only for
//! [`Scheme::Bae`]). On the amplification line delta = -chi the drift lower
//! left entry is 2 chi: the measured X quadrature drives Y while X itself
//! evolves free of Y, which is what makes the readout quantum nondemolition.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{max_drift_eigenvalue_re, RotatingFrameParams, Scheme};

/// Symmetric 2x2 covariance in (X, Y) quadrature basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovarianceState {
    pub v_x: f64,
    pub v_y: f64,
    pub c: f64,
}

impl CovarianceState {
    pub fn new(v_x: f64, v_y: f64, c: f64) -> Self {
        CovarianceState { v_x, v_y, c }
    }

    /// Isotropic thermal state of variance sigma^2 = N + 1/2 per quadrature.
    pub fn thermal(sigma_sq: f64) -> Self {
        CovarianceState::new(sigma_sq, sigma_sq, 0.0)
    }

    pub fn det(&self) -> f64 {
        self.v_x * self.v_y - self.c * self.c
    }

    /// det V >= 1/4 within `tol` (the uncertainty bound for [X, Y] = i).
    pub fn satisfies_heisenberg(&self, tol: f64) -> bool {
        self.det() >= 0.25 - tol
    }

    pub fn is_finite(&self) -> bool {
        self.v_x.is_finite() && self.v_y.is_finite() && self.c.is_finite()
    }

    fn add_scaled(&self, k: &CovarianceState, factor: f64) -> CovarianceState {
        CovarianceState::new(
            self.v_x + factor * k.v_x,
            self.v_y + factor * k.v_y,
            self.c + factor * k.c,
        )
    }
}

impl std::fmt::Display for CovarianceState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "v_x={:.9e} v_y={:.9e} c={:.9e}", self.v_x, self.v_y, self.c)
    }
}

/// Drift matrix A of the first moments, row-major.
pub fn drift_matrix(p: &RotatingFrameParams, scheme: Scheme) -> [[f64; 2]; 2] {
    match scheme {
        Scheme::Dmpa => [
            [-p.gamma, p.delta + p.chi],
            [p.chi - p.delta, -p.gamma],
        ],
        // The evading readout works in the frame of the measured quadrature;
        // the parametric drive is either off or rotated away there.
        Scheme::Bae => [[-p.gamma, 0.0], [0.0, -p.gamma]],
    }
}

/// Diagonal of the diffusion matrix Q = 2 gamma diag(sigma^2 + q_x, sigma^2 + q_y).
///
/// Monitoring adds backaction q = N_ba on every unprotected quadrature; the
/// evading scheme shields X down to the spurious n_bad. With the measurement
/// off there is no backaction at all.
pub fn noise_diag(p: &RotatingFrameParams, scheme: Scheme) -> [f64; 2] {
    let sigma_sq = p.n_th + 0.5;
    let (q_x, q_y) = if p.mu == 0.0 {
        (0.0, 0.0)
    } else {
        let n_ba = p.mu / (2.0 * p.gamma);
        match scheme {
            Scheme::Dmpa => (n_ba, n_ba),
            Scheme::Bae => (p.n_bad, n_ba),
        }
    };
    [
        2.0 * p.gamma * (sigma_sq + q_x),
        2.0 * p.gamma * (sigma_sq + q_y),
    ]
}

/// Right-hand side of the covariance Riccati equation.
pub fn riccati_rhs(v: &CovarianceState, p: &RotatingFrameParams, scheme: Scheme) -> CovarianceState {
    let a = drift_matrix(p, scheme);
    let q = noise_diag(p, scheme);
    // A V + V A' + Q, written out for the symmetric 2x2 case
    let lin_x = 2.0 * (a[0][0] * v.v_x + a[0][1] * v.c) + q[0];
    let lin_y = 2.0 * (a[1][0] * v.c + a[1][1] * v.v_y) + q[1];
    let lin_c = a[0][0] * v.c + a[0][1] * v.v_y + a[1][0] * v.v_x + a[1][1] * v.c;
    // conditioning term 4 eta mu (V H'H V)
    let em4 = 4.0 * p.eta * p.mu;
    let (con_x, con_y, con_c) = match scheme {
        Scheme::Dmpa => (
            v.v_x * v.v_x + v.c * v.c,
            v.v_y * v.v_y + v.c * v.c,
            v.c * (v.v_x + v.v_y),
        ),
        Scheme::Bae => (v.v_x * v.v_x, v.c * v.c, v.v_x * v.c),
    };
    CovarianceState::new(
        lin_x - em4 * con_x,
        lin_y - em4 * con_y,
        lin_c - em4 * con_c,
    )
}

/// One classical Runge-Kutta step of `f`.
pub fn rk4_step<F>(v: &CovarianceState, dt: f64, f: F) -> CovarianceState
where
    F: Fn(&CovarianceState) -> CovarianceState,
{
    let k1 = f(v);
    let k2 = f(&v.add_scaled(&k1, 0.5 * dt));
    let k3 = f(&v.add_scaled(&k2, 0.5 * dt));
    let k4 = f(&v.add_scaled(&k3, dt));
    CovarianceState::new(
        v.v_x + dt / 6.0 * (k1.v_x + 2.0 * k2.v_x + 2.0 * k3.v_x + k4.v_x),
        v.v_y + dt / 6.0 * (k1.v_y + 2.0 * k2.v_y + 2.0 * k3.v_y + k4.v_y),
        v.c + dt / 6.0 * (k1.c + 2.0 * k2.c + 2.0 * k3.c + k4.c),
    )
}

/// Step size that resolves damping, conditioning, and coherent rotation, all
/// evaluated at `state`. The conditioning rate grows with the variances, so
/// for strongly driven parameters this is conservative once the state has
/// relaxed.
pub fn default_time_step(
    p: &RotatingFrameParams,
    _scheme: Scheme,
    state: &CovarianceState,
) -> f64 {
    let damping = p.gamma;
    let conditioning = p.gamma + 2.0 * p.eta * p.mu * (state.v_x + state.v_y);
    let rotation = (p.delta + p.chi).abs().max((p.chi - p.delta).abs());
    let mut dt = (0.01 / damping).min(0.01 / conditioning);
    if rotation > 0.0 {
        dt = dt.min(0.01 / rotation);
    }
    dt
}

/// Covariance trajectory from [`integrate_riccati`]; sampled once per step.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariancePath {
    /// Sample times, in the same units as 1/rates.
    pub t: Vec<f64>,
    pub states: Vec<CovarianceState>,
    pub gamma: f64,
}

impl CovariancePath {
    pub fn final_state(&self) -> CovarianceState {
        *self.states.last().expect("path never empty")
    }

    /// CSV export with header `t,v_x,v_y,c,purity`; time in units of 1/gamma.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,v_x,v_y,c,purity\n");
        for (t, s) in self.t.iter().zip(&self.states) {
            let purity = 0.25 / s.det();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                t * self.gamma,
                s.v_x,
                s.v_y,
                s.c,
                purity
            ));
        }
        out
    }
}

/// Variances beyond this multiple of sigma^2 count as diverged.
const DIVERGENCE_FACTOR: f64 = 1e12;
/// Absolute slack on the uncertainty bound det V >= 1/4.
pub const HEISENBERG_TOL: f64 = 1e-9;

/// Integrate the covariance Riccati equation with fixed-step RK4, sampling
/// after every step. Unstable parameters are allowed; runaway growth is
/// reported as [`Error::Diverged`] with the time it was detected.
pub fn integrate_riccati(
    initial: &CovarianceState,
    p: &RotatingFrameParams,
    scheme: Scheme,
    t_end: f64,
    dt: f64,
) -> Result<CovariancePath> {
    p.check()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "t_end must be positive, got {t_end}"
        )));
    }
    if !initial.is_finite() || !initial.satisfies_heisenberg(HEISENBERG_TOL) {
        return Err(Error::InvalidState(format!(
            "initial covariance violates the uncertainty bound: det = {:.6e}",
            initial.det()
        )));
    }

    let bound = DIVERGENCE_FACTOR * (p.n_th + 0.5);
    let rhs = |v: &CovarianceState| riccati_rhs(v, p, scheme);

    let mut t = 0.0_f64;
    let mut v = *initial;
    let mut path = CovariancePath {
        t: vec![0.0],
        states: vec![v],
        gamma: p.gamma,
    };
    // last step shrinks to land on t_end exactly
    while t < t_end * (1.0 - 1e-12) {
        let step = dt.min(t_end - t);
        v = rk4_step(&v, step, rhs);
        t += step;
        for (entry, value) in [("v_x", v.v_x), ("v_y", v.v_y), ("c", v.c)] {
            if !value.is_finite() || value.abs() > bound {
                return Err(Error::Diverged { t, entry, value });
            }
        }
        path.t.push(t);
        path.states.push(v);
    }

    let last = path.final_state();
    if !last.satisfies_heisenberg(HEISENBERG_TOL) {
        return Err(Error::InvalidState(format!(
            "integration lost the uncertainty bound: det = {:.6e} at t = {:.6e}; reduce dt",
            last.det(),
            t
        )));
    }
    Ok(path)
}

/// Stationary covariance of the unconditional (record-averaged) dynamics,
/// i.e. the solution of A V + V A' + Q = 0. Closed form for the 2x2 case.
pub fn lyapunov_unconditional(
    p: &RotatingFrameParams,
    scheme: Scheme,
) -> Result<CovarianceState> {
    p.check()?;
    let max_re = max_drift_eigenvalue_re(p, scheme);
    if max_re >= 0.0 {
        return Err(Error::UnstableDrift { max_re });
    }
    let a = drift_matrix(p, scheme);
    let (a12, a21) = (a[0][1], a[1][0]);
    let q = noise_diag(p, scheme);
    let gamma = p.gamma;
    // stable drift guarantees gamma^2 > a12 a21
    let c = (a21 * q[0] + a12 * q[1]) / (4.0 * (gamma * gamma - a12 * a21));
    let v_x = (q[0] + 2.0 * a12 * c) / (2.0 * gamma);
    let v_y = (q[1] + 2.0 * a21 * c) / (2.0 * gamma);
    Ok(CovarianceState::new(v_x, v_y, c))
}

/// Residual tolerance of [`steady_state_numeric`], as a multiple of
/// gamma * sigma^2.
pub const STEADY_RESIDUAL_TOL: f64 = 1e-12;

/// Stationary covariance of the conditional dynamics.
///
/// With the conditioning term absent (eta mu = 0) the equation is linear and
/// solved exactly via [`lyapunov_unconditional`]. Otherwise a relaxation
/// integration to t = 20/gamma seeds a damped Newton iteration on the Riccati
/// right-hand side; the step is halved (up to 20 times) whenever the residual
/// grows. Convergence means a residual below 1e-12 gamma sigma^2 or, for
/// states large enough that this target drops under the f64 evaluation noise
/// of the right-hand side, below that noise floor.
pub fn steady_state_numeric(p: &RotatingFrameParams, scheme: Scheme) -> Result<CovarianceState> {
    p.check()?;
    let max_re = max_drift_eigenvalue_re(p, scheme);
    if max_re >= 0.0 {
        return Err(Error::UnstableDrift { max_re });
    }
    if p.eta * p.mu == 0.0 {
        return lyapunov_unconditional(p, scheme);
    }

    let sigma_sq = p.n_th + 0.5;
    let tol = STEADY_RESIDUAL_TOL * p.gamma * sigma_sq;
    let seed = relaxation_seed(p, scheme);
    newton_polish(seed, p, scheme, tol)
}

/// Coarse relaxation toward the stationary state, used only as a Newton seed.
/// The step adapts to the local stiffness; accuracy is not the goal here.
fn relaxation_seed(p: &RotatingFrameParams, scheme: Scheme) -> CovarianceState {
    let sigma_sq = p.n_th + 0.5;
    let rotation = (p.delta + p.chi).abs().max((p.chi - p.delta).abs());
    let t_end = 20.0 / p.gamma;
    let rhs = |v: &CovarianceState| riccati_rhs(v, p, scheme);

    let mut v = CovarianceState::thermal(sigma_sq);
    let mut t = 0.0;
    // settle threshold well below gamma sigma^2; Newton does the rest
    let settle = 1e-9 * p.gamma * sigma_sq;
    for _ in 0..5_000_000 {
        if t >= t_end {
            break;
        }
        let rate = p.gamma + 2.0 * p.eta * p.mu * (v.v_x + v.v_y) + rotation;
        let dt = (0.2 / rate).min(t_end - t);
        v = rk4_step(&v, dt, rhs);
        t += dt;
        let r = rhs(&v);
        if r.v_x.abs().max(r.v_y.abs()).max(r.c.abs()) < settle {
            break;
        }
    }
    v
}

/// Smallest residual [`riccati_rhs`] can resolve at `v` in f64 arithmetic.
///
/// Each component of the right-hand side is a sum of terms that cancel at the
/// fixed point, so its rounded value carries noise of order machine epsilon
/// times the largest term. Strong driving inflates v_y (and with it the
/// damping and conditioning terms) far above gamma sigma^2, pushing this floor
/// over any fixed absolute tolerance; an iterate whose residual sits under the
/// floor is indistinguishable from the exact root at evaluation precision.
/// [`steady_state_numeric`] accepts at this floor when it exceeds the usual
/// tolerance, so callers auditing solver output should compare against it too.
pub fn residual_floor(v: &CovarianceState, p: &RotatingFrameParams, scheme: Scheme) -> f64 {
    let a = drift_matrix(p, scheme);
    let q = noise_diag(p, scheme);
    let mag_x = 2.0 * (a[0][0].abs() * v.v_x.abs() + a[0][1].abs() * v.c.abs()) + q[0].abs();
    let mag_y = 2.0 * (a[1][0].abs() * v.c.abs() + a[1][1].abs() * v.v_y.abs()) + q[1].abs();
    let mag_c = a[0][0].abs() * v.c.abs()
        + a[0][1].abs() * v.v_y.abs()
        + a[1][0].abs() * v.v_x.abs()
        + a[1][1].abs() * v.c.abs();
    let em4 = 4.0 * p.eta * p.mu;
    let (con_x, con_y, con_c) = match scheme {
        Scheme::Dmpa => (
            v.v_x * v.v_x + v.c * v.c,
            v.v_y * v.v_y + v.c * v.c,
            v.c.abs() * (v.v_x.abs() + v.v_y.abs()),
        ),
        Scheme::Bae => (v.v_x * v.v_x, v.c * v.c, v.v_x.abs() * v.c.abs()),
    };
    let mag = (mag_x + em4 * con_x)
        .max(mag_y + em4 * con_y)
        .max(mag_c + em4 * con_c);
    16.0 * f64::EPSILON * mag
}

fn newton_polish(
    seed: CovarianceState,
    p: &RotatingFrameParams,
    scheme: Scheme,
    tol: f64,
) -> Result<CovarianceState> {
    let rhs = |v: &CovarianceState| riccati_rhs(v, p, scheme);
    let norm = |r: &CovarianceState| r.v_x.abs().max(r.v_y.abs()).max(r.c.abs());

    let mut v = seed;
    let mut r = rhs(&v);
    let mut res = norm(&r);
    const MAX_ITER: usize = 100;
    for iter in 0..MAX_ITER {
        if res < tol.max(residual_floor(&v, p, scheme)) {
            return Ok(v);
        }
        let jac = riccati_jacobian(&v, p, scheme);
        let step = solve3(jac, [-r.v_x, -r.v_y, -r.c]).ok_or(Error::NoConvergence {
            residual: res,
            iterations: iter,
            last: v,
        })?;
        // damping: halve until the residual stops growing
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let cand = CovarianceState::new(
                v.v_x + lambda * step[0],
                v.v_y + lambda * step[1],
                v.c + lambda * step[2],
            );
            let rc = rhs(&cand);
            let resc = norm(&rc);
            if resc < res || resc < tol {
                v = cand;
                r = rc;
                res = resc;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                residual: res,
                iterations: iter,
                last: v,
            });
        }
    }
    if res < tol.max(residual_floor(&v, p, scheme)) {
        Ok(v)
    } else {
        Err(Error::NoConvergence {
            residual: res,
            iterations: MAX_ITER,
            last: v,
        })
    }
}

/// Jacobian of [`riccati_rhs`] with respect to (v_x, v_y, c).
fn riccati_jacobian(
    v: &CovarianceState,
    p: &RotatingFrameParams,
    scheme: Scheme,
) -> [[f64; 3]; 3] {
    let a = drift_matrix(p, scheme);
    let (a12, a21) = (a[0][1], a[1][0]);
    let g2 = 2.0 * p.gamma;
    let em4 = 4.0 * p.eta * p.mu;
    let em8 = 2.0 * em4;
    match scheme {
        Scheme::Dmpa => [
            [-g2 - em8 * v.v_x, 0.0, 2.0 * a12 - em8 * v.c],
            [0.0, -g2 - em8 * v.v_y, 2.0 * a21 - em8 * v.c],
            [
                a21 - em4 * v.c,
                a12 - em4 * v.c,
                -g2 - em4 * (v.v_x + v.v_y),
            ],
        ],
        Scheme::Bae => [
            [-g2 - em8 * v.v_x, 0.0, 0.0],
            [0.0, -g2, -em8 * v.c],
            [-em4 * v.c, 0.0, -g2 - em4 * v.v_x],
        ],
    }
}

/// Dense 3x3 solve with partial pivoting; returns `None` on a singular matrix.
#[allow(clippy::needless_range_loop)] // elimination touches two rows at once
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()
        })?;
        if a[pivot][col].abs() < f64::MIN_POSITIVE {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut sum = b[row];
        for k in (row + 1)..3 {
            sum -= a[row][k] * x[k];
        }
        x[row] = sum / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::DetuningSign;

    fn qnd(gamma: f64, chi: f64) -> RotatingFrameParams {
        RotatingFrameParams::qnd(gamma, chi, DetuningSign::Minus)
    }

    #[test]
    fn drift_on_amplification_line() {
        let a = drift_matrix(&qnd(1.0, 0.5), Scheme::Dmpa);
        assert_eq!(a, [[-1.0, 0.0], [1.0, -1.0]]);
    }

    #[test]
    fn drift_general_detuning() {
        let p = RotatingFrameParams {
            delta: 0.5,
            ..qnd(1.0, 2.0)
        };
        let a = drift_matrix(&p, Scheme::Dmpa);
        assert_eq!(a, [[-1.0, 2.5], [1.5, -1.0]]);
    }

    #[test]
    fn drift_bae_isotropic() {
        let p = qnd(3.0, 2.0);
        assert_eq!(drift_matrix(&p, Scheme::Bae), [[-3.0, 0.0], [0.0, -3.0]]);
    }

    #[test]
    fn rhs_relaxes_undriven_mode_toward_thermal() {
        // dv_x/dt = 2 gamma (sigma^2 - v_x) with no drive or monitoring
        let p = qnd(1.3, 0.0).with_thermal(4.2);
        let r = riccati_rhs(&CovarianceState::thermal(4.7), &p, Scheme::Dmpa);
        assert!((r.v_x - 2.0 * 1.3 * (4.2 + 0.5 - 4.7)).abs() < 1e-12);
        assert!((r.v_y - r.v_x).abs() < 1e-12);
        assert!(r.c.abs() < 1e-15);
        let above = riccati_rhs(&CovarianceState::thermal(5.0), &p, Scheme::Dmpa);
        assert!(above.v_x < 0.0); // v_x above sigma^2 decays
    }

    #[test]
    fn rhs_fixed_point_of_driven_unmonitored_mode() {
        // stationary covariance (sigma^2, sigma^2 (1 + 2 chi'^2), chi' sigma^2)
        let p = qnd(1.0, 0.7).with_thermal(0.3);
        let s2 = 0.8;
        let chip = 0.7;
        let v = CovarianceState::new(s2, s2 * (1.0 + 2.0 * chip * chip), chip * s2);
        let r = riccati_rhs(&v, &p, Scheme::Dmpa);
        assert!(r.v_x.abs() < 1e-12 && r.v_y.abs() < 1e-12 && r.c.abs() < 1e-12);
    }

    #[test]
    fn rhs_hand_checked_monitored_point() {
        // chi' = 1, mu = eta = 1, N = 0, state (1/2, 1/2, 0):
        // the X and Y rates cancel exactly and c grows at 2 chi v_x = 1.
        let p = qnd(1.0, 1.0).with_measurement(1.0, 1.0);
        let r = riccati_rhs(&CovarianceState::new(0.5, 0.5, 0.0), &p, Scheme::Dmpa);
        assert!(r.v_x.abs() < 1e-14);
        assert!(r.v_y.abs() < 1e-14);
        assert!((r.c - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rhs_matches_componentwise_form() {
        // the matrix composition must reproduce the written-out equations for
        // arbitrary detuning
        let p = RotatingFrameParams {
            delta: -0.3,
            n_bad: 0.2,
            ..qnd(1.7, 1.1).with_measurement(2.3, 0.6).with_thermal(1.9)
        };
        let v = CovarianceState::new(0.9, 2.1, -0.4);
        let n_ba = p.mu / (2.0 * p.gamma);
        let s_tot = p.n_th + 0.5 + n_ba;
        let em = p.eta * p.mu;

        let r = riccati_rhs(&v, &p, Scheme::Dmpa);
        let ex = CovarianceState::new(
            2.0 * (p.delta + p.chi) * v.c - 2.0 * p.gamma * v.v_x + 2.0 * p.gamma * s_tot
                - 4.0 * em * (v.v_x * v.v_x + v.c * v.c),
            2.0 * (p.chi - p.delta) * v.c - 2.0 * p.gamma * v.v_y + 2.0 * p.gamma * s_tot
                - 4.0 * em * (v.v_y * v.v_y + v.c * v.c),
            (p.chi - p.delta) * v.v_x + (p.chi + p.delta) * v.v_y - 2.0 * p.gamma * v.c
                - 4.0 * em * v.c * (v.v_x + v.v_y),
        );
        assert!((r.v_x - ex.v_x).abs() < 1e-12);
        assert!((r.v_y - ex.v_y).abs() < 1e-12);
        assert!((r.c - ex.c).abs() < 1e-12);

        let rb = riccati_rhs(&v, &p, Scheme::Bae);
        let exb = CovarianceState::new(
            -2.0 * p.gamma * v.v_x + 2.0 * p.gamma * (p.n_th + 0.5 + p.n_bad)
                - 4.0 * em * v.v_x * v.v_x,
            -2.0 * p.gamma * v.v_y + 2.0 * p.gamma * s_tot - 4.0 * em * v.c * v.c,
            -2.0 * p.gamma * v.c - 4.0 * em * v.v_x * v.c,
        );
        assert!((rb.v_x - exb.v_x).abs() < 1e-12);
        assert!((rb.v_y - exb.v_y).abs() < 1e-12);
        assert!((rb.c - exb.c).abs() < 1e-12);
    }

    #[test]
    fn integrate_matches_linear_decay() {
        // mu = chi = 0: v_x(t) = sigma^2 + (v0 - sigma^2) exp(-2 gamma t)
        let p = qnd(1.0, 0.0).with_thermal(2.0);
        let v0 = CovarianceState::thermal(5.0);
        let path = integrate_riccati(&v0, &p, Scheme::Dmpa, 3.0, 1e-3).unwrap();
        for (t, s) in path.t.iter().zip(&path.states) {
            let expect = 2.5 + (5.0 - 2.5) * (-2.0 * t).exp();
            assert!(
                (s.v_x - expect).abs() < 1e-9,
                "t={t}: {} vs {expect}",
                s.v_x
            );
            assert!((s.c).abs() < 1e-12);
        }
    }

    #[test]
    fn integrate_forgets_initial_state() {
        let p = qnd(1.0, 1.5).with_measurement(0.8, 0.9).with_thermal(1.0);
        let a = integrate_riccati(&CovarianceState::thermal(1.5), &p, Scheme::Dmpa, 25.0, 2e-3)
            .unwrap()
            .final_state();
        let b = integrate_riccati(&CovarianceState::new(6.0, 9.0, 2.0), &p, Scheme::Dmpa, 25.0, 2e-3)
            .unwrap()
            .final_state();
        assert!((a.v_x - b.v_x).abs() < 1e-8 * a.v_x.abs());
        assert!((a.v_y - b.v_y).abs() < 1e-8 * a.v_y.abs());
        assert!((a.c - b.c).abs() < 1e-8 * a.c.abs().max(1.0));
    }

    #[test]
    fn integrate_reports_divergence_with_time() {
        // resonant drive beyond threshold, no damping margin: chi' = 2, delta = 0
        let p = RotatingFrameParams {
            delta: 0.0,
            ..qnd(1.0, 2.0)
        };
        let err = integrate_riccati(
            &CovarianceState::thermal(0.5),
            &p,
            Scheme::Dmpa,
            40.0,
            5e-3,
        )
        .unwrap_err();
        match err {
            Error::Diverged { t, .. } => assert!(t > 0.0 && t <= 40.0),
            other => panic!("expected divergence, got {other}"),
        }
    }

    #[test]
    fn integrate_rejects_unphysical_initial_state() {
        let p = qnd(1.0, 0.0);
        let err = integrate_riccati(
            &CovarianceState::new(0.1, 0.1, 0.0),
            &p,
            Scheme::Dmpa,
            1.0,
            1e-3,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidState(_)));
    }

    #[test]
    fn default_step_tracks_stiffness() {
        let p = qnd(1.0, 0.0);
        let dt0 = default_time_step(&p, Scheme::Dmpa, &CovarianceState::thermal(0.5));
        assert!((dt0 - 0.01).abs() < 1e-15);
        let strong = qnd(1.0, 0.0).with_measurement(100.0, 1.0);
        let dt1 = default_time_step(&strong, Scheme::Dmpa, &CovarianceState::thermal(0.5));
        assert!(dt1 < 1e-4 * 1.01);
        let fast = qnd(1.0, 50.0);
        let dt2 = default_time_step(&fast, Scheme::Dmpa, &CovarianceState::thermal(0.5));
        assert!((dt2 - 0.01 / 100.0).abs() < 1e-12);
    }

    #[test]
    fn lyapunov_of_driven_unmonitored_mode() {
        let p = qnd(2.0, 3.0).with_thermal(1.5);
        let v = lyapunov_unconditional(&p, Scheme::Dmpa).unwrap();
        let s2 = 2.0;
        let chip = 1.5;
        assert!((v.v_x - s2).abs() < 1e-12);
        assert!((v.v_y - s2 * (1.0 + 2.0 * chip * chip)).abs() < 1e-12);
        assert!((v.c - chip * s2).abs() < 1e-12);
        // unconditional gain c / v_x = chi'
        assert!((v.c / v.v_x - chip).abs() < 1e-12);
    }

    #[test]
    fn lyapunov_includes_backaction_when_monitored() {
        let p = qnd(1.0, 0.0).with_measurement(3.0, 1.0).with_thermal(0.0);
        // measured but record discarded: variance = sigma^2 + n_ba
        let v = lyapunov_unconditional(&p, Scheme::Dmpa).unwrap();
        assert!((v.v_x - 2.0).abs() < 1e-12);
        assert!((v.v_y - 2.0).abs() < 1e-12);
        let mut pb = p;
        pb.n_bad = 0.4;
        let vb = lyapunov_unconditional(&pb, Scheme::Bae).unwrap();
        assert!((vb.v_x - 0.9).abs() < 1e-12);
        assert!((vb.v_y - 2.0).abs() < 1e-12);
        assert_eq!(vb.c, 0.0);
    }

    #[test]
    fn lyapunov_solves_the_equation() {
        let p = RotatingFrameParams {
            delta: 1.2,
            n_bad: 0.1,
            ..qnd(1.0, 0.8).with_measurement(0.7, 0.8).with_thermal(3.0)
        };
        for scheme in [Scheme::Dmpa, Scheme::Bae] {
            let v = lyapunov_unconditional(&p, scheme).unwrap();
            let a = drift_matrix(&p, scheme);
            let q = noise_diag(&p, scheme);
            let rx = 2.0 * (a[0][0] * v.v_x + a[0][1] * v.c) + q[0];
            let ry = 2.0 * (a[1][0] * v.c + a[1][1] * v.v_y) + q[1];
            let rc = a[0][0] * v.c + a[0][1] * v.v_y + a[1][0] * v.v_x + a[1][1] * v.c;
            assert!(rx.abs() < 1e-10 && ry.abs() < 1e-10 && rc.abs() < 1e-10);
        }
    }

    #[test]
    fn lyapunov_rejects_unstable_drift() {
        let p = RotatingFrameParams {
            delta: 0.0,
            ..qnd(1.0, 2.0)
        };
        assert!(matches!(
            lyapunov_unconditional(&p, Scheme::Dmpa),
            Err(Error::UnstableDrift { .. })
        ));
    }

    #[test]
    fn steady_state_bae_closed_value() {
        // mu/gamma = 4, eta = 1, N = 0: v_x = (sqrt(17) - 1) / 16
        let p = qnd(1.0, 0.0).with_measurement(4.0, 1.0);
        let v = steady_state_numeric(&p, Scheme::Bae).unwrap();
        let expect = (17.0_f64.sqrt() - 1.0) / 16.0;
        assert!((v.v_x - expect).abs() < 1e-12, "{} vs {expect}", v.v_x);
        assert!((v.v_y - 2.5).abs() < 1e-12);
        assert!(v.c.abs() < 1e-12);
    }

    #[test]
    fn steady_state_unmonitored_reduces_to_lyapunov() {
        let p = qnd(1.0, 2.5).with_thermal(7.0);
        let a = steady_state_numeric(&p, Scheme::Dmpa).unwrap();
        let b = lyapunov_unconditional(&p, Scheme::Dmpa).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn steady_state_matches_long_integration() {
        for (chi, mu, eta, n) in [(1.0, 1.0, 1.0, 0.0), (3.0, 0.4, 0.7, 5.0)] {
            let p = qnd(1.0, chi).with_measurement(mu, eta).with_thermal(n);
            let ss = steady_state_numeric(&p, Scheme::Dmpa).unwrap();
            let dt = default_time_step(&p, Scheme::Dmpa, &CovarianceState::thermal(n + 0.5));
            let long = integrate_riccati(
                &CovarianceState::thermal(n + 0.5),
                &p,
                Scheme::Dmpa,
                30.0,
                dt,
            )
            .unwrap()
            .final_state();
            assert!((ss.v_x - long.v_x).abs() < 1e-8 * ss.v_x);
            assert!((ss.v_y - long.v_y).abs() < 1e-8 * ss.v_y);
            assert!((ss.c - long.c).abs() < 1e-8 * ss.c.abs().max(ss.v_x));
        }
    }

    #[test]
    fn steady_state_satisfies_stationarity_identity() {
        // c (gamma + 2 eta mu (v_x + v_y)) = chi v_x on the delta = -chi line
        let p = qnd(1.0, 4.0).with_measurement(2.0, 0.85).with_thermal(1.0);
        let v = steady_state_numeric(&p, Scheme::Dmpa).unwrap();
        let lhs = v.c * (p.gamma + 2.0 * p.eta * p.mu * (v.v_x + v.v_y));
        let rhs = p.chi * v.v_x;
        assert!((lhs - rhs).abs() < 1e-9 * rhs.abs());
    }

    #[test]
    fn steady_state_rejects_unstable_parameters() {
        let p = RotatingFrameParams {
            delta: 0.0,
            ..qnd(1.0, 2.0).with_measurement(1.0, 1.0)
        };
        assert!(matches!(
            steady_state_numeric(&p, Scheme::Dmpa),
            Err(Error::UnstableDrift { .. })
        ));
    }

    #[test]
    fn csv_round_trips() {
        let p = qnd(2.0, 1.0).with_measurement(0.5, 1.0);
        let path = integrate_riccati(&CovarianceState::thermal(0.5), &p, Scheme::Dmpa, 0.5, 0.05)
            .unwrap();
        let csv = path.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,v_x,v_y,c,purity"));
        let first_data = lines.next().unwrap();
        let fields: Vec<f64> = first_data.split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields.len(), 5);
        // t column is in units of 1/gamma: first step 0.05 at gamma = 2
        let row1: Vec<f64> = csv
            .lines()
            .nth(2)
            .unwrap()
            .split(',')
            .map(|f| f.parse().unwrap())
            .collect();
        assert!((row1[0] - 0.05 * 2.0).abs() < 1e-12);
        // exact re-parse of the final state
        let last: Vec<f64> = csv
            .lines()
            .last()
            .unwrap()
            .split(',')
            .map(|f| f.parse().unwrap())
            .collect();
        let fin = path.final_state();
        assert_eq!(last[1], fin.v_x);
        assert_eq!(last[2], fin.v_y);
        assert_eq!(last[3], fin.c);
    }

    #[test]
    fn solve3_recovers_known_solution() {
        let a = [[2.0, 1.0, -1.0], [-3.0, -1.0, 2.0], [-2.0, 1.0, 2.0]];
        let x = solve3(a, [8.0, -11.0, -3.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
        assert!((x[2] + 1.0).abs() < 1e-12);
        assert!(solve3([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 1.0, 1.0]], [1.0, 2.0, 1.0]).is_none());
    }
}
