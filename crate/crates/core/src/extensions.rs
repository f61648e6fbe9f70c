//! The self-adjoint realizations H_omega of the maximal operator, indexed by
//! a unimodular parameter omega through the asymptotic boundary condition
//! s_plus(u) = omega s_minus(u): boundary functionals, eigenvalue solver,
//! resolvent, spectral transform, and the Mobius link to the classical
//! deficiency-space parametrization.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::connection::{ConnectionCoefficients, ConnectionEvaluator};
use crate::error::{LcError, Result};
use crate::ode::{regular_pair, GridSolution};
use crate::quasiresolvent::{inner, Quasiresolvent, SampledFunction};

const I: Complex64 = Complex64::I;

/// Conditioning floor for sigma_plus - omega sigma_minus, relative to the
/// coefficient size; below it z is treated as (numerically) an eigenvalue.
const EIGEN_PROXIMITY_REL: f64 = 1e-6;

/// A point on the unit circle selecting one self-adjoint realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtensionPoint {
    pub omega: Complex64,
}

impl ExtensionPoint {
    pub fn new(omega: Complex64) -> Result<Self> {
        if (omega.norm() - 1.0).abs() > 1e-12 {
            return Err(LcError::Config(format!(
                "extension parameter must be unimodular, got |omega| = {}",
                omega.norm()
            )));
        }
        Ok(ExtensionPoint { omega })
    }

    pub fn from_arg(arg: f64) -> Self {
        ExtensionPoint {
            omega: (I * arg).exp(),
        }
    }

    pub fn arg(&self) -> f64 {
        self.omega.arg()
    }
}

/// How a pair of boundary amplitudes was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMethod {
    /// From the representation u = Gamma phi_z + R(z) h and the connection
    /// coefficients at z_ref.
    Analytic,
    /// Least-squares fit of u/a against oscillatory basis functions over the
    /// last phase window.
    AsymptoticFit,
}

/// Asymptotic amplitudes of u ~ a (s_plus e^{i Xi} + s_minus e^{-i Xi}).
#[derive(Debug, Clone, Copy)]
pub struct BoundaryData {
    pub s_plus: Complex64,
    pub s_minus: Complex64,
    pub method: BoundaryMethod,
    pub z_ref: Complex64,
    /// Relative RMS misfit for the fit method; 0 for the analytic method.
    pub fit_residual: f64,
}

impl BoundaryData {
    /// |s_plus - omega s_minus| scaled by the amplitude size.
    pub fn condition_gap(&self, omega: &ExtensionPoint) -> f64 {
        let scale = self.s_plus.norm() + self.s_minus.norm();
        if scale == 0.0 {
            return 0.0;
        }
        (self.s_plus - omega.omega * self.s_minus).norm() / scale
    }
}

/// Boundary amplitudes of u = Gamma phi_{z_ref} + R(z_ref) h, computed from
/// the connection coefficients: s_pm = Gamma sigma_pm + <h, phi_zbar> tau_pm.
/// The result does not depend on the representation point z_ref.
pub fn s_functionals(
    ev: &ConnectionEvaluator,
    gamma: Complex64,
    z_ref: Complex64,
    h: Option<&SampledFunction>,
) -> Result<BoundaryData> {
    let coeffs = ev.connect(z_ref)?;
    let ip = match h {
        None => Complex64::ZERO,
        Some(h) => {
            // <h, phi_zbar> = int h phi_z (phi at conj z is the conjugate of
            // phi at z because the initial data are real).
            let (phi, _) = regular_pair(ev.grid(), z_ref, &ev.cfg)?;
            let prod: Vec<Complex64> = phi
                .u
                .iter()
                .zip(&h.values)
                .map(|(p, hv)| hv * p)
                .collect();
            ev.grid().integrate(&prod)?
        }
    };
    Ok(BoundaryData {
        s_plus: gamma * coeffs.sigma_plus + ip * coeffs.tau_plus,
        s_minus: gamma * coeffs.sigma_minus + ip * coeffs.tau_minus,
        method: BoundaryMethod::Analytic,
        z_ref,
        fit_residual: 0.0,
    })
}

/// Boundary amplitudes by least squares over the last 4 pi of phase. The
/// basis carries the first-order tail correction e^{-+ i R_z(x)/2} of the
/// oscillatory ansatz (R_z the tail integral of the effective density), which
/// is what the true solutions do before the o(1) limit is reached; without it
/// the fit stalls at the size of R_z(X_inf).
pub fn s_fit(ev: &ConnectionEvaluator, u: &GridSolution) -> Result<BoundaryData> {
    let grid = ev.grid();
    if u.grid.len() != grid.len() {
        return Err(LcError::Alignment("s_fit: grid mismatch".into()));
    }
    let z = u.z;
    let theta_end = *grid.thetas.last().unwrap();
    let total_periods = theta_end / (2.0 * PI);
    if theta_end < 4.0 * PI {
        return Err(LcError::FitWindow {
            periods: total_periods,
        });
    }
    let j0 = grid.thetas.partition_point(|&t| t < theta_end - 4.0 * PI);
    let ws = ev.workspace();
    let m = grid.len() - grid.head_len;
    // Normal equations for y = s+ b+ + s- b-.
    let mut g_pp = Complex64::ZERO;
    let mut g_pm = Complex64::ZERO;
    let mut g_mm = Complex64::ZERO;
    let mut r_p = Complex64::ZERO;
    let mut r_m = Complex64::ZERO;
    let mut y_norm2 = 0.0;
    let mut rows: Vec<(Complex64, Complex64, Complex64)> = Vec::with_capacity(m - j0);
    for j in j0..m {
        let node = grid.head_len + j;
        let r_half = ws.r_tail(z, j) * 0.5;
        let osc = (I * grid.thetas[j]).exp();
        let bp = osc * (-I * r_half).exp();
        let bm = (I * r_half).exp() / osc;
        let y = u.u[node] / grid.a[node];
        g_pp += bp * bp.conj();
        g_pm += bm * bp.conj();
        g_mm += bm * bm.conj();
        r_p += y * bp.conj();
        r_m += y * bm.conj();
        y_norm2 += y.norm_sqr();
        rows.push((y, bp, bm));
    }
    let det = g_pp * g_mm - g_pm * g_pm.conj();
    if det.norm() < 1e-12 * (g_pp.norm() * g_mm.norm()).max(1e-300) {
        return Err(LcError::FitWindow {
            periods: total_periods,
        });
    }
    let s_plus = (g_mm * r_p - g_pm * r_m) / det;
    let s_minus = (g_pp * r_m - g_pm.conj() * r_p) / det;
    let mut misfit2 = 0.0;
    for (y, bp, bm) in rows {
        misfit2 += (y - s_plus * bp - s_minus * bm).norm_sqr();
    }
    Ok(BoundaryData {
        s_plus,
        s_minus,
        method: BoundaryMethod::AsymptoticFit,
        z_ref: z,
        fit_residual: (misfit2 / y_norm2.max(1e-300)).sqrt(),
    })
}

/// gamma_omega(z) = -(tau+ - omega tau-) / (sigma+ - omega sigma-), the
/// scalar weight of the rank-one correction turning the quasiresolvent into
/// the resolvent of H_omega.
pub fn gamma_omega(coeffs: &ConnectionCoefficients, omega: &ExtensionPoint) -> Result<Complex64> {
    let denom = coeffs.sigma_plus - omega.omega * coeffs.sigma_minus;
    let scale = coeffs.sigma_plus.norm() + coeffs.sigma_minus.norm();
    if denom.norm() < EIGEN_PROXIMITY_REL * scale {
        return Err(LcError::EigenvalueProximity {
            denom: denom.norm(),
            lambda_est: coeffs.z.re,
        });
    }
    Ok(-(coeffs.tau_plus - omega.omega * coeffs.tau_minus) / denom)
}

/// R_omega(z) h = gamma_omega(z) <h, phi_zbar> phi_z + R(z) h.
pub fn resolvent_apply(
    ev: &ConnectionEvaluator,
    omega: &ExtensionPoint,
    z: Complex64,
    h: &SampledFunction,
) -> Result<GridSolution> {
    let bundle = ev.solutions(z)?;
    let gamma = gamma_omega(&bundle.coeffs, omega)?;
    let qr = Quasiresolvent::from_pair(bundle.phi.clone(), bundle.theta.clone());
    let mut out = qr.apply(h)?;
    let prod: Vec<Complex64> = bundle
        .phi
        .u
        .iter()
        .zip(&h.values)
        .map(|(p, hv)| hv * p)
        .collect();
    let ip = ev.grid().integrate(&prod)?;
    let w = gamma * ip;
    for i in 0..out.u.len() {
        out.u[i] += w * bundle.phi.u[i];
        out.v[i] += w * bundle.phi.v[i];
    }
    Ok(out)
}

/// Cauchy-Stieltjes transform of the spectral measure of H_omega applied to
/// h: F(z) = gamma_omega(z) <h, phi_zbar> <phi_z, h> + <R(z) h, h>. For z in
/// the upper half-plane F is Herglotz (Im F > 0).
pub fn spectral_transform(
    ev: &ConnectionEvaluator,
    omega: &ExtensionPoint,
    z: Complex64,
    h: &SampledFunction,
) -> Result<Complex64> {
    let bundle = ev.solutions(z)?;
    let gamma = gamma_omega(&bundle.coeffs, omega)?;
    let qr = Quasiresolvent::from_pair(bundle.phi.clone(), bundle.theta.clone());
    let rh = qr.apply(h)?;
    let grid = ev.grid();
    let prod: Vec<Complex64> = bundle
        .phi
        .u
        .iter()
        .zip(&h.values)
        .map(|(p, hv)| hv * p)
        .collect();
    // <h, phi_zbar> = int h phi_z and <phi_z, h> = int phi_z conj h.
    let ip1 = grid.integrate(&prod)?;
    let ip2 = inner(grid, &bundle.phi.u, &h.values)?;
    let rhh = inner(grid, &rh.u, &h.values)?;
    Ok(gamma * ip1 * ip2 + rhh)
}

/// The Mobius map from the classical real deficiency parameter t (plus the
/// point at infinity) to the unimodular boundary parameter:
/// omega = (t sigma+(0) + tau+(0)) / (t sigma-(0) + tau-(0)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TParam {
    Real(f64),
    Infinity,
}

pub fn omega_from_t(coeffs0: &ConnectionCoefficients, t: TParam) -> Result<ExtensionPoint> {
    let (num, den) = match t {
        TParam::Infinity => (coeffs0.sigma_plus, coeffs0.sigma_minus),
        TParam::Real(t) => (
            t * coeffs0.sigma_plus + coeffs0.tau_plus,
            t * coeffs0.sigma_minus + coeffs0.tau_minus,
        ),
    };
    if den.norm() < 1e-300 {
        return Err(LcError::Config(
            "degenerate deficiency parameter: denominator vanishes; the limit \
             extension is omega = tau+(0)/tau-(0)"
                .into(),
        ));
    }
    // num = conj(den) holds exactly on the real axis, so the quotient is
    // unimodular to roundoff; let the constructor verify rather than
    // renormalizing.
    ExtensionPoint::new(num / den)
}

/// Inverse of `omega_from_t`: t = (tau+(0) - omega tau-(0)) / (omega sigma-(0) - sigma+(0)).
pub fn t_from_omega(coeffs0: &ConnectionCoefficients, omega: &ExtensionPoint) -> Result<TParam> {
    let den = omega.omega * coeffs0.sigma_minus - coeffs0.sigma_plus;
    let num = coeffs0.tau_plus - omega.omega * coeffs0.tau_minus;
    let scale = coeffs0.tau_plus.norm() + coeffs0.tau_minus.norm();
    if den.norm() * 1e14 < num.norm().max(scale) {
        return Ok(TParam::Infinity);
    }
    Ok(TParam::Real((num / den).re))
}

/// Scan metadata from the eigenvalue search.
#[derive(Debug, Clone, Default)]
pub struct BracketLog {
    /// Number of phase samples evaluated during the scan.
    pub samples: usize,
    /// Midpoint insertions forced by fast phase variation.
    pub refinements: usize,
    /// The lambda-brackets in which roots were isolated.
    pub brackets: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct EigenReport {
    pub omega: Complex64,
    pub interval: (f64, f64),
    pub lambdas: Vec<f64>,
    /// |sigma+(lambda) - omega sigma-(lambda)| at each root.
    pub phase_residuals: Vec<f64>,
    /// |s+ - omega s-| / (|s+| + |s-|) of the fitted eigenfunction phi_lambda.
    pub ode_residuals: Vec<f64>,
    pub bracket_log: BracketLog,
}

fn wrap_to_pi(d: f64) -> f64 {
    d - 2.0 * PI * (d / (2.0 * PI)).round()
}

/// Eigenvalues of H_omega in [lo, hi]. On the real axis sigma- = conj sigma+
/// exactly, so sigma+ - omega sigma- = 0 reduces to the scalar phase equation
/// 2 arg sigma+(lambda) = arg omega (mod 2 pi); the continuous phase is
/// tracked along an adaptively refined lambda-grid, each 2 pi crossing is
/// bracketed and polished by bisection.
pub fn eigenvalues(
    ev: &ConnectionEvaluator,
    omega: &ExtensionPoint,
    interval: (f64, f64),
    tol: f64,
) -> Result<EigenReport> {
    let (lo, hi) = interval;
    if !(hi > lo) {
        return Err(LcError::Config("empty eigenvalue interval".into()));
    }
    let raw_phase = |lam: f64| -> Result<f64> {
        let c = ev.connect_at_origin(Complex64::new(lam, 0.0))?;
        Ok(2.0 * c.sigma_plus.arg())
    };
    // Adaptive sampling: adjacent raw phases must differ by < pi/2 so the
    // unwrapped phase is unambiguous.
    let n0 = 48;
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(n0 + 1);
    for k in 0..=n0 {
        let lam = lo + (hi - lo) * k as f64 / n0 as f64;
        pts.push((lam, raw_phase(lam)?));
    }
    let mut samples = pts.len();
    let mut refinements = 0usize;
    let mut i = 0;
    while i + 1 < pts.len() {
        let (l0, p0) = pts[i];
        let (l1, p1) = pts[i + 1];
        if wrap_to_pi(p1 - p0).abs() > 0.5 * PI {
            if l1 - l0 < 1e-9 * (1.0 + l1.abs()) {
                return Err(LcError::Rescan {
                    lambda: 0.5 * (l0 + l1),
                    suggested: 4 * pts.len(),
                });
            }
            let mid = 0.5 * (l0 + l1);
            pts.insert(i + 1, (mid, raw_phase(mid)?));
            samples += 1;
            refinements += 1;
        } else {
            i += 1;
        }
    }
    // Unwrap.
    let mut g = vec![pts[0].1];
    for i in 1..pts.len() {
        let prev = g[i - 1];
        g.push(prev + wrap_to_pi(pts[i].1 - pts[i - 1].1));
    }
    let target0 = omega.arg();
    let mut brackets = Vec::new();
    let mut lambdas = Vec::new();
    for i in 0..pts.len() - 1 {
        let (ga, gb) = (g[i], g[i + 1]);
        let (gmin, gmax) = if ga <= gb { (ga, gb) } else { (gb, ga) };
        let kmin = ((gmin - target0) / (2.0 * PI)).ceil() as i64;
        let kmax = ((gmax - target0) / (2.0 * PI)).floor() as i64;
        for k in kmin..=kmax {
            let target = target0 + 2.0 * PI * k as f64;
            // Root-bracketing on the locally unwrapped phase relative to the
            // left endpoint.
            let (mut a, mut b) = (pts[i].0, pts[i + 1].0);
            if a == lo && ga == target {
                lambdas.push(a);
                brackets.push((a, a));
                continue;
            }
            brackets.push((a, b));
            let raw_a = pts[i].1;
            let base = g[i];
            let eval = |lam: f64| -> Result<f64> {
                Ok(base + wrap_to_pi(raw_phase(lam)? - raw_a) - target)
            };
            let mut fa = ga - target;
            let mut fb = gb - target;
            if fa == 0.0 {
                lambdas.push(a);
                continue;
            }
            if fb == 0.0 {
                lambdas.push(b);
                continue;
            }
            for _ in 0..80 {
                if (b - a).abs() < tol.min(1e-11) * (1.0 + a.abs()) {
                    break;
                }
                // Secant proposal, guarded to stay inside the bracket.
                let mut m = a - fa * (b - a) / (fb - fa);
                let third = (b - a) / 3.0;
                if !(m > a + 0.01 * third && m < b - 0.01 * third) {
                    m = 0.5 * (a + b);
                }
                let fm = eval(m)?;
                samples += 1;
                if fm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if (fa < 0.0) == (fm < 0.0) {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                    fb = fm;
                }
            }
            lambdas.push(0.5 * (a + b));
        }
    }
    lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    lambdas.dedup_by(|a, b| (*a - *b).abs() < 1e-8 * (1.0 + a.abs()));
    let mut phase_residuals = Vec::with_capacity(lambdas.len());
    let mut ode_residuals = Vec::with_capacity(lambdas.len());
    for &lam in &lambdas {
        let c = ev.connect_at_origin(Complex64::new(lam, 0.0))?;
        phase_residuals
            .push((c.sigma_plus - omega.omega * c.sigma_minus).norm());
        let (phi, _) = regular_pair(ev.grid(), Complex64::new(lam, 0.0), &ev.cfg)?;
        let bd = s_fit(ev, &phi)?;
        ode_residuals.push(bd.condition_gap(omega));
    }
    Ok(EigenReport {
        omega: omega.omega,
        interval,
        lambdas,
        phase_residuals,
        ode_residuals,
        bracket_log: BracketLog {
            samples,
            refinements,
            brackets,
        },
    })
}

/// phi_lambda normalized in L2 (truncation plus analytic tail), for
/// eigen-expansions: returns (phi_lambda, ||phi_lambda||).
pub fn normalized_eigenfunction(
    ev: &ConnectionEvaluator,
    lambda: f64,
) -> Result<(GridSolution, f64)> {
    let bundle = ev.solutions(Complex64::new(lambda, 0.0))?;
    let (norm_sq, _) = ev.phi_norm_sq(&bundle)?;
    Ok((bundle.phi, norm_sq.sqrt()))
}
