//! The quasiresolvent R(z) of the maximal operator:
//!
//!   (R(z)h)(x) = theta_z(x) int_0^x phi_z h dy + phi_z(x) int_x^inf theta_z h dy,
//!
//! an integral operator that inverts (H_max - z) on truncated right-hand
//! sides, plus the boundary form on the maximal domain that the self-adjoint
//! extension theory rests on.

use num_complex::Complex64;

use crate::connection::ConnectionEvaluator;
use crate::error::{LcError, Result};
use crate::ode::{regular_pair, GridSolution, SharedGrid};

const TWO_I: Complex64 = Complex64::new(0.0, 2.0);

/// A right-hand side sampled on the solver grid.
#[derive(Debug, Clone)]
pub struct SampledFunction {
    pub grid: SharedGrid,
    pub values: Vec<Complex64>,
}

impl SampledFunction {
    pub fn new(grid: SharedGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LcError::Alignment(format!(
                "sampled function has {} values on a {}-node grid",
                values.len(),
                grid.len()
            )));
        }
        Ok(SampledFunction { grid, values })
    }

    /// exp(-(x-center)^2 / (2 width^2)) at the nodes.
    pub fn gaussian(grid: &SharedGrid, center: f64, width: f64) -> Self {
        let values = grid
            .xs
            .iter()
            .map(|&x| {
                let t = (x - center) / width;
                Complex64::new((-0.5 * t * t).exp(), 0.0)
            })
            .collect();
        SampledFunction {
            grid: grid.clone(),
            values,
        }
    }

    /// Resample tabulated data (x, value) onto the grid by linear
    /// interpolation; zero outside the table's range.
    pub fn from_table(grid: &SharedGrid, xs: &[f64], vals: &[Complex64]) -> Result<Self> {
        if xs.len() != vals.len() || xs.len() < 2 {
            return Err(LcError::Config("h table needs at least 2 aligned rows".into()));
        }
        if !xs.windows(2).all(|w| w[1] > w[0]) {
            return Err(LcError::Config("h table abscissae must increase".into()));
        }
        let values = grid
            .xs
            .iter()
            .map(|&x| {
                if x < xs[0] || x > xs[xs.len() - 1] {
                    return Complex64::ZERO;
                }
                let i = match xs.partition_point(|&t| t <= x) {
                    0 => 0,
                    k => k - 1,
                };
                let i = i.min(xs.len() - 2);
                let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
                vals[i] * (1.0 - t) + vals[i + 1] * t
            })
            .collect();
        Ok(SampledFunction {
            grid: grid.clone(),
            values,
        })
    }
}

/// L2 inner product over the grid, conjugate-linear in the second slot.
pub fn inner(grid: &SharedGrid, a: &[Complex64], b: &[Complex64]) -> Result<Complex64> {
    let prod: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x * y.conj()).collect();
    grid.integrate(&prod)
}

/// R(z) realized through the regular pair at z.
pub struct Quasiresolvent {
    pub z: Complex64,
    pub phi: GridSolution,
    pub theta: GridSolution,
}

impl Quasiresolvent {
    pub fn new(ev: &ConnectionEvaluator, z: Complex64) -> Result<Self> {
        let (phi, theta) = regular_pair(ev.grid(), z, &ev.cfg)?;
        Ok(Quasiresolvent { z, phi, theta })
    }

    pub fn from_pair(phi: GridSolution, theta: GridSolution) -> Self {
        let z = phi.z;
        Quasiresolvent { z, phi, theta }
    }

    fn check_grid(&self, h: &SampledFunction) -> Result<()> {
        if h.grid.len() != self.phi.grid.len() {
            return Err(LcError::Alignment(
                "right-hand side grid does not match the solution grid".into(),
            ));
        }
        Ok(())
    }

    /// u = R(z) h with its quasi-derivative. The x-derivative of the two
    /// integrals cancels (phi theta h - theta phi h), so
    /// p u' = (p theta') C + (p phi') S with C, S the cumulative/suffix
    /// integrals of phi h and theta h.
    pub fn apply(&self, h: &SampledFunction) -> Result<GridSolution> {
        self.check_grid(h)?;
        let grid = &self.phi.grid;
        let n = grid.len();
        let phi_h: Vec<Complex64> = (0..n).map(|i| self.phi.u[i] * h.values[i]).collect();
        let theta_h: Vec<Complex64> = (0..n).map(|i| self.theta.u[i] * h.values[i]).collect();
        let c = grid.cumulative(&phi_h)?;
        let s = grid.suffix(&theta_h)?;
        let mut u = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for i in 0..n {
            u.push(self.theta.u[i] * c[i] + self.phi.u[i] * s[i]);
            v.push(self.theta.v[i] * c[i] + self.phi.v[i] * s[i]);
        }
        Ok(GridSolution {
            grid: grid.clone(),
            z: self.z,
            u,
            v,
        })
    }

    /// Hilbert-Schmidt proxy: double quadrature of |K(x,y)|^2 for the kernel
    /// K(x,y) = theta(max) phi(min).
    pub fn kernel_hs_norm_sq(&self) -> Result<f64> {
        let grid = &self.phi.grid;
        let n = grid.len();
        let abs2 = |s: &GridSolution| -> Vec<Complex64> {
            s.u.iter().map(|c| Complex64::new(c.norm_sqr(), 0.0)).collect()
        };
        let phi2 = abs2(&self.phi);
        let theta2 = abs2(&self.theta);
        let c_phi = grid.cumulative(&phi2)?;
        let s_theta = grid.suffix(&theta2)?;
        let integrand: Vec<Complex64> = (0..n)
            .map(|i| theta2[i] * c_phi[i] + phi2[i] * s_theta[i])
            .collect();
        Ok(grid.integrate(&integrand)?.re)
    }
}

/// || (H - z) u - h ||_{L2} via per-cell defects: starting from the stored
/// state at the left node, re-integrate u' = v/p, v' = -(q + z) u - h across
/// the cell with a fine fixed-step RK4 (the source interpolated on the cell's
/// 6-node stencil) and compare with the stored state at the right node. A
/// nonzero gap in the quasi-derivative component measures the local L1 defect
/// of (H - z) u = h on the cell.
pub fn ode_residual_l2(u: &GridSolution, h: &SampledFunction) -> Result<f64> {
    let grid = &u.grid;
    let n = grid.len();
    if h.grid.len() != n {
        return Err(LcError::Alignment("residual: grid mismatch".into()));
    }
    let z = u.z;
    let rules = grid.cell_rules();
    let mut acc = 0.0;
    for (i, rule) in rules.iter().enumerate() {
        let x0 = grid.xs[i];
        let x1 = grid.xs[i + 1];
        let dx = x1 - x0;
        // Lagrange interpolant of h on the cell's 6-node stencil.
        let sx = &grid.xs[rule.base..rule.base + 6];
        let sh = &h.values[rule.base..rule.base + 6];
        let h_at = |x: f64| -> Complex64 {
            let mut sum = Complex64::ZERO;
            for k in 0..6 {
                let mut l = 1.0;
                for m in 0..6 {
                    if m != k {
                        l *= (x - sx[m]) / (sx[k] - sx[m]);
                    }
                }
                sum += sh[k] * l;
            }
            sum
        };
        let deriv = |x: f64, uu: Complex64, vv: Complex64| -> Result<(Complex64, Complex64)> {
            let (p, _, q) = grid.field.eval(x)?;
            Ok((vv / p, -(q + z) * uu - h_at(x)))
        };
        // Substeps sized so each covers at most ~0.005 of phase.
        let m = if rule.phase {
            ((rule.h / 0.005).ceil() as usize).clamp(8, 64)
        } else {
            8
        };
        let step = dx / m as f64;
        let (mut uu, mut vv) = (u.u[i], u.v[i]);
        let mut x = x0;
        for _ in 0..m {
            let (k1u, k1v) = deriv(x, uu, vv)?;
            let (k2u, k2v) = deriv(x + 0.5 * step, uu + 0.5 * step * k1u, vv + 0.5 * step * k1v)?;
            let (k3u, k3v) = deriv(x + 0.5 * step, uu + 0.5 * step * k2u, vv + 0.5 * step * k2v)?;
            let (k4u, k4v) = deriv(x + step, uu + step * k3u, vv + step * k3v)?;
            uu += step / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            vv += step / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            x += step;
        }
        let d = vv - u.v[i + 1];
        acc += (d / dx).norm_sqr() * dx;
    }
    Ok(acc.sqrt())
}

/// Both sides of the maximal-domain boundary identity
///
///   <H u, v> - <u, H v> = lim_x p (u vbar' - u' vbar)
///                       = 2i (s-(u) conj s-(v) - s+(u) conj s+(v)),
///
/// for two solutions-at-z (or resolvent outputs) with known asymptotic
/// coefficients s(u), s(v). The boundary limit is evaluated stably as
/// B(x) + 2i Im z int_x^inf u vbar (an x-independent combination), averaged
/// over the last phase window. Returns (lhs, rhs, spread of the lhs samples).
pub fn boundary_form(
    ev: &ConnectionEvaluator,
    u: &GridSolution,
    s_u: (Complex64, Complex64),
    v: &GridSolution,
    s_v: (Complex64, Complex64),
) -> Result<(Complex64, Complex64, f64)> {
    let grid = ev.grid();
    let n = grid.len();
    if u.grid.len() != n || v.grid.len() != n {
        return Err(LcError::Alignment("boundary form: grid mismatch".into()));
    }
    let im_z = u.z.im;
    let prod: Vec<Complex64> = (0..n).map(|i| u.u[i] * v.u[i].conj()).collect();
    let suffix = grid.suffix(&prod)?;
    let (tail, _) = ev.tail_inner(s_u, s_v, im_z);
    // Nodes spanning the last 4 pi of phase.
    let theta_end = *grid.thetas.last().unwrap();
    let j0 = grid
        .thetas
        .partition_point(|&t| t < theta_end - 4.0 * std::f64::consts::PI);
    let lo = grid.head_len + j0.max(1);
    let mut vals = Vec::new();
    for i in lo..n {
        // B(x) = p (u vbar' - u' vbar) = u conj(p v') - (p u') conj(v).
        let b = u.u[i] * v.v[i].conj() - u.v[i] * v.u[i].conj();
        vals.push(b + TWO_I * im_z * (suffix[i] + tail));
    }
    if vals.is_empty() {
        return Err(LcError::FitWindow { periods: 0.0 });
    }
    let mean = vals.iter().sum::<Complex64>() / vals.len() as f64;
    let spread = vals
        .iter()
        .map(|c| (c - mean).norm())
        .fold(0.0f64, f64::max);
    let rhs = TWO_I * (s_u.1 * s_v.1.conj() - s_u.0 * s_v.0.conj());
    Ok((mean, rhs, spread))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::CoefficientField;

    fn ev(f: &CoefficientField, z: Complex64) -> ConnectionEvaluator {
        ConnectionEvaluator::new(f, z).unwrap()
    }

    #[test]
    fn zero_rhs_maps_to_zero() {
        let f = CoefficientField::exponential(1.0);
        let z = Complex64::new(0.0, 1.0);
        let e = ev(&f, z);
        let qr = Quasiresolvent::new(&e, z).unwrap();
        let h = SampledFunction::new(e.grid().clone(), vec![Complex64::ZERO; e.grid().len()])
            .unwrap();
        let u = qr.apply(&h).unwrap();
        assert!(u.u.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn residual_of_quasiresolvent_output() {
        for (f, z) in [
            (CoefficientField::power_law(0.0, 4.0), Complex64::new(0.0, 0.0)),
            (CoefficientField::power_law(0.0, 4.0), Complex64::new(0.0, 1.0)),
            (CoefficientField::exponential(1.0), Complex64::new(0.0, 1.0)),
        ] {
            let e = ev(&f, Complex64::new(0.0, 1.0));
            let qr = Quasiresolvent::new(&e, z).unwrap();
            let h = SampledFunction::gaussian(e.grid(), f.x0 + 1.0, 0.4);
            let u = qr.apply(&h).unwrap();
            let h_norm = inner(e.grid(), &h.values, &h.values).unwrap().re.sqrt();
            let r = ode_residual_l2(&u, &h).unwrap();
            assert!(r <= 1e-6 * h_norm, "{:?} z={z}: residual {r}", f.family);
        }
    }

    #[test]
    fn boundary_values_match_projections() {
        // (R(z)h)(0) = phi_z(0) <h, theta_zbar> and far field ~ theta <h, phi_zbar>.
        let f = CoefficientField::power_law(0.0, 4.0);
        let z = Complex64::new(0.5, 0.8);
        let e = ev(&f, z);
        let qr = Quasiresolvent::new(&e, z).unwrap();
        let h = SampledFunction::gaussian(e.grid(), 2.0, 0.3);
        let u = qr.apply(&h).unwrap();
        // <h, theta_zbar> = int h theta_z (theta_zbar = conj theta_z).
        let ip: Complex64 = {
            let prod: Vec<Complex64> = (0..e.grid().len())
                .map(|i| h.values[i] * qr.theta.u[i])
                .collect();
            e.grid().integrate(&prod).unwrap()
        };
        assert!((u.u[0] - qr.phi.u[0] * ip).norm() < 1e-9 * ip.norm().max(1.0));

        // Far beyond supp h the phi-term integral is the full projection.
        let ip_phi: Complex64 = {
            let prod: Vec<Complex64> = (0..e.grid().len())
                .map(|i| h.values[i] * qr.phi.u[i])
                .collect();
            e.grid().integrate(&prod).unwrap()
        };
        let i = e.grid().match_index();
        let expect = qr.theta.u[i] * ip_phi;
        let rel = (u.u[i] - expect).norm() / expect.norm();
        assert!(rel < 1e-6, "far-field relative gap {rel}");
    }

    #[test]
    fn adjoint_symmetry() {
        let f = CoefficientField::exponential(1.0);
        let z = Complex64::new(0.3, 0.9);
        let e = ev(&f, z);
        let qr = Quasiresolvent::new(&e, z).unwrap();
        let qr_adj = Quasiresolvent::new(&e, z.conj()).unwrap();
        let h = SampledFunction::gaussian(e.grid(), 1.0, 0.4);
        let g = SampledFunction::gaussian(e.grid(), 2.0, 0.6);
        let lhs = inner(e.grid(), &qr.apply(&h).unwrap().u, &g.values).unwrap();
        let rhs = inner(e.grid(), &h.values, &qr_adj.apply(&g).unwrap().u).unwrap();
        assert!((lhs - rhs).norm() < 1e-8 * lhs.norm().max(1.0));
    }

    #[test]
    fn hs_norm_finite_and_stable() {
        let f = CoefficientField::power_law(0.0, 4.0);
        let z = Complex64::new(0.0, 1.0);
        let e = ev(&f, z);
        let qr = Quasiresolvent::new(&e, z).unwrap();
        let hs = qr.kernel_hs_norm_sq().unwrap();
        assert!(hs.is_finite() && hs > 0.0);
    }

    #[test]
    fn boundary_form_for_phi_pair() {
        let f = CoefficientField::power_law(0.0, 4.0);
        let z = Complex64::new(0.0, 1.0);
        let e = ev(&f, z);
        let bundle = e.solutions(z).unwrap();
        let s_phi = (bundle.coeffs.sigma_plus, bundle.coeffs.sigma_minus);
        let (lhs, rhs, spread) =
            boundary_form(&e, &bundle.phi, s_phi, &bundle.phi, s_phi).unwrap();
        let scale = lhs.norm().max(rhs.norm());
        assert!((lhs - rhs).norm() / scale < 1e-4, "lhs {lhs} rhs {rhs}");
        assert!(spread / scale < 1e-3);
        // And the lhs equals 2i Im z ||phi||^2 (independent derivation).
        let (nsq, _) = e.phi_norm_sq(&bundle).unwrap();
        assert!((lhs - TWO_I * z.im * nsq).norm() / scale < 1e-4);
    }
}
