//! Connection coefficients sigma+-(z), tau+-(z): the scalars expressing the
//! regular pair (phi_z, theta_z) through the Jost pair (f_z, conj f_{zbar}),
//!
//!   phi_z   = sigma+ f_z + sigma- conj f_zbar,
//!   theta_z = tau+   f_z + tau-   conj f_zbar,
//!
//! recovered from Wronskians: 2i sigma+ = {phi, conj f_zbar},
//! 2i sigma- = -{phi, f}, and the tau analogues. Everything downstream
//! (eigenvalues, resolvents, spectral data) is built from these four entire
//! functions of z.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;

use crate::error::Result;
use crate::field::CoefficientField;
use crate::grid::{Grid, NODES_PER_PERIOD};
use crate::jost::{default_x_inf, default_x_inf_with, JostSolution, VolterraWorkspace};
use crate::ode::{regular_pair, wronskian, GridSolution, SharedGrid, StepperConfig};

const TWO_I: Complex64 = Complex64::new(0.0, 2.0);

#[derive(Debug, Clone, Copy)]
pub struct ConnectionCoefficients {
    pub z: Complex64,
    pub sigma_plus: Complex64,
    pub sigma_minus: Complex64,
    pub tau_plus: Complex64,
    pub tau_minus: Complex64,
    /// Largest deviation of the defining Wronskians between the two
    /// evaluation nodes (constancy check).
    pub wronskian_spread: f64,
}

impl ConnectionCoefficients {
    /// |2i (sigma+ tau- - sigma- tau+) - 1|: the normalization identity that
    /// every consistent set of coefficients satisfies exactly.
    pub fn normalization_gap(&self) -> f64 {
        (TWO_I * (self.sigma_plus * self.tau_minus - self.sigma_minus * self.tau_plus)
            - Complex64::ONE)
            .norm()
    }
}

/// All solutions entering one connection computation, shared for reuse by
/// the resolvent and spectral layers.
pub struct ConnectionBundle {
    pub coeffs: ConnectionCoefficients,
    pub phi: GridSolution,
    pub theta: GridSolution,
    pub f: JostSolution,
    /// conj f_{zbar}, sampled as a solution at z.
    pub fbar: GridSolution,
}

/// Reusable context: one grid + cached z-independent Volterra data, plus a
/// memo of coefficients already computed on this grid.
pub struct ConnectionEvaluator {
    ws: VolterraWorkspace,
    pub cfg: StepperConfig,
    pub tol: f64,
    memo: Mutex<HashMap<(u64, u64), ConnectionCoefficients>>,
}

impl ConnectionEvaluator {
    /// Build with the default truncation point for the given scale of z
    /// (pass the largest |z| you intend to use on this evaluator).
    pub fn new(field: &CoefficientField, z_scale: Complex64) -> Result<Self> {
        let x_inf = default_x_inf(field, z_scale)?;
        let grid = Arc::new(Grid::build(field, x_inf, NODES_PER_PERIOD)?);
        Self::with_grid(grid)
    }

    /// Build with a looser tail-truncation threshold. Useful for eigenvalue
    /// scans over large real intervals, where the default truncation point
    /// grows quickly with |z| and the extra accuracy is not needed: the root
    /// condition is solved to self-consistency, so a looser tail only shifts
    /// the roots by about the threshold value.
    pub fn with_tail_threshold(
        field: &CoefficientField,
        z_scale: Complex64,
        threshold: f64,
    ) -> Result<Self> {
        let x_inf = default_x_inf_with(field, z_scale, threshold)?;
        let grid = Arc::new(Grid::build(field, x_inf, NODES_PER_PERIOD)?);
        Self::with_grid(grid)
    }

    pub fn with_grid(grid: SharedGrid) -> Result<Self> {
        Ok(ConnectionEvaluator {
            ws: VolterraWorkspace::new(&grid)?,
            cfg: StepperConfig::default(),
            tol: 1e-12,
            memo: Mutex::new(HashMap::new()),
        })
    }

    pub fn grid(&self) -> &SharedGrid {
        &self.ws.grid
    }

    pub fn field(&self) -> &CoefficientField {
        &self.ws.grid.field
    }

    pub fn workspace(&self) -> &VolterraWorkspace {
        &self.ws
    }

    /// The Jost pair at z: (f_z, conj f_{zbar}).
    pub fn jost_pair(&self, z: Complex64) -> Result<(JostSolution, GridSolution)> {
        let f = self.ws.jost(z, self.tol, &self.cfg)?;
        let fzbar = self.ws.jost(z.conj(), self.tol, &self.cfg)?;
        let fbar = GridSolution {
            grid: self.ws.grid.clone(),
            z,
            u: fzbar.sol.u.iter().map(|c| c.conj()).collect(),
            v: fzbar.sol.v.iter().map(|c| c.conj()).collect(),
        };
        Ok((f, fbar))
    }

    /// Full computation: regular pair, Jost pair, coefficients from the
    /// Wronskians at the phase midpoint, constancy-checked at a second node.
    pub fn solutions(&self, z: Complex64) -> Result<ConnectionBundle> {
        let grid = self.grid();
        let (phi, theta) = regular_pair(grid, z, &self.cfg)?;
        let (f, fbar) = self.jost_pair(z)?;
        let i1 = grid.match_index();
        // Second check node: three quarters into the phase section.
        let i2 = grid.head_len + 3 * (grid.len() - 1 - grid.head_len) / 4;
        let at = |i: usize| {
            (
                wronskian(&phi, &fbar, i) / TWO_I,
                -wronskian(&phi, &f.sol, i) / TWO_I,
                wronskian(&theta, &fbar, i) / TWO_I,
                -wronskian(&theta, &f.sol, i) / TWO_I,
            )
        };
        let (sp, sm, tp, tm) = at(i1);
        let (sp2, sm2, tp2, tm2) = at(i2);
        let spread = (sp - sp2)
            .norm()
            .max((sm - sm2).norm())
            .max((tp - tp2).norm())
            .max((tm - tm2).norm());
        let coeffs = ConnectionCoefficients {
            z,
            sigma_plus: sp,
            sigma_minus: sm,
            tau_plus: tp,
            tau_minus: tm,
            wronskian_spread: spread,
        };
        Ok(ConnectionBundle {
            coeffs,
            phi,
            theta,
            f,
            fbar,
        })
    }

    /// Coefficients only, memoized per z on this evaluator's grid.
    pub fn connect(&self, z: Complex64) -> Result<ConnectionCoefficients> {
        let key = (z.re.to_bits(), z.im.to_bits());
        if let Some(c) = self.memo.lock().unwrap().get(&key) {
            return Ok(*c);
        }
        let c = self.solutions(z)?.coeffs;
        self.memo.lock().unwrap().insert(key, c);
        Ok(c)
    }

    /// Fast path for dense scans: the Wronskians are evaluated at x = 0,
    /// where phi and theta are known exactly from their boundary data, so no
    /// regular-pair integration is needed. Analytically identical to
    /// `connect` (Wronskians are x-independent).
    pub fn connect_at_origin(&self, z: Complex64) -> Result<ConnectionCoefficients> {
        let key = (z.re.to_bits(), !z.im.to_bits());
        if let Some(c) = self.memo.lock().unwrap().get(&key) {
            return Ok(*c);
        }
        let (f, fbar) = self.jost_pair(z)?;
        let inits = crate::ode::regular_inits(self.field())?;
        let [phi0, theta0] = inits;
        let w = |s: (Complex64, Complex64), g: &GridSolution| s.1 * g.u[0] - s.0 * g.v[0];
        let c = ConnectionCoefficients {
            z,
            sigma_plus: w(phi0, &fbar) / TWO_I,
            sigma_minus: -w(phi0, &f.sol) / TWO_I,
            tau_plus: w(theta0, &fbar) / TWO_I,
            tau_minus: -w(theta0, &f.sol) / TWO_I,
            wronskian_spread: 0.0,
        };
        self.memo.lock().unwrap().insert(key, c);
        Ok(c)
    }

    /// Inner product of the far tails: int_{X_inf}^inf u conj(v) dx for two
    /// solutions at the same z with asymptotic data u ~ a (su+ e^{i Xi} psi_z
    /// + su- e^{-i Xi} conj psi_zbar). Returns the smooth part and a bound on
    /// the neglected oscillatory cross terms.
    pub fn tail_inner(
        &self,
        s_u: (Complex64, Complex64),
        s_v: (Complex64, Complex64),
        im_z: f64,
    ) -> (Complex64, f64) {
        let grid = self.grid();
        let x = grid.x_inf();
        let t = grid.field.a2_tail_integral(x).unwrap_or(0.0);
        let ec = |c: f64| -> f64 {
            if c.abs() < 1e-12 {
                t * (1.0 + 0.5 * c * t)
            } else {
                ((c * t).exp() - 1.0) / c
            }
        };
        // |psi_z(x)|^2 = e^{Im z T(x)} under the smooth tail model.
        let smooth = s_u.0 * s_v.0.conj() * ec(im_z) + s_u.1 * s_v.1.conj() * ec(-im_z);
        let last = grid.len() - 1;
        let a2 = grid.a[last] * grid.a[last];
        let xi = grid.xi[last];
        let cross = (s_u.0.norm() * s_v.1.norm() + s_u.1.norm() * s_v.0.norm()) * a2 / (2.0 * xi);
        (smooth, cross)
    }

    /// ||phi_z||^2 over [0, inf): grid quadrature plus the analytic tail.
    pub fn phi_norm_sq(&self, bundle: &ConnectionBundle) -> Result<(f64, f64)> {
        let grid = self.grid();
        let vals: Vec<Complex64> = bundle
            .phi
            .u
            .iter()
            .map(|c| Complex64::new(c.norm_sqr(), 0.0))
            .collect();
        let body = grid.integrate(&vals)?.re;
        let (tail, cross) = self.tail_inner(
            (bundle.coeffs.sigma_plus, bundle.coeffs.sigma_minus),
            (bundle.coeffs.sigma_plus, bundle.coeffs.sigma_minus),
            bundle.coeffs.z.im,
        );
        Ok((body + tail.re, cross))
    }
}

/// One-off connection computation with default settings.
pub fn connect(field: &CoefficientField, z: Complex64) -> Result<ConnectionCoefficients> {
    ConnectionEvaluator::new(field, z)?.connect(z)
}

/// Check |sigma-|^2 - |sigma+|^2 = Im z ||phi_z||^2 (a limit-circle
/// signature). Returns (lhs, rhs, relative gap).
pub fn verify_lc2p(ev: &ConnectionEvaluator, z: Complex64) -> Result<(f64, f64, f64)> {
    let bundle = ev.solutions(z)?;
    let c = &bundle.coeffs;
    let lhs = c.sigma_minus.norm_sqr() - c.sigma_plus.norm_sqr();
    let (norm_sq, _cross) = ev.phi_norm_sq(&bundle)?;
    let rhs = z.im * norm_sq;
    let gap = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-300);
    Ok((lhs, rhs, gap))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zs() -> [Complex64; 4] {
        [
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-2.0, 0.5),
        ]
    }

    #[test]
    fn normalization_identity_holds() {
        for f in [
            CoefficientField::power_law(0.0, 4.0),
            CoefficientField::power_law(2.0, 2.0),
            CoefficientField::power_law(-1.0, 4.0),
            CoefficientField::exponential(1.0),
        ] {
            let ev = ConnectionEvaluator::new(&f, Complex64::new(2.0, 1.0)).unwrap();
            for z in zs() {
                let c = ev.connect(z).unwrap();
                assert!(
                    c.normalization_gap() < 1e-6,
                    "{:?} z={z}: gap {}",
                    f.family,
                    c.normalization_gap()
                );
                assert!(c.wronskian_spread < 1e-6, "spread {}", c.wronskian_spread);
            }
        }
    }

    #[test]
    fn conjugation_symmetry() {
        let f = CoefficientField::power_law(0.0, 4.0);
        let ev = ConnectionEvaluator::new(&f, Complex64::new(2.0, 1.0)).unwrap();
        let z = Complex64::new(0.7, 0.4);
        let c = ev.connect(z).unwrap();
        let cbar = ev.connect(z.conj()).unwrap();
        assert!((c.sigma_minus - cbar.sigma_plus.conj()).norm() < 1e-7);
        assert!((c.tau_minus - cbar.tau_plus.conj()).norm() < 1e-7);
    }

    #[test]
    fn origin_evaluation_matches_midpoint() {
        let f = CoefficientField::power_law(-1.0, 4.0);
        let ev = ConnectionEvaluator::new(&f, Complex64::new(1.0, 1.0)).unwrap();
        for z in zs() {
            let a = ev.connect(z).unwrap();
            let b = ev.connect_at_origin(z).unwrap();
            let scale = a.sigma_plus.norm() + a.sigma_minus.norm() + 1.0;
            assert!((a.sigma_plus - b.sigma_plus).norm() / scale < 1e-7);
            assert!((a.sigma_minus - b.sigma_minus).norm() / scale < 1e-7);
            assert!((a.tau_plus - b.tau_plus).norm() / scale < 1e-7);
            assert!((a.tau_minus - b.tau_minus).norm() / scale < 1e-7);
        }
    }

    #[test]
    fn lc2p_identity_at_i() {
        for f in [
            CoefficientField::power_law(0.0, 4.0),
            CoefficientField::exponential(1.0),
        ] {
            let ev = ConnectionEvaluator::new(&f, Complex64::new(0.0, 1.0)).unwrap();
            let (lhs, rhs, gap) = verify_lc2p(&ev, Complex64::new(0.0, 1.0)).unwrap();
            assert!(gap < 1e-4, "{:?}: lhs {lhs} rhs {rhs} gap {gap}", f.family);
        }
    }

    #[test]
    fn real_z_sigma_conjugate_pair() {
        // On the real axis sigma- = conj(sigma+) holds exactly in floating
        // point because phi is real and conj f_zbar is the nodewise conjugate
        // of f_z.
        let f = CoefficientField::power_law(0.0, 4.0);
        let ev = ConnectionEvaluator::new(&f, Complex64::new(5.0, 0.0)).unwrap();
        let c = ev.connect_at_origin(Complex64::new(3.0, 0.0)).unwrap();
        assert_eq!(c.sigma_minus, c.sigma_plus.conj());
    }
}
