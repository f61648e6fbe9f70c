//! Direct integration of -(p u')' - q u = z u in quasi-derivative form
//! (u, v = p u'), sampled on a `Grid`. A Dormand-Prince 5(4) stepper walks
//! cell by cell so every grid node carries an accurate state; in the
//! oscillatory section the node spacing is already a small fraction of a
//! wavelength, which keeps the error estimator honest.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{LcError, Result};
use crate::field::{Alpha, CoefficientField};
use crate::grid::Grid;

pub type SharedGrid = Arc<Grid>;

/// A solution of the equation at a fixed z, sampled on every node of a grid.
#[derive(Debug, Clone)]
pub struct GridSolution {
    pub grid: SharedGrid,
    pub z: Complex64,
    /// u at the nodes.
    pub u: Vec<Complex64>,
    /// v = p u' at the nodes.
    pub v: Vec<Complex64>,
}

impl GridSolution {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// Modified Wronskian {f, g} = (p f') g - f (p g') at node i.
pub fn wronskian(f: &GridSolution, g: &GridSolution, i: usize) -> Complex64 {
    f.v[i] * g.u[i] - f.u[i] * g.v[i]
}

#[derive(Debug, Clone, Copy)]
pub struct StepperConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Hard ceiling on |u|, |v| before declaring overflow.
    pub overflow: f64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig {
            rtol: 1e-11,
            atol: 1e-13,
            overflow: 1e140,
        }
    }
}

#[inline]
fn deriv(
    field: &CoefficientField,
    z: Complex64,
    x: f64,
    u: Complex64,
    v: Complex64,
) -> Result<(Complex64, Complex64)> {
    let (p, _, q) = field.eval(x)?;
    Ok((v / p, -(q + z) * u))
}

// Dormand-Prince 5(4) tableau.
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];

/// Integrate the state across [xa, xb] (xb may be below xa) adaptively.
pub fn step_interval(
    field: &CoefficientField,
    z: Complex64,
    xa: f64,
    xb: f64,
    init: (Complex64, Complex64),
    cfg: &StepperConfig,
) -> Result<(Complex64, Complex64)> {
    let span = xb - xa;
    if span == 0.0 {
        return Ok(init);
    }
    let dir = span.signum();
    let mut x = xa;
    let mut u = init.0;
    let mut v = init.1;
    let mut h = span; // first try the whole cell; the controller shrinks it
    let mut k1 = deriv(field, z, x, u, v)?;
    loop {
        let remaining = xb - x;
        if remaining * dir <= 0.0 {
            return Ok((u, v));
        }
        if h.abs() > remaining.abs() {
            h = remaining;
        }
        if h.abs() < 1e-14 * x.abs().max(1e-3) {
            return Err(LcError::StepUnderflow {
                x,
                unorm: u.norm(),
            });
        }

        let k2 = {
            let (du, dv) = (u + h * A2[0] * k1.0, v + h * A2[0] * k1.1);
            deriv(field, z, x + C[0] * h, du, dv)?
        };
        let k3 = {
            let du = u + h * (A3[0] * k1.0 + A3[1] * k2.0);
            let dv = v + h * (A3[0] * k1.1 + A3[1] * k2.1);
            deriv(field, z, x + C[1] * h, du, dv)?
        };
        let k4 = {
            let du = u + h * (A4[0] * k1.0 + A4[1] * k2.0 + A4[2] * k3.0);
            let dv = v + h * (A4[0] * k1.1 + A4[1] * k2.1 + A4[2] * k3.1);
            deriv(field, z, x + C[2] * h, du, dv)?
        };
        let k5 = {
            let du = u + h * (A5[0] * k1.0 + A5[1] * k2.0 + A5[2] * k3.0 + A5[3] * k4.0);
            let dv = v + h * (A5[0] * k1.1 + A5[1] * k2.1 + A5[2] * k3.1 + A5[3] * k4.1);
            deriv(field, z, x + C[3] * h, du, dv)?
        };
        let k6 = {
            let du = u
                + h * (A6[0] * k1.0 + A6[1] * k2.0 + A6[2] * k3.0 + A6[3] * k4.0 + A6[4] * k5.0);
            let dv = v
                + h * (A6[0] * k1.1 + A6[1] * k2.1 + A6[2] * k3.1 + A6[3] * k4.1 + A6[4] * k5.1);
            deriv(field, z, x + C[4] * h, du, dv)?
        };
        let u5 = u + h * (B[0] * k1.0 + B[2] * k3.0 + B[3] * k4.0 + B[4] * k5.0 + B[5] * k6.0);
        let v5 = v + h * (B[0] * k1.1 + B[2] * k3.1 + B[3] * k4.1 + B[4] * k5.1 + B[5] * k6.1);
        let k7 = deriv(field, z, x + h, u5, v5)?;

        let eu = h
            * (E[0] * k1.0 + E[2] * k3.0 + E[3] * k4.0 + E[4] * k5.0 + E[5] * k6.0 + E[6] * k7.0);
        let ev = h
            * (E[0] * k1.1 + E[2] * k3.1 + E[3] * k4.1 + E[4] * k5.1 + E[5] * k6.1 + E[6] * k7.1);
        let sc_u = cfg.atol + cfg.rtol * u.norm().max(u5.norm());
        let sc_v = cfg.atol + cfg.rtol * v.norm().max(v5.norm());
        let err = ((eu.norm_sqr() / (sc_u * sc_u) + ev.norm_sqr() / (sc_v * sc_v)) / 2.0).sqrt();

        if err <= 1.0 {
            x += h;
            u = u5;
            v = v5;
            k1 = k7; // FSAL
            if u.norm() > cfg.overflow || v.norm() > cfg.overflow {
                return Err(LcError::Overflow { x });
            }
            let grow = if err < 1e-30 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).min(5.0)
            };
            h *= grow;
        } else {
            h *= (0.9 * err.powf(-0.2)).max(0.1);
        }
    }
}

/// Propagate an initial state placed at node `start` to node `end` (either
/// direction), filling every node in between. The returned vectors are in
/// grid order and cover the inclusive index range.
pub fn propagate(
    grid: &SharedGrid,
    z: Complex64,
    start: usize,
    end: usize,
    init: (Complex64, Complex64),
    cfg: &StepperConfig,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let lo = start.min(end);
    let hi = start.max(end);
    let m = hi - lo + 1;
    let mut u = vec![Complex64::ZERO; m];
    let mut v = vec![Complex64::ZERO; m];
    let mut state = init;
    u[start - lo] = state.0;
    v[start - lo] = state.1;
    if start <= end {
        for i in start..end {
            state = step_interval(&grid.field, z, grid.xs[i], grid.xs[i + 1], state, cfg)?;
            u[i + 1 - lo] = state.0;
            v[i + 1 - lo] = state.1;
        }
    } else {
        for i in (end..start).rev() {
            state = step_interval(&grid.field, z, grid.xs[i + 1], grid.xs[i], state, cfg)?;
            u[i - lo] = state.0;
            v[i - lo] = state.1;
        }
    }
    Ok((u, v))
}

/// Initial states at x = 0 of the regular pair (phi, theta) fixed by the
/// boundary parameter. Normalized so that {phi, theta} = 1.
pub fn regular_inits(field: &CoefficientField) -> Result<[(Complex64, Complex64); 2]> {
    let (p0, _, _) = field.eval(0.0)?;
    let one = Complex64::ONE;
    Ok(match field.alpha {
        Alpha::Finite(a) => [
            (one, Complex64::new(p0 * a, 0.0)),
            (Complex64::ZERO, -one),
        ],
        Alpha::Infinite => [
            (Complex64::ZERO, Complex64::new(p0, 0.0)),
            (Complex64::new(1.0 / p0, 0.0), Complex64::ZERO),
        ],
    })
}

/// The regular solution phi_z and its companion theta_z on the full grid.
pub fn regular_pair(grid: &SharedGrid, z: Complex64, cfg: &StepperConfig) -> Result<(GridSolution, GridSolution)> {
    let inits = regular_inits(&grid.field)?;
    let n = grid.len();
    let mut out = Vec::with_capacity(2);
    for init in inits {
        let (u, v) = propagate(grid, z, 0, n - 1, init, cfg)?;
        out.push(GridSolution {
            grid: grid.clone(),
            z,
            u,
            v,
        });
    }
    let theta = out.pop().unwrap();
    let phi = out.pop().unwrap();
    Ok((phi, theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::CoefficientField;
    use crate::grid::{Grid, NODES_PER_PERIOD};

    fn shared(f: &CoefficientField, x_inf: f64) -> SharedGrid {
        Arc::new(Grid::build(f, x_inf, NODES_PER_PERIOD).unwrap())
    }

    #[test]
    fn constant_coefficient_solution() {
        // p = 1, q = 1 near 0 is not expressible here, so check against the
        // exponential field at kappa -> small... instead use power_law(0,0)?
        // q = 1 exactly: beta = 0, gamma = 0 gives q = 1 for all x.
        let f = CoefficientField::power_law(0.0, 0.0);
        // (p u')' = -(q+z) u with p=q=1, z=3 -> u'' = -4u.
        let cfg = StepperConfig::default();
        let z = Complex64::new(3.0, 0.0);
        let init = (Complex64::ONE, Complex64::ZERO); // cos(2x)
        let (u, v) = step_interval(&f, z, 0.0, 2.5, init, &cfg).unwrap();
        assert!((u.re - (5.0f64).cos()).abs() < 1e-9);
        assert!((v.re + 2.0 * (5.0f64).sin()).abs() < 1e-9);
    }

    #[test]
    fn wronskian_of_regular_pair_is_constant() {
        for f in [
            CoefficientField::power_law(0.0, 4.0),
            CoefficientField::power_law(-1.0, 4.0),
            CoefficientField::exponential(1.0),
        ] {
            let g = shared(&f, f.x0 + 6.0);
            let cfg = StepperConfig::default();
            for z in [
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(-2.0, 0.5),
            ] {
                let (phi, theta) = regular_pair(&g, z, &cfg).unwrap();
                for i in (0..g.len()).step_by(211) {
                    let w = wronskian(&phi, &theta, i);
                    assert!(
                        (w - Complex64::ONE).norm() < 1e-8,
                        "{{phi,theta}} = {w} at node {i}"
                    );
                }
            }
        }
    }

    #[test]
    fn dirichlet_inits_respected() {
        let f = CoefficientField::power_law(0.0, 4.0).with_alpha(Alpha::Infinite);
        let g = shared(&f, 5.0);
        let cfg = StepperConfig::default();
        let (phi, theta) = regular_pair(&g, Complex64::new(0.5, 0.0), &cfg).unwrap();
        assert_eq!(phi.u[0], Complex64::ZERO);
        assert_eq!(theta.v[0], Complex64::ZERO);
        let w = wronskian(&phi, &theta, g.len() - 1);
        assert!((w - Complex64::ONE).norm() < 1e-8);
    }

    #[test]
    fn backward_propagation_inverts_forward() {
        let f = CoefficientField::power_law(2.0, 2.0);
        let g = shared(&f, 12.0);
        let cfg = StepperConfig::default();
        let z = Complex64::new(1.0, 0.7);
        let init = (Complex64::new(0.3, -0.1), Complex64::new(0.0, 0.9));
        let n = g.len();
        let (u_f, v_f) = propagate(&g, z, 0, n - 1, init, &cfg).unwrap();
        let (u_b, v_b) =
            propagate(&g, z, n - 1, 0, (u_f[n - 1], v_f[n - 1]), &cfg).unwrap();
        assert!((u_b[0] - init.0).norm() < 1e-8);
        assert!((v_b[0] - init.1).norm() < 1e-8);
    }

    #[test]
    fn linearity_in_initial_data() {
        let f = CoefficientField::exponential(1.0);
        let g = shared(&f, 4.0);
        let cfg = StepperConfig::default();
        let z = Complex64::new(0.3, 0.2);
        let a = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0));
        let b = (Complex64::new(-0.5, 0.2), Complex64::new(1.5, 0.0));
        let lam = Complex64::new(0.7, -1.3);
        let n = g.len();
        let (ua, va) = propagate(&g, z, 0, n - 1, a, &cfg).unwrap();
        let (ub, vb) = propagate(&g, z, 0, n - 1, b, &cfg).unwrap();
        let (uc, vc) =
            propagate(&g, z, 0, n - 1, (a.0 + lam * b.0, a.1 + lam * b.1), &cfg).unwrap();
        for i in (0..n).step_by(101) {
            assert!((uc[i] - (ua[i] + lam * ub[i])).norm() < 1e-8);
            assert!((vc[i] - (va[i] + lam * vb[i])).norm() < 1e-8);
        }
    }
}
