//! Composite discretization of [0, X_inf]: a uniform-x head on [0, x0] glued
//! to a phase-graded tail on [x0, X_inf]. The tail is split into sections
//! that are uniform in Xi; sections near x0 are geometrically refined because
//! the Volterra density rho/xi can vary on a much shorter phase scale there
//! than the oscillation itself. All nodal quadrature uses a sixth-order cell
//! rule built from 6-point interpolation stencils.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{LcError, Result};
use crate::field::CoefficientField;

/// Default number of nodes per 2*pi of phase in the coarsest section.
pub const NODES_PER_PERIOD: usize = 80;
/// Minimum number of cells in the uniform head on [0, x0].
pub const MIN_HEAD_CELLS: usize = 192;
/// Minimum cells per phase section (the quadrature stencil needs 6 nodes).
const MIN_SECTION_CELLS: usize = 6;

/// A maximal run of phase-uniform cells.
#[derive(Debug, Clone, Copy)]
pub struct PhaseSection {
    /// Global index of the section's first node.
    pub node0: usize,
    pub n_cells: usize,
    pub dtheta: f64,
}

/// One quadrature cell: integral over [xs[i], xs[i+1]] approximated with the
/// 6-point stencil starting at node `base` with the weight row `offset`.
/// `h` is the step in the section's own coordinate (x on the head, Xi on the
/// tail); `phase` says whether the integrand must be divided by xi.
#[derive(Debug, Clone, Copy)]
pub struct CellRule {
    pub base: usize,
    pub offset: usize,
    pub h: f64,
    pub phase: bool,
}

#[derive(Debug, Clone)]
pub struct Grid {
    pub field: CoefficientField,
    /// All nodes, strictly increasing; xs[head_len] == x0.
    pub xs: Vec<f64>,
    /// Number of head cells (0 when x0 == 0); node index of x0.
    pub head_len: usize,
    pub dx_head: f64,
    pub sections: Vec<PhaseSection>,
    /// Xi(xs[head_len + j]) for phase node j (phase measured from x0).
    pub thetas: Vec<f64>,
    /// xi at each node; NaN on the head where the ansatz is not used.
    pub xi: Vec<f64>,
    /// a at each node; NaN on the head.
    pub a: Vec<f64>,
    rules: Vec<CellRule>,
}

impl Grid {
    pub fn build(field: &CoefficientField, x_inf: f64, nodes_per_period: usize) -> Result<Grid> {
        let x0 = field.x0;
        if x_inf <= x0 {
            return Err(LcError::Config("x_inf must exceed x0".into()));
        }
        if nodes_per_period < 12 {
            return Err(LcError::Config("need at least 12 nodes per period".into()));
        }
        let theta_inf = field.phase(x_inf)?;
        let h_osc = 2.0 * std::f64::consts::PI / nodes_per_period as f64;

        // --- Graded phase mesh -------------------------------------------
        // Local step bound from the z-free density w = (|rho0| + a^2)/xi:
        // steep w (in theta) forces cells shorter than the oscillation alone
        // would require.
        let allowed = |theta: f64| -> Result<f64> {
            let x = field.phase_inverse(theta)?;
            let w_at = |y: f64| -> Result<f64> {
                let (rho0, a2) = field.rho_parts(y)?;
                let (_, xi, _) = field.semiclassical(y)?;
                Ok((rho0.abs() + a2) / xi)
            };
            let hx = 1e-4 * x.max(1.0);
            let w = w_at(x)?;
            let dw_dx = (w_at(x + hx)? - w_at(x - hx)?) / (2.0 * hx);
            let (_, xi, _) = field.semiclassical(x)?;
            let scale = w * xi / dw_dx.abs().max(1e-300); // d theta scale of w
            Ok((0.04 * scale).clamp(h_osc / 4096.0, h_osc))
        };

        let mut thetas: Vec<f64> = vec![0.0];
        let mut section_spans: Vec<(usize, usize, f64)> = Vec::new(); // (first cell, n_cells, dtheta)
        let mut h_curr = {
            let mut h = h_osc;
            let a0 = allowed(0.0)?;
            while h > a0 * 1.0001 {
                h *= 0.5;
            }
            h
        };
        let mut cell_cursor = 0usize;
        while h_curr < h_osc * 0.9999 {
            // Lay cells of size h_curr until the bound admits a doubling.
            let first = cell_cursor;
            loop {
                let t = *thetas.last().unwrap();
                thetas.push(t + h_curr);
                cell_cursor += 1;
                let n_in_sec = cell_cursor - first;
                if n_in_sec >= MIN_SECTION_CELLS && allowed(t + h_curr)? >= 2.0 * h_curr {
                    break;
                }
                if t + h_curr > theta_inf {
                    break; // degenerate tiny domain; handled below
                }
            }
            section_spans.push((first, cell_cursor - first, h_curr));
            h_curr *= 2.0;
            if *thetas.last().unwrap() > theta_inf {
                return Err(LcError::Config(
                    "x_inf too small for the graded phase mesh near x0".into(),
                ));
            }
        }
        // Final uniform section up to theta_inf.
        {
            let start = *thetas.last().unwrap();
            let span = theta_inf - start;
            let n = ((span / h_osc).ceil() as usize).max(MIN_SECTION_CELLS);
            let h = span / n as f64;
            let first = cell_cursor;
            for j in 1..=n {
                thetas.push(start + j as f64 * h);
                cell_cursor += 1;
            }
            let last = thetas.len() - 1;
            thetas[last] = theta_inf;
            section_spans.push((first, n, h));
        }
        let n_phase = cell_cursor;

        // --- Head --------------------------------------------------------
        let (head_len, dx_head) = if x0 > 0.0 {
            let first_dx = field.phase_inverse(thetas[1])? - x0;
            let n = ((x0 / first_dx).ceil() as usize).max(MIN_HEAD_CELLS);
            (n, x0 / n as f64)
        } else {
            (0, 0.0)
        };

        // --- Nodes -------------------------------------------------------
        let n_nodes = head_len + n_phase + 1;
        let mut xs = Vec::with_capacity(n_nodes);
        for i in 0..head_len {
            xs.push(i as f64 * dx_head);
        }
        for (j, &theta) in thetas.iter().enumerate() {
            xs.push(if j == 0 { x0 } else { field.phase_inverse(theta)? });
        }
        let last = xs.len() - 1;
        xs[last] = x_inf;

        let mut xi = vec![f64::NAN; n_nodes];
        let mut a = vec![f64::NAN; n_nodes];
        for i in head_len..n_nodes {
            let (ai, xii, _) = field.semiclassical(xs[i])?;
            xi[i] = xii;
            a[i] = ai;
        }

        let sections: Vec<PhaseSection> = section_spans
            .iter()
            .map(|&(first, n_cells, dtheta)| PhaseSection {
                node0: head_len + first,
                n_cells,
                dtheta,
            })
            .collect();

        let rules = build_rules(head_len, dx_head, &sections);
        Ok(Grid {
            field: field.clone(),
            xs,
            head_len,
            dx_head,
            sections,
            thetas,
            xi,
            a,
            rules,
        })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// One rule per cell, in cell order.
    pub fn cell_rules(&self) -> &[CellRule] {
        &self.rules
    }

    /// Index of the node used to match forward and backward constructions:
    /// the node closest to the phase midpoint of the oscillatory section.
    pub fn match_index(&self) -> usize {
        let target = 0.5 * self.thetas.last().unwrap();
        let j = match self
            .thetas
            .binary_search_by(|t| t.partial_cmp(&target).unwrap())
        {
            Ok(j) | Err(j) => j.min(self.thetas.len() - 1),
        };
        self.head_len + j
    }

    pub fn x_inf(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    /// Per-cell integrals of a nodal function over x.
    pub fn cell_integrals(&self, vals: &[Complex64]) -> Result<Vec<Complex64>> {
        if vals.len() != self.len() {
            return Err(LcError::Alignment(format!(
                "expected {} nodal values, got {}",
                self.len(),
                vals.len()
            )));
        }
        let weights = cell_weights();
        let mut cells = Vec::with_capacity(self.rules.len());
        for r in &self.rules {
            let w = &weights[r.offset];
            let mut acc = Complex64::ZERO;
            for k in 0..6 {
                let i = r.base + k;
                let g = if r.phase { vals[i] / self.xi[i] } else { vals[i] };
                acc += w[k] * g;
            }
            cells.push(r.h * acc);
        }
        Ok(cells)
    }

    /// int_0^{X_inf} vals dx.
    pub fn integrate(&self, vals: &[Complex64]) -> Result<Complex64> {
        Ok(self.cell_integrals(vals)?.iter().sum())
    }

    /// Cumulative integral from 0: out[i] = int_0^{xs[i]} vals dx.
    pub fn cumulative(&self, vals: &[Complex64]) -> Result<Vec<Complex64>> {
        let cells = self.cell_integrals(vals)?;
        let mut out = Vec::with_capacity(self.len());
        let mut acc = Complex64::ZERO;
        out.push(acc);
        for c in cells {
            acc += c;
            out.push(acc);
        }
        Ok(out)
    }

    /// Suffix integral: out[i] = int_{xs[i]}^{X_inf} vals dx.
    pub fn suffix(&self, vals: &[Complex64]) -> Result<Vec<Complex64>> {
        let cells = self.cell_integrals(vals)?;
        let mut out = vec![Complex64::ZERO; self.len()];
        let mut acc = Complex64::ZERO;
        for i in (0..cells.len()).rev() {
            acc += cells[i];
            out[i] = acc;
        }
        Ok(out)
    }
}

fn build_rules(head_len: usize, dx_head: f64, sections: &[PhaseSection]) -> Vec<CellRule> {
    let mut rules = Vec::new();
    if head_len > 0 {
        // Head nodes 0..=head_len.
        for j in 0..head_len {
            let s = j.saturating_sub(2).min(head_len + 1 - 6);
            rules.push(CellRule {
                base: s,
                offset: j - s,
                h: dx_head,
                phase: false,
            });
        }
    }
    for sec in sections {
        for c in 0..sec.n_cells {
            let s = c.saturating_sub(2).min(sec.n_cells + 1 - 6);
            rules.push(CellRule {
                base: sec.node0 + s,
                offset: c - s,
                h: sec.dtheta,
                phase: true,
            });
        }
    }
    rules
}

/// Weights w[o][k] such that sum_k w[o][k] f(k) = int_o^{o+1} P(t) dt for the
/// degree-5 interpolant P of f at t = 0..5. Computed once by solving the
/// moment system sum_k w_k k^m = ((o+1)^{m+1} - o^{m+1})/(m+1), m = 0..5.
pub fn cell_weights() -> &'static [[f64; 6]; 5] {
    static W: OnceLock<[[f64; 6]; 5]> = OnceLock::new();
    W.get_or_init(|| {
        let mut out = [[0.0; 6]; 5];
        for (o, row) in out.iter_mut().enumerate() {
            let mut mat = [[0.0f64; 7]; 6];
            for (m, eq) in mat.iter_mut().enumerate() {
                for k in 0..6 {
                    eq[k] = (k as f64).powi(m as i32);
                }
                let a = o as f64;
                eq[6] = ((a + 1.0).powi(m as i32 + 1) - a.powi(m as i32 + 1)) / (m as f64 + 1.0);
            }
            solve6(&mut mat, row);
        }
        out
    })
}

/// Gaussian elimination with partial pivoting on a 6x7 augmented system.
fn solve6(mat: &mut [[f64; 7]; 6], out: &mut [f64; 6]) {
    for col in 0..6 {
        let piv = (col..6)
            .max_by(|&i, &j| mat[i][col].abs().partial_cmp(&mat[j][col].abs()).unwrap())
            .unwrap();
        mat.swap(col, piv);
        let d = mat[col][col];
        for k in col..7 {
            mat[col][k] /= d;
        }
        for row in 0..6 {
            if row != col {
                let f = mat[row][col];
                for k in col..7 {
                    mat[row][k] -= f * mat[col][k];
                }
            }
        }
    }
    for (i, o) in out.iter_mut().enumerate() {
        *o = mat[i][6];
    }
}
