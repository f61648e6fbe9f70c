//! Deterministic table emission: CSV with fixed 17-significant-digit
//! scientific notation and LF line endings, JSON with sorted keys.

use std::io::Write;

use num_complex::Complex64;
use serde_json::{json, Value};

use lcspec_core::extensions::EigenReport;
use lcspec_core::ode::GridSolution;

pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write a grid solution as CSV: abscissa, solution, quasi-derivative.
pub fn solution_csv(w: &mut dyn Write, sol: &GridSolution) -> std::io::Result<()> {
    w.write_all(b"x,Re u,Im u,Re pu',Im pu'\n")?;
    for i in 0..sol.grid.len() {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt(sol.grid.xs[i]),
            fmt(sol.u[i].re),
            fmt(sol.u[i].im),
            fmt(sol.v[i].re),
            fmt(sol.v[i].im)
        )?;
    }
    Ok(())
}

pub struct ConnectRow {
    pub z: Complex64,
    pub sigma_plus: Complex64,
    pub sigma_minus: Complex64,
    pub tau_plus: Complex64,
    pub tau_minus: Complex64,
    pub wro_residual: f64,
}

pub fn connect_csv(w: &mut dyn Write, rows: &[ConnectRow]) -> std::io::Result<()> {
    w.write_all(
        b"Re z,Im z,Re sigma+,Im sigma+,Re sigma-,Im sigma-,\
          Re tau+,Im tau+,Re tau-,Im tau-,wro_residual\n",
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            fmt(r.z.re),
            fmt(r.z.im),
            fmt(r.sigma_plus.re),
            fmt(r.sigma_plus.im),
            fmt(r.sigma_minus.re),
            fmt(r.sigma_minus.im),
            fmt(r.tau_plus.re),
            fmt(r.tau_plus.im),
            fmt(r.tau_minus.re),
            fmt(r.tau_minus.im),
            fmt(r.wro_residual)
        )?;
    }
    Ok(())
}

pub fn transform_csv(w: &mut dyn Write, rows: &[(Complex64, Complex64)]) -> std::io::Result<()> {
    w.write_all(b"Re z,Im z,Re F,Im F\n")?;
    for (z, f) in rows {
        writeln!(w, "{},{},{},{}", fmt(z.re), fmt(z.im), fmt(f.re), fmt(f.im))?;
    }
    Ok(())
}

pub fn eigen_report_json(rep: &EigenReport) -> Value {
    let eigenvalues: Vec<Value> = rep
        .lambdas
        .iter()
        .enumerate()
        .map(|(k, &lam)| {
            json!({
                "lambda": lam,
                "phase_residual": rep.phase_residuals[k],
                "ode_residual": rep.ode_residuals[k],
            })
        })
        .collect();
    json!({
        "omega": {"re": rep.omega.re, "im": rep.omega.im},
        "interval": [rep.interval.0, rep.interval.1],
        "eigenvalues": eigenvalues,
        "scan": {
            "samples": rep.bracket_log.samples,
            "refinements": rep.bracket_log.refinements,
            "brackets": rep.bracket_log.brackets.len(),
        },
    })
}

/// Serialize with sorted keys (the default map preserves key order as
/// sorted), trailing newline, LF only.
pub fn write_json(w: &mut dyn Write, v: &Value) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut *w, v)?;
    w.write_all(b"\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let vals = [1.0 / 3.0, -2.5e-17, 6.02e23, f64::MIN_POSITIVE];
        for v in vals {
            let s = fmt(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{s}");
        }
    }
}
