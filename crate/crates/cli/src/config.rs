//! Run configuration: JSON schema for the field, tolerances, grids, and
//! output destination.

use num_complex::Complex64;
use serde::Deserialize;

use lcspec_core::field::Alpha;
use lcspec_core::CoefficientField;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub field: FieldConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Override for the truncation point; derived from the z-scale if absent.
    #[serde(default)]
    pub x_inf: Option<f64>,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldConfig {
    PowerLaw {
        beta: f64,
        gamma: f64,
        #[serde(default)]
        alpha: Option<AlphaConfig>,
        #[serde(default)]
        x0: Option<f64>,
    },
    Exponential {
        kappa: f64,
        #[serde(default)]
        alpha: Option<AlphaConfig>,
        #[serde(default)]
        x0: Option<f64>,
    },
    Tabulated {
        xs: Vec<f64>,
        ps: Vec<f64>,
        qs: Vec<f64>,
        #[serde(default)]
        alpha: Option<AlphaConfig>,
    },
}

/// A finite boundary slope or the string "inf" for the Neumann-type limit.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum AlphaConfig {
    Finite(f64),
    Named(String),
}

impl AlphaConfig {
    pub fn to_alpha(&self) -> Result<Alpha, String> {
        match self {
            AlphaConfig::Finite(a) => Ok(Alpha::Finite(*a)),
            AlphaConfig::Named(s) if s == "inf" || s == "infinity" => Ok(Alpha::Infinite),
            AlphaConfig::Named(s) => Err(format!("unrecognized alpha {s:?} (number or \"inf\")")),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub ode_tol: f64,
    pub volterra_tol: f64,
    pub fit_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            ode_tol: 1e-11,
            volterra_tol: 1e-12,
            fit_tol: 1e-8,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    /// z samples for connect/transform sweeps.
    #[serde(default)]
    pub z: Vec<ComplexConfig>,
    /// Eigenvalue search interval.
    #[serde(default)]
    pub interval: Option<(f64, f64)>,
    /// Extension parameters, as RE+IMi strings.
    #[serde(default)]
    pub omegas: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexConfig {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl ComplexConfig {
    pub fn to_complex(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: String,
    #[serde(default)]
    pub format: Option<String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let t = &cfg.tolerances;
        if !(t.ode_tol > 0.0 && t.volterra_tol > 0.0 && t.fit_tol > 0.0) {
            return Err("tolerances must be positive".into());
        }
        if let (Some(x_inf), Some(x0)) = (cfg.x_inf, cfg.field.x0()) {
            if x_inf <= x0 {
                return Err(format!("x_inf = {x_inf} must exceed x0 = {x0}"));
            }
        }
        Ok(cfg)
    }

    pub fn build_field(&self) -> Result<CoefficientField, String> {
        self.field.build()
    }
}

impl FieldConfig {
    fn x0(&self) -> Option<f64> {
        match self {
            FieldConfig::PowerLaw { x0, .. } | FieldConfig::Exponential { x0, .. } => *x0,
            FieldConfig::Tabulated { .. } => None,
        }
    }

    pub fn build(&self) -> Result<CoefficientField, String> {
        let alpha = |a: &Option<AlphaConfig>| -> Result<Alpha, String> {
            match a {
                None => Ok(Alpha::Finite(0.0)),
                Some(a) => a.to_alpha(),
            }
        };
        match self {
            FieldConfig::PowerLaw {
                beta,
                gamma,
                alpha: a,
                x0,
            } => {
                let mut f = CoefficientField::power_law(*beta, *gamma).with_alpha(alpha(a)?);
                if let Some(x0) = x0 {
                    if *x0 <= 0.0 {
                        return Err("power-law x0 must be positive".into());
                    }
                    f = f.with_x0(*x0);
                }
                Ok(f)
            }
            FieldConfig::Exponential {
                kappa,
                alpha: a,
                x0,
            } => {
                let mut f = CoefficientField::exponential(*kappa).with_alpha(alpha(a)?);
                if let Some(x0) = x0 {
                    f = f.with_x0(*x0);
                }
                Ok(f)
            }
            FieldConfig::Tabulated {
                xs,
                ps,
                qs,
                alpha: a,
            } => {
                let f = CoefficientField::tabulated(xs.clone(), ps.clone(), qs.clone())
                    .map_err(|e| e.to_string())?;
                Ok(f.with_alpha(alpha(a)?))
            }
        }
    }
}

/// Parse a complex scalar written as RE, IMi, or RE+IMi (e.g. "1", "-2+0.5i",
/// "0.5-0.8i", "i", "-i", "2i").
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return Err("empty complex literal".into());
    }
    let bad = |s: &str| format!("cannot parse complex number {s:?} (expected RE+IMi)");
    if let Some(body) = t.strip_suffix(['i', 'I']) {
        // Find the split between the real and imaginary parts: the last +/-
        // that is not a leading sign and not part of an exponent.
        let bytes = body.as_bytes();
        let mut split = None;
        for k in (1..bytes.len()).rev() {
            let c = bytes[k] as char;
            if (c == '+' || c == '-') && !matches!(bytes[k - 1] as char, 'e' | 'E') {
                split = Some(k);
                break;
            }
        }
        match split {
            Some(k) => {
                let re: f64 = body[..k].parse().map_err(|_| bad(s))?;
                let imtxt = &body[k..];
                let im: f64 = match imtxt {
                    "+" => 1.0,
                    "-" => -1.0,
                    _ => imtxt.parse().map_err(|_| bad(s))?,
                };
                Ok(Complex64::new(re, im))
            }
            None => {
                let im: f64 = match body {
                    "" => 1.0,
                    "-" => -1.0,
                    _ => body.parse().map_err(|_| bad(s))?,
                };
                Ok(Complex64::new(0.0, im))
            }
        }
    } else {
        let re: f64 = t.parse().map_err(|_| bad(s))?;
        Ok(Complex64::new(re, 0.0))
    }
}
