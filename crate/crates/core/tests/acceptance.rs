//! Acceptance suite: one test per release criterion, each printing a single
//! PASS/FAIL line with the measured figure and its pinned tolerance.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see all lines.

use num_complex::Complex64;
use std::sync::OnceLock;

use lcspec_core::connection::{verify_lc2p, ConnectionEvaluator};
use lcspec_core::extensions::{
    eigenvalues, normalized_eigenfunction, omega_from_t, resolvent_apply, s_fit,
    spectral_transform, t_from_omega, ExtensionPoint, TParam,
};
use lcspec_core::jost::backward_jost;
use lcspec_core::ode::wronskian;
use lcspec_core::quasiresolvent::{
    boundary_form, inner, ode_residual_l2, Quasiresolvent, SampledFunction,
};
use lcspec_core::CoefficientField;

const I: Complex64 = Complex64::I;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "acceptance {:02} {:<34} {} ({})",
        id,
        name,
        if pass { "PASS" } else { "FAIL" },
        detail
    );
    assert!(pass, "acceptance {id:02} {name} failed: {detail}");
}

fn sweep_fields() -> [&'static ConnectionEvaluator; 3] {
    static E04: OnceLock<ConnectionEvaluator> = OnceLock::new();
    static E22: OnceLock<ConnectionEvaluator> = OnceLock::new();
    static EM14: OnceLock<ConnectionEvaluator> = OnceLock::new();
    let zs = Complex64::new(-2.0, 0.5);
    [
        E04.get_or_init(|| {
            ConnectionEvaluator::new(&CoefficientField::power_law(0.0, 4.0), zs).unwrap()
        }),
        E22.get_or_init(|| {
            ConnectionEvaluator::new(&CoefficientField::power_law(2.0, 2.0), zs).unwrap()
        }),
        EM14.get_or_init(|| {
            ConnectionEvaluator::new(&CoefficientField::power_law(-1.0, 4.0), zs).unwrap()
        }),
    ]
}

fn ev04() -> &'static ConnectionEvaluator {
    sweep_fields()[0]
}

fn ev_exp() -> &'static ConnectionEvaluator {
    static E: OnceLock<ConnectionEvaluator> = OnceLock::new();
    E.get_or_init(|| {
        ConnectionEvaluator::new(&CoefficientField::exponential(1.0), Complex64::new(0.0, 1.0))
            .unwrap()
    })
}

/// Evaluator on the wide grid used for the [0, 50] eigenvalue interval.
fn ev50() -> &'static ConnectionEvaluator {
    static E: OnceLock<ConnectionEvaluator> = OnceLock::new();
    E.get_or_init(|| {
        ConnectionEvaluator::with_tail_threshold(
            &CoefficientField::power_law(0.0, 4.0),
            Complex64::new(50.0, 0.0),
            1e-7,
        )
        .unwrap()
    })
}

fn sweep_zs() -> [Complex64; 4] {
    [
        Complex64::ZERO,
        Complex64::ONE,
        I,
        Complex64::new(-2.0, 0.5),
    ]
}

#[test]
fn criterion_01_connection_normalization() {
    let mut worst = 0.0f64;
    for ev in sweep_fields() {
        for z in sweep_zs() {
            let gap = ev.connect(z).unwrap().normalization_gap();
            worst = worst.max(gap);
        }
    }
    report(
        1,
        "connection normalization",
        worst <= 1e-6,
        &format!("worst |2i(s+t- - s-t+) - 1| = {worst:.2e}, limit 1e-6"),
    );
}

#[test]
fn criterion_02_jost_pair_normalization() {
    let mut worst = 0.0f64;
    for ev in sweep_fields() {
        for z in sweep_zs() {
            let (f, fbar) = ev.jost_pair(z).unwrap();
            let idx = ev.grid().match_index();
            let w = wronskian(&f.sol, &fbar, idx);
            worst = worst.max((w - 2.0 * I).norm());
        }
    }
    report(
        2,
        "jost pair normalization",
        worst <= 1e-6,
        &format!("worst |W - 2i| = {worst:.2e}, limit 1e-6"),
    );
}

#[test]
fn criterion_03_dissipation_identity() {
    let mut worst = 0.0f64;
    for ev in sweep_fields() {
        let (lhs, rhs, gap) = verify_lc2p(ev, I).unwrap();
        let rel = gap / lhs.abs().max(rhs.abs());
        worst = worst.max(rel);
    }
    report(
        3,
        "dissipation identity",
        worst <= 1e-4,
        &format!("worst relative gap = {worst:.2e}, limit 1e-4"),
    );
}

#[test]
fn criterion_04_quasiresolvent_equation() {
    let ev = ev04();
    let h = SampledFunction::gaussian(ev.grid(), 2.0, 0.4);
    let h_norm = inner(ev.grid(), &h.values, &h.values).unwrap().re.sqrt();
    let mut worst = 0.0f64;
    for z in [Complex64::ZERO, I] {
        let qr = Quasiresolvent::new(ev, z).unwrap();
        let u = qr.apply(&h).unwrap();
        let r = ode_residual_l2(&u, &h).unwrap();
        worst = worst.max(r / h_norm);
    }
    report(
        4,
        "quasiresolvent equation",
        worst <= 1e-6,
        &format!("worst residual / ||h|| = {worst:.2e}, limit 1e-6"),
    );
}

#[test]
fn criterion_05_two_construction_agreement() {
    let mut worst = 0.0f64;
    for ev in sweep_fields() {
        for z in [Complex64::ONE, I] {
            let (f, _) = ev.jost_pair(z).unwrap();
            let g = backward_jost(ev.grid(), z, &ev.cfg).unwrap();
            let lo = ev.grid().head_len;
            let sup = f.sol.u[lo..]
                .iter()
                .map(|c| c.norm())
                .fold(0.0f64, f64::max);
            let gap = (lo..ev.grid().len())
                .map(|i| (f.sol.u[i] - g.u[i]).norm())
                .fold(0.0f64, f64::max);
            worst = worst.max(gap / sup);
        }
    }
    report(
        5,
        "two-construction agreement",
        worst <= 1e-4,
        &format!("worst relative sup gap = {worst:.2e}, limit 1e-4"),
    );
}

/// High-precision reference values for the exponential field p = 1,
/// q = e^{2x}: f_z(x) = sqrt(pi/2) e^{i(nu pi/2 + pi/4 - 1)} H^(1)_nu(e^x)
/// with nu = i sqrt(z), tabulated independently with 40-digit arithmetic.
const HANKEL_Z1: [(f64, f64, f64); 10] = [
    (0.2, 7.84949784779422788e-01, -1.63339071618941623e-01),
    (0.4, 7.41521752085472774e-01, 9.57121905188307448e-02),
    (0.6, 6.03121817179101294e-01, 3.40908191637204705e-01),
    (0.8, 3.62648473867048071e-01, 5.25492787632545033e-01),
    (1.0, 4.03918077120082458e-02, 5.84384905681616051e-01),
    (1.2, -2.88563259367211555e-01, 4.51091997516547161e-01),
    (1.4, -4.74640076415417278e-01, 1.14044436086022688e-01),
    (1.6, -3.43037670730437838e-01, -2.81956143934842307e-01),
    (1.8, 9.40981146212546832e-02, -3.92154694437579165e-01),
    (2.0, 3.65763690066741642e-01, 8.10762257775254382e-03),
];

const HANKEL_ZI: [(f64, f64, f64); 10] = [
    (0.2, 1.23004422796528101e+00, 3.77403060687523592e-02),
    (0.4, 1.00816322129575764e+00, 3.56688562366050566e-01),
    (0.6, 7.11487164296413566e-01, 6.02228605711726539e-01),
    (0.8, 3.46550376560964601e-01, 7.37989333023327698e-01),
    (1.0, -5.31662391940289428e-02, 7.13753470610851481e-01),
    (1.2, -4.02591777198920697e-01, 4.85424317517150705e-01),
    (1.4, -5.52917741002377450e-01, 7.26939867457348232e-02),
    (1.6, -3.52855655609468466e-01, -3.46872393325092121e-01),
    (1.8, 1.34403716487259656e-01, -4.19332654869512766e-01),
    (2.0, 3.91528390926034364e-01, 3.31918944965858900e-02),
];

/// 6-point Lagrange interpolation of a nodal function at x.
fn interp6(xs: &[f64], ys: &[Complex64], x: f64) -> Complex64 {
    let n = xs.len();
    let i = xs.partition_point(|&t| t < x);
    let s = i.saturating_sub(3).min(n - 6);
    let mut sum = Complex64::ZERO;
    for k in 0..6 {
        let mut l = 1.0;
        for m in 0..6 {
            if m != k {
                l *= (x - xs[s + m]) / (xs[s + k] - xs[s + m]);
            }
        }
        sum += ys[s + k] * l;
    }
    sum
}

#[test]
fn criterion_06_hankel_oracle() {
    let ev = ev_exp();
    let mut worst = 0.0f64;
    for (z, table) in [(Complex64::ONE, &HANKEL_Z1), (I, &HANKEL_ZI)] {
        let (f, _) = ev.jost_pair(z).unwrap();
        for &(x, re, im) in table.iter() {
            let want = Complex64::new(re, im);
            let got = interp6(&ev.grid().xs, &f.sol.u, x);
            worst = worst.max((got - want).norm() / want.norm());
        }
    }
    report(
        6,
        "hankel-function oracle",
        worst <= 1e-5,
        &format!("worst relative error = {worst:.2e}, limit 1e-5"),
    );
}

// ---------------------------------------------------------------------------
// Truncated-domain finite-difference oracle for criterion 7: Numerov
// integration of -u'' - q u = lambda u on [0, 30] with u(0) = 1, u'(0) = 0
// and the oscillatory boundary constraint at the right end. Everything here
// is written against the closed-form coefficients, independent of the
// library's solvers.
// ---------------------------------------------------------------------------

/// q of the (0, 4) field, including its smooth continuation below the
/// ansatz cut at x = 1.
fn q04(x: f64) -> f64 {
    if x >= 1.0 {
        x.powi(4)
    } else {
        (4.0 * (x - 1.0)).exp()
    }
}

/// Right-end constraint function: amplitude-phase form of the real solution
/// selected by the boundary parameter omega = 1, with the first-order tail
/// phase correction R_lambda(x)/2.
fn chi04(x: f64, lam: f64) -> f64 {
    let xi_big = (x * x * x - 1.0) / 3.0;
    let r = (2.0 / 3.0) / (x * x * x) + lam / x;
    (xi_big - 0.5 * r).cos() / x
}

/// Sign-relevant boundary mismatch of the Numerov shot at lambda.
fn fd_mismatch(lam: f64, nx: usize, x_big: f64) -> f64 {
    let h = x_big / nx as f64;
    let w = |x: f64| -(q04(x) + lam);
    let h2_12 = h * h / 12.0;
    let mut um = 1.0f64;
    // Series start from u(0) = 1, u'(0) = 0.
    let w0 = w(0.0);
    let w0p = -4.0 * (-4.0f64).exp();
    let mut u = 1.0 + 0.5 * h * h * w0 + h * h * h * w0p / 6.0
        + h * h * h * h * (w0 * w0 - 16.0 * (-4.0f64).exp()) / 24.0;
    let mut fm = 1.0 - h2_12 * w0;
    let mut f = 1.0 - h2_12 * w(h);
    for n in 1..nx {
        let x_next = (n + 1) as f64 * h;
        let f_next = 1.0 - h2_12 * w(x_next);
        let next = ((12.0 - 10.0 * f) * u - fm * um) / f_next;
        um = u;
        u = next;
        fm = f;
        f = f_next;
    }
    let xl = (nx - 1) as f64 * h;
    let m = um * chi04(x_big, lam) - u * chi04(xl, lam);
    m / um.abs().max(u.abs())
}

/// Lowest eigenvalues in [lo, hi] of the truncated problem.
fn fd_eigenvalues(lo: f64, hi: f64, nx: usize, x_big: f64) -> Vec<f64> {
    let steps = 1000;
    let mut roots = Vec::new();
    let mut prev = fd_mismatch(lo, nx, x_big);
    for k in 1..=steps {
        let lam = lo + (hi - lo) * k as f64 / steps as f64;
        let cur = fd_mismatch(lam, nx, x_big);
        if prev.signum() != cur.signum() {
            let (mut a, mut b) = (lam - (hi - lo) / steps as f64, lam);
            let (mut fa, _) = (prev, cur);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                let fmid = fd_mismatch(m, nx, x_big);
                if fa.signum() == fmid.signum() {
                    a = m;
                    fa = fmid;
                } else {
                    b = m;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev = cur;
    }
    roots
}

#[test]
fn criterion_07_eigenvalues_vs_fd_oracle() {
    let ev = ev50();
    let om = ExtensionPoint::new(Complex64::ONE).unwrap();
    let rep = eigenvalues(ev, &om, (0.0, 50.0), 1e-12).unwrap();
    assert!(
        rep.lambdas.len() >= 5,
        "need at least 5 eigenvalues in [0, 50], found {:?}",
        rep.lambdas
    );
    let mut worst_phase = 0.0f64;
    for (k, &lam) in rep.lambdas.iter().enumerate().take(5) {
        let c = ev.connect_at_origin(Complex64::new(lam, 0.0)).unwrap();
        let scale = c.sigma_plus.norm() + c.sigma_minus.norm();
        worst_phase = worst_phase.max(rep.phase_residuals[k] / scale);
    }
    let fd = fd_eigenvalues(0.0, 50.0, 600_000, 30.0);
    let fd_check = fd_eigenvalues(0.0, 50.0, 300_000, 30.0);
    let mut worst_fd = 0.0f64;
    let mut worst_self = 0.0f64;
    for k in 0..5 {
        assert!(fd.len() > k && fd_check.len() > k, "oracle found too few roots");
        worst_self = worst_self.max((fd[k] - fd_check[k]).abs() / fd[k].max(1.0));
        worst_fd = worst_fd.max((rep.lambdas[k] - fd[k]).abs() / fd[k].max(1.0));
    }
    report(
        7,
        "eigenvalues vs fd oracle",
        // The oracle integrator is fourth order, so a coarse/fine difference
        // of d certifies the fine grid to about d/15; 5e-4 here keeps the
        // oracle error an order of magnitude inside the agreement limit.
        worst_phase <= 1e-8 && worst_fd <= 5e-4 && worst_self <= 5e-4,
        &format!(
            "lowest 5 = {:?}; worst scaled phase residual = {worst_phase:.2e} (limit 1e-8), \
             worst oracle gap = {worst_fd:.2e} (limit 5e-4, oracle self-consistency {worst_self:.1e})",
            &rep.lambdas[..5.min(rep.lambdas.len())]
        ),
    );
}

#[test]
fn criterion_08_resolvent_boundary_condition() {
    let ev = ev04();
    let h = SampledFunction::gaussian(ev.grid(), 2.0, 0.4);
    let mut worst = 0.0f64;
    for om in [Complex64::ONE, I, -Complex64::ONE] {
        let om = ExtensionPoint::new(om).unwrap();
        let u = resolvent_apply(ev, &om, I, &h).unwrap();
        let bd = s_fit(ev, &u).unwrap();
        worst = worst.max(bd.condition_gap(&om));
    }
    report(
        8,
        "resolvent boundary condition",
        worst <= 1e-4,
        &format!("worst |s+ - omega s-| / (|s+|+|s-|) = {worst:.2e}, limit 1e-4"),
    );
}

#[test]
fn criterion_09_green_identity() {
    let ev = ev04();
    let z = I;
    let bundle = ev.solutions(z).unwrap();
    let h = SampledFunction::gaussian(ev.grid(), 2.0, 0.4);
    let qr = Quasiresolvent::from_pair(bundle.phi.clone(), bundle.theta.clone());
    let rh = qr.apply(&h).unwrap();
    let ip = {
        let prod: Vec<Complex64> = (0..ev.grid().len())
            .map(|i| h.values[i] * bundle.phi.u[i])
            .collect();
        ev.grid().integrate(&prod).unwrap()
    };
    let c = &bundle.coeffs;
    let entries = [
        (&bundle.phi, (c.sigma_plus, c.sigma_minus)),
        (&bundle.theta, (c.tau_plus, c.tau_minus)),
        (&rh, (ip * c.tau_plus, ip * c.tau_minus)),
    ];
    let mut worst = 0.0f64;
    for (u, su) in entries.iter() {
        for (v, sv) in entries.iter() {
            let (lhs, rhs, _) = boundary_form(ev, u, *su, v, *sv).unwrap();
            let scale = lhs.norm().max(rhs.norm()).max(1.0);
            worst = worst.max((lhs - rhs).norm() / scale);
        }
    }
    report(
        9,
        "green identity at infinity",
        worst <= 1e-4,
        &format!("worst gap over 9 pairs = {worst:.2e}, limit 1e-4"),
    );
}

#[test]
fn criterion_10_unimodular_parameter_link() {
    let ev = ev04();
    let c0 = ev.connect(Complex64::ZERO).unwrap();
    let mut worst_mod = 0.0f64;
    let mut worst_rt = 0.0f64;
    for t in [
        TParam::Real(-10.0),
        TParam::Real(-1.0),
        TParam::Real(0.0),
        TParam::Real(1.0),
        TParam::Real(10.0),
        TParam::Infinity,
    ] {
        let om = omega_from_t(&c0, t).unwrap();
        worst_mod = worst_mod.max((om.omega.norm() - 1.0).abs());
        match (t, t_from_omega(&c0, &om).unwrap()) {
            (TParam::Real(t0), TParam::Real(t1)) => {
                worst_rt = worst_rt.max((t1 - t0).abs() / (1.0 + t0.abs()));
            }
            (TParam::Infinity, TParam::Infinity) => {}
            (a, b) => panic!("round trip changed the parameter class: {a:?} -> {b:?}"),
        }
    }
    report(
        10,
        "unimodular parameter link",
        worst_mod <= 1e-10 && worst_rt <= 1e-8,
        &format!(
            "worst ||omega| - 1| = {worst_mod:.2e} (limit 1e-10), \
             worst round trip = {worst_rt:.2e} (limit 1e-8)"
        ),
    );
}

#[test]
fn criterion_11_spectral_transform() {
    let ev = ev50();
    let om = ExtensionPoint::new(Complex64::ONE).unwrap();
    let h = SampledFunction::gaussian(ev.grid(), 2.0, 0.4);
    // Herglotz positivity on a 5 x 5 upper-half-plane grid.
    let mut min_im = f64::INFINITY;
    for &re in &[-5.0, 0.0, 10.0, 25.0, 40.0] {
        for &im in &[0.5, 1.0, 2.0, 4.0, 8.0] {
            let z = Complex64::new(re, im);
            let fz = spectral_transform(ev, &om, z, &h).unwrap();
            min_im = min_im.min(fz.im);
        }
    }
    // Eigen-expansion consistency at z = 10 + i using the [0, 50] window.
    let z = Complex64::new(10.0, 1.0);
    let fz = spectral_transform(ev, &om, z, &h).unwrap();
    let rep = eigenvalues(ev, &om, (0.0, 50.0), 1e-12).unwrap();
    let mut sum = Complex64::ZERO;
    let mut captured = 0.0f64;
    for &lam in &rep.lambdas {
        let (psi, norm) = normalized_eigenfunction(ev, lam).unwrap();
        let ck = inner(ev.grid(), &h.values, &psi.u).unwrap() / norm;
        captured += ck.norm_sqr();
        sum += ck.norm_sqr() / (Complex64::new(lam, 0.0) - z);
    }
    let h_norm2 = inner(ev.grid(), &h.values, &h.values).unwrap().re;
    // Distance from z to the part of the real axis outside the window.
    let dist = Complex64::new(10.0, 1.0).norm().min((z - 50.0).norm());
    let remainder = (h_norm2 - captured).max(0.0) / dist;
    let gap = (fz - sum).norm();
    let budget = 1e-2 * fz.norm() + remainder;
    report(
        11,
        "spectral transform",
        min_im > 0.0 && gap <= budget,
        &format!(
            "min Im F = {min_im:.2e} (must be > 0); expansion gap = {gap:.2e} \
             within budget {budget:.2e}"
        ),
    );
}
