//! Speed-limit and dispersion theory for the Hamiltonian family b = d.
//!
//! Two speed thresholds coexist.  The classical sufficient conditions bound
//! the speed by ω_m = (1−γ)|c|/b together with a constraint that reduces to
//! positivity of the quadratic Q(x) = Q₀ + Q₁x + x².  The sharper threshold
//! is c_γ = √(inf R_γ) with
//!
//!   R_γ(x) = (1−γ) j_c(x) l(x) / j_b(x)²,
//!
//! whose infimum is attained either at an interior point or in the x → ∞
//! limit R_m = ((1−γ)/γ)(|c|/b²)(|a| + 1/γ²).  The linearized phase speed
//! φ(k) of the moving-frame dispersion relation satisfies φ² = R_γ when
//! b = d, which ties the two viewpoints together.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{AbcdSystem, SIGN_TOLERANCE};
use crate::spectral::eval_symbol_l;

/// Everything the speed-limit theory produces for one system.
///
/// `alpha0`, `beta0`, and `admissible` refer to a probe speed and are only
/// present when the report came from [`angulo_saut_admissible`].
#[derive(Debug, Clone, Serialize)]
pub struct SpeedLimitReport {
    /// ω_m = (1−γ)|c|/b.
    pub omega_m: f64,
    /// Probe speed of the admissibility check, when one was supplied.
    pub probe_speed: Option<f64>,
    pub alpha0: Option<f64>,
    pub beta0: Option<f64>,
    pub admissible: Option<bool>,
    /// Coefficients of Q(x) = Q₀ + Q₁x + x².
    pub q0: f64,
    pub q1: f64,
    /// Real roots of Q, smaller first; absent when the discriminant is negative.
    pub x_minus: Option<f64>,
    pub x_plus: Option<f64>,
    /// C(γ) = γ(3 − 4aγ²)/(4(1 − aγ²)); Q₀ > 0 iff √(μ/μ₂) < C(γ).
    pub c_gamma_threshold: f64,
    /// √(μ/μ₂).
    pub nu_sqrt: f64,
    /// μ/μ₂.
    pub nu_ratio: f64,
    /// Density-ratio threshold γ_*, when a < 0 and the cubic has its root.
    pub gamma_star: Option<f64>,
    /// Interior minimizer of R_γ; absent when the infimum is the x → ∞ limit.
    pub x_gamma: Option<f64>,
    /// m(γ) = inf R_γ.
    pub m_gamma: f64,
    /// c_γ = √(m(γ)).
    pub c_gamma: f64,
    /// inf φ over the sampled range, minimized independently of R_γ.
    pub inf_phi: f64,
}

/// ω_m = (1−γ)|c|/b.
pub fn omega_m(sys: &AbcdSystem) -> f64 {
    (1.0 - sys.gamma) * sys.c.abs() / sys.b
}

/// R_γ(x) = (1−γ) j_c(x) l(x) / j_b(x)².
pub fn r_gamma(sys: &AbcdSystem, x: f64) -> f64 {
    let x2 = x * x;
    let jb = 1.0 + sys.mu * sys.b.abs() * x2;
    let jc = 1.0 + sys.mu * sys.c.abs() * x2;
    (1.0 - sys.gamma) * jc * eval_symbol_l(x, sys) / (jb * jb)
}

/// x → ∞ limit of R_γ.
pub fn r_limit(sys: &AbcdSystem) -> f64 {
    let g = sys.gamma;
    (1.0 - g) / g * (sys.c.abs() / (sys.b * sys.b)) * (sys.a.abs() + 1.0 / (g * g))
}

fn require_hamiltonian(sys: &AbcdSystem, what: &str) -> Result<()> {
    if !sys.is_hamiltonian() || !(sys.b > 0.0) {
        return Err(Error::Precondition(format!(
            "{what} requires the Hamiltonian case b = d > 0 (got b = {}, d = {})",
            sys.b, sys.d
        )));
    }
    Ok(())
}

/// The quadratic Q(x) = Q₀ + Q₁x + x² controlling the classical admissibility
/// window.  Total in the coefficients; callers are expected to pass b = d > 0,
/// a, c < 0.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QPolynomial {
    pub q0: f64,
    pub q1: f64,
}

impl QPolynomial {
    pub fn of(sys: &AbcdSystem) -> Self {
        let g = sys.gamma;
        let nu = sys.nu_sqrt();
        let scale = 1.0 / (sys.b * g * g);
        let slope = sys.a - 1.0 / (g * g);
        let q0 = scale * ((nu - g) * slope / g - 1.0 / (4.0 * g * g));
        let q1 = scale * (sys.b * (nu - g) + g * slope);
        debug_assert!(
            q1 < 0.0 || !(sys.b > 0.0 && sys.a < 0.0 && sys.c < 0.0),
            "Q1 = {q1} expected negative for admissible coefficients"
        );
        Self { q0, q1 }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.q0 + self.q1 * x + x * x
    }

    /// Real roots (smaller, larger), absent when the discriminant is negative.
    pub fn roots(&self) -> (Option<f64>, Option<f64>) {
        let disc = self.q1 * self.q1 - 4.0 * self.q0;
        if disc < 0.0 {
            return (None, None);
        }
        let s = disc.sqrt();
        (Some(0.5 * (-self.q1 - s)), Some(0.5 * (-self.q1 + s)))
    }
}

/// C(γ) = γ(3 − 4aγ²)/(4(1 − aγ²)): Q₀ > 0 iff √(μ/μ₂) < C(γ).
pub fn c_gamma_threshold(sys: &AbcdSystem) -> f64 {
    let g = sys.gamma;
    g * (3.0 - 4.0 * sys.a * g * g) / (4.0 * (1.0 - sys.a * g * g))
}

/// Classical admissibility of a speed: |c_s| < ω_m together with
/// γ²α₀(c_s) > √(μ/μ₂), where
///
///   β₀ = −4γ⁴(b|c_s| + (a − 1/γ²)/γ),  α₀ = 1/γ − |c_s| − 1/β₀.
pub fn angulo_saut_admissible(sys: &AbcdSystem, c_s: f64) -> Result<(bool, SpeedLimitReport)> {
    require_hamiltonian(sys, "the admissibility conditions")?;
    if sys.a > SIGN_TOLERANCE || sys.c > SIGN_TOLERANCE {
        return Err(Error::Precondition(format!(
            "the admissibility conditions require a, c <= 0 (got a = {}, c = {})",
            sys.a, sys.c
        )));
    }
    let g = sys.gamma;
    let beta0 = -4.0 * g.powi(4) * (sys.b * c_s.abs() + (sys.a - 1.0 / (g * g)) / g);
    let alpha0 = 1.0 / g - c_s.abs() - 1.0 / beta0;
    let admissible = c_s.abs() < omega_m(sys) && g * g * alpha0 > sys.nu_sqrt();
    let mut report = assemble_report(sys, DEFAULT_K_MAX, DEFAULT_N_SAMPLES);
    report.probe_speed = Some(c_s);
    report.alpha0 = Some(alpha0);
    report.beta0 = Some(beta0);
    report.admissible = Some(admissible);
    Ok((admissible, report))
}

/// Density-ratio threshold: the unique root in (0, 1) of
///
///   P(γ) = γ³ − νγ² + 3γ/(4|a|) − ν/|a|,   ν = √(μ/μ₂),
///
/// which exists and is simple when ν < (3 + |a|)/(4 + |a|).  Found by
/// bisection (P(0) < 0 < P(1)) and polished by Newton to |P| ≤ 1e−12.
pub fn gamma_star(sys: &AbcdSystem) -> Result<f64> {
    if !(sys.a < 0.0) {
        return Err(Error::Precondition(format!(
            "the density-ratio threshold requires a < 0 (got a = {})",
            sys.a
        )));
    }
    let abs_a = sys.a.abs();
    let nu = sys.nu_sqrt();
    let bound = (3.0 + abs_a) / (4.0 + abs_a);
    if !(nu < bound) {
        return Err(Error::Precondition(format!(
            "sqrt(mu/mu2) = {nu} must be below (3 + |a|)/(4 + |a|) = {bound}"
        )));
    }
    let p = |g: f64| g * g * g - nu * g * g + 0.75 * g / abs_a - nu / abs_a;
    let dp = |g: f64| 3.0 * g * g - 2.0 * nu * g + 0.75 / abs_a;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    debug_assert!(p(lo) < 0.0 && p(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 {
            break;
        }
    }
    let mut root = 0.5 * (lo + hi);
    for _ in 0..50 {
        let f = p(root);
        if f.abs() <= 1e-13 {
            break;
        }
        root -= f / dp(root);
    }
    if p(root).abs() > 1e-12 {
        return Err(Error::NoConvergence {
            iterations: 250,
            residual: p(root).abs(),
            history: vec![],
        });
    }
    Ok(root)
}

/// Default sampling used by the minimizers.
pub const DEFAULT_K_MAX: f64 = 200.0;
pub const DEFAULT_N_SAMPLES: usize = 20_001;

fn golden_minimize(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let inv_phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > 1e-12 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Minimize a smooth even function on [0, k_max]: dense sampling, then
/// golden-section refinement around the discrete argmin.
fn sampled_minimum(f: impl Fn(f64) -> f64, k_max: f64, n_samples: usize) -> (f64, f64) {
    let step = k_max / (n_samples - 1) as f64;
    let mut best_i = 0;
    let mut best = f64::INFINITY;
    for i in 0..n_samples {
        let v = f(i as f64 * step);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let lo = (best_i.saturating_sub(1)) as f64 * step;
    let hi = ((best_i + 1).min(n_samples - 1)) as f64 * step;
    let x = golden_minimize(&f, lo, hi);
    let v = f(x);
    if v <= best {
        (x, v)
    } else {
        (best_i as f64 * step, best)
    }
}

/// Assemble the report without precondition checks.  The math below is total
/// for b = d > 0, a ≤ 0, c ≤ 0; public wrappers enforce their own domains.
fn assemble_report(sys: &AbcdSystem, k_max: f64, n_samples: usize) -> SpeedLimitReport {
    let (x_int, m_int) = sampled_minimum(|x| r_gamma(sys, x), k_max, n_samples);
    let r_m = r_limit(sys);
    let (x_gamma, m_gamma) = if m_int <= r_m {
        (Some(x_int), m_int)
    } else {
        (None, r_m)
    };

    let (_, phi_min) = sampled_minimum(|k| phi(sys, k).unwrap_or(f64::INFINITY), k_max, n_samples);
    let inf_phi = phi_min.min(r_m.sqrt());

    let q = QPolynomial::of(sys);
    let (x_minus, x_plus) = q.roots();
    SpeedLimitReport {
        omega_m: omega_m(sys),
        probe_speed: None,
        alpha0: None,
        beta0: None,
        admissible: None,
        q0: q.q0,
        q1: q.q1,
        x_minus,
        x_plus,
        c_gamma_threshold: c_gamma_threshold(sys),
        nu_sqrt: sys.nu_sqrt(),
        nu_ratio: sys.nu_ratio(),
        gamma_star: gamma_star(sys).ok(),
        x_gamma,
        m_gamma,
        c_gamma: m_gamma.sqrt(),
        inf_phi,
    }
}

/// Compute the full speed-limit report: m(γ) = inf R_γ via dense sampling on
/// [0, k_max] with golden-section refinement, compared against the x → ∞
/// limit; c_γ = √m.
pub fn speed_limit_report(
    sys: &AbcdSystem,
    k_max: f64,
    n_samples: usize,
) -> Result<SpeedLimitReport> {
    require_hamiltonian(sys, "the speed limit")?;
    if !(sys.c < 0.0) || sys.a > SIGN_TOLERANCE {
        return Err(Error::Precondition(format!(
            "the speed limit requires c < 0 and a <= 0 (got a = {}, c = {})",
            sys.a, sys.c
        )));
    }
    if !(k_max > 0.0) {
        return Err(Error::ParameterDomain(format!("k_max = {k_max} must be positive")));
    }
    if n_samples < 2 {
        return Err(Error::ParameterDomain(format!(
            "n_samples = {n_samples} must be at least 2"
        )));
    }
    Ok(assemble_report(sys, k_max, n_samples))
}

/// c_γ alone, with the default sampling.
pub fn c_gamma(sys: &AbcdSystem) -> Result<f64> {
    Ok(speed_limit_report(sys, DEFAULT_K_MAX, DEFAULT_N_SAMPLES)?.c_gamma)
}

/// Eigenvalues (λ₋, λ₊) and determinant δ of the symmetric symbol matrix
///
///   [ (1−γ)j_c(k)   −c_s j_b(k) ]
///   [ −c_s j_b(k)    l(k)       ]
///
/// computed from the always-nonnegative radicand form, plus
/// δ(k) = (1−γ)j_c l − c_s² j_b².
pub fn q_operator_eigenvalues(sys: &AbcdSystem, c_s: f64, k: f64) -> (f64, f64, f64) {
    let k2 = k * k;
    let jb = 1.0 + sys.mu * sys.b.abs() * k2;
    let jc = 1.0 + sys.mu * sys.c.abs() * k2;
    let l = eval_symbol_l(k, sys);
    let a11 = (1.0 - sys.gamma) * jc;
    let delta = a11 * l - c_s * c_s * jb * jb;
    let sum = a11 + l;
    let rad = ((a11 - l) * (a11 - l) + 4.0 * c_s * c_s * jb * jb).sqrt();
    (0.5 * (sum - rad), 0.5 * (sum + rad), delta)
}

/// One point of the moving-frame linearized dispersion relation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DispersionSample {
    pub k: f64,
    /// φ(k) = √((1−γ) l(k) (1 − cμk²)) / (1 + bμk²).
    pub phi: f64,
    /// ω±(k) = −c_s k ± k φ(k).
    pub omega_plus: f64,
    pub omega_minus: f64,
    /// Phase speeds v± = −c_s ± φ(k) in the frame moving with the wave.
    pub v_plus: f64,
    pub v_minus: f64,
    /// Group velocities ω′± = −c_s ± (kφ′(k) + φ(k)).
    pub group_plus: f64,
    pub group_minus: f64,
}

/// φ(k) of the linearized dispersion relation.
pub fn phi(sys: &AbcdSystem, k: f64) -> Result<f64> {
    let k2 = k * k;
    let radicand = (1.0 - sys.gamma) * eval_symbol_l(k, sys) * (1.0 - sys.c * sys.mu * k2);
    if radicand < 0.0 {
        return Err(Error::NegativeRadicand(k));
    }
    Ok(radicand.sqrt() / (1.0 + sys.b * sys.mu * k2))
}

/// Evaluate the full dispersion sample at wavenumber k for a frame moving at
/// speed c_s.  φ′ is a central finite difference with step 1e−6·max(1, |k|).
pub fn dispersion(sys: &AbcdSystem, c_s: f64, k: f64) -> Result<DispersionSample> {
    let phi_k = phi(sys, k)?;
    let step = 1e-6 * k.abs().max(1.0);
    let dphi = (phi(sys, k + step)? - phi(sys, k - step)?) / (2.0 * step);
    Ok(DispersionSample {
        k,
        phi: phi_k,
        omega_plus: -c_s * k + k * phi_k,
        omega_minus: -c_s * k - k * phi_k,
        v_plus: -c_s + phi_k,
        v_minus: -c_s - phi_k,
        group_plus: -c_s + (k * dphi + phi_k),
        group_minus: -c_s - (k * dphi + phi_k),
    })
}
