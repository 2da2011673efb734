//! Periodic collocation grid, discrete Fourier transforms, and the Fourier
//! multipliers of the local and nonlocal operators.
//!
//! Fields live on the uniform grid x_j = −L + j·h, h = 2L/N, j = 0..N−1, and
//! are paired with unnormalized discrete Fourier coefficients
//! X_k = Σ_j x_j e^{−2πijk/N}.  Index k carries the signed wavenumber
//! k̃ = π·s(k)/L with s(k) = k for k < N/2 and s(k) = k − N otherwise, so all
//! operators below are diagonal: derivative i·k̃, the Helmholtz-type factors
//! j_α(k̃) = 1 + μ|α|k̃², and the nonlocal symbol l(k̃) built from coth.

use std::cell::RefCell;
use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::model::AbcdSystem;

/// Relative imaginary residue allowed when synthesizing a real field.
const IM_RESIDUE_REL: f64 = 1e-12;

/// Uniform periodic grid on [−L, L] with an even number of collocation nodes.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PeriodicGrid {
    half_length: f64,
    n_modes: usize,
}

impl PeriodicGrid {
    pub fn new(half_length: f64, n_modes: usize) -> Result<Self> {
        if !(half_length > 0.0) || !half_length.is_finite() {
            return Err(Error::ParameterDomain(format!(
                "half_length = {half_length} must be positive"
            )));
        }
        if n_modes == 0 || n_modes % 2 != 0 {
            return Err(Error::ParameterDomain(format!(
                "n_modes = {n_modes} must be even and positive"
            )));
        }
        Ok(Self { half_length, n_modes })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    /// Number of collocation nodes (and of Fourier modes).
    pub fn len(&self) -> usize {
        self.n_modes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid spacing h = 2L/N.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.n_modes as f64
    }

    /// Node x_j = −L + j·h.
    pub fn node(&self, j: usize) -> f64 {
        -self.half_length + j as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_modes).map(|j| self.node(j)).collect()
    }

    /// Signed integer mode for transform index k: k for k < N/2, else k − N.
    pub fn signed_mode(&self, k: usize) -> i64 {
        if k < self.n_modes / 2 {
            k as i64
        } else {
            k as i64 - self.n_modes as i64
        }
    }

    /// Signed wavenumber k̃ = π·s(k)/L at transform index k.
    pub fn wavenumber(&self, k: usize) -> f64 {
        std::f64::consts::PI * self.signed_mode(k) as f64 / self.half_length
    }

    /// All signed wavenumbers in transform index order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n_modes).map(|k| self.wavenumber(k)).collect()
    }
}

/// Forward/inverse transform plans for one grid size, with reusable scratch.
///
/// A plan is cheap to clone conceptually but holds mutable scratch: keep one
/// plan per worker thread (the type is intentionally not `Sync`).
pub struct FourierTransform {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: RefCell<Vec<Complex64>>,
}

impl FourierTransform {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            n,
            forward,
            inverse,
            scratch: RefCell::new(vec![Complex64::new(0.0, 0.0); len]),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.n {
            return Err(Error::LengthMismatch { expected: self.n, got });
        }
        Ok(())
    }

    /// Unnormalized forward transform of a real nodal field.
    pub fn forward(&self, nodal: &[f64]) -> Result<Vec<Complex64>> {
        self.check_len(nodal.len())?;
        let mut buf: Vec<Complex64> = nodal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_in_place(&mut buf);
        Ok(buf)
    }

    /// Inverse transform (with the 1/N factor) of a spectrum assumed to be
    /// conjugate-symmetric; the imaginary residue is discarded.
    pub fn inverse(&self, spectrum: &[Complex64]) -> Result<Vec<f64>> {
        self.check_len(spectrum.len())?;
        let mut buf = spectrum.to_vec();
        self.inverse_in_place(&mut buf);
        Ok(buf.iter().map(|c| c.re).collect())
    }

    pub(crate) fn forward_in_place(&self, buf: &mut [Complex64]) {
        let mut scratch = self.scratch.borrow_mut();
        self.forward.process_with_scratch(buf, &mut scratch);
    }

    pub(crate) fn inverse_in_place(&self, buf: &mut [Complex64]) {
        let mut scratch = self.scratch.borrow_mut();
        self.inverse.process_with_scratch(buf, &mut scratch);
        let inv_n = 1.0 / self.n as f64;
        for c in buf.iter_mut() {
            *c *= inv_n;
        }
    }

}

impl std::fmt::Debug for FourierTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FourierTransform").field("n", &self.n).finish()
    }
}

/// Hyperbolic cotangent, stable across the whole positive axis.
///
/// Near zero the Laurent expansion 1/y + y/3 − y³/45 is used so that the
/// products y·coth(y) and y²·coth²(y) evaluate smoothly through the removable
/// singularity; beyond y = 30 the value is 1 to double precision.
pub fn coth(y: f64) -> f64 {
    debug_assert!(y > 0.0);
    if y < 1e-8 {
        1.0 / y + y / 3.0
    } else if y > 30.0 {
        1.0
    } else {
        1.0 / y.tanh()
    }
}

/// Symbol of the nonlocal operator acting on the velocity equation:
///
///   l(k̃) = 1/γ − (√μ/γ²)|k̃|coth(√μ₂|k̃|) − (μ/γ)(a − coth²(√μ₂|k̃|)/γ²)k̃²
///
/// for k̃ ≠ 0, with the continuous limit
///
///   l(0) = 1/γ − √μ/(γ²√μ₂) + μ/(γ³μ₂).
pub fn eval_symbol_l(ktilde: f64, sys: &AbcdSystem) -> f64 {
    let g = sys.gamma;
    let k = ktilde.abs();
    if k == 0.0 {
        return 1.0 / g - sys.mu.sqrt() / (g * g * sys.mu2.sqrt()) + sys.mu / (g * g * g * sys.mu2);
    }
    let co = coth(sys.mu2.sqrt() * k);
    1.0 / g - (sys.mu.sqrt() / (g * g)) * k * co
        - (sys.mu / g) * (sys.a - co * co / (g * g)) * k * k
}

/// Per-mode values of every multiplier the solvers need.
#[derive(Debug, Clone)]
pub struct SymbolSet {
    /// j_b(k̃) = 1 + μ|b|k̃².
    pub jb: Vec<f64>,
    /// j_d(k̃) = 1 + μ|d|k̃².
    pub jd: Vec<f64>,
    /// j_c(k̃) = 1 + μ|c|k̃².
    pub jc: Vec<f64>,
    /// Nonlocal symbol l(k̃).
    pub l: Vec<f64>,
    /// Imaginary parts of the derivative multiplier i·k̃, with the Nyquist
    /// entry zeroed so differentiation maps real fields to real fields.
    pub deriv: Vec<f64>,
}

impl SymbolSet {
    pub fn build(grid: &PeriodicGrid, sys: &AbcdSystem) -> Self {
        let n = grid.len();
        let mut jb = Vec::with_capacity(n);
        let mut jd = Vec::with_capacity(n);
        let mut jc = Vec::with_capacity(n);
        let mut l = Vec::with_capacity(n);
        let mut deriv = Vec::with_capacity(n);
        for k in 0..n {
            let kt = grid.wavenumber(k);
            let k2 = kt * kt;
            jb.push(1.0 + sys.mu * sys.b.abs() * k2);
            jd.push(1.0 + sys.mu * sys.d.abs() * k2);
            jc.push(1.0 + sys.mu * sys.c.abs() * k2);
            l.push(eval_symbol_l(kt, sys));
            deriv.push(if k == n / 2 { 0.0 } else { kt });
        }
        Self { jb, jd, jc, l, deriv }
    }

    pub fn len(&self) -> usize {
        self.jb.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jb.is_empty()
    }
}

/// Parity class of a Fourier multiplier that maps real fields to real fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolParity {
    /// Real values, even across ±k (Nyquist unpaired).
    EvenReal,
    /// Purely imaginary values, odd across ±k, zero at k = 0 and Nyquist.
    OddImaginary,
}

/// A validated per-mode multiplier for [`apply_operator`].
#[derive(Debug, Clone)]
pub struct Multiplier {
    values: Vec<Complex64>,
    parity: SymbolParity,
}

impl Multiplier {
    /// Even real multiplier (j_b, j_c, l, squared derivatives, ...).
    pub fn even_real(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        for k in 1..n {
            let mirror = values[n - k];
            if !close_rel(values[k], mirror) {
                return Err(Error::SymbolParity(format!(
                    "even symbol differs across +/-k at k = {k}: {} vs {}",
                    values[k], mirror
                )));
            }
        }
        Ok(Self {
            values: values.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
            parity: SymbolParity::EvenReal,
        })
    }

    /// Odd, purely imaginary multiplier given its imaginary parts
    /// (the derivative i·k̃ is `odd_imaginary(ktilde values)`).
    pub fn odd_imaginary(imag: Vec<f64>) -> Result<Self> {
        let n = imag.len();
        if imag[0] != 0.0 {
            return Err(Error::SymbolParity(format!(
                "odd symbol must vanish at k = 0, got {}",
                imag[0]
            )));
        }
        if n % 2 == 0 && imag[n / 2] != 0.0 {
            return Err(Error::SymbolParity(format!(
                "odd symbol must vanish at the Nyquist mode, got {}",
                imag[n / 2]
            )));
        }
        for k in 1..n {
            let mirror = -imag[n - k];
            if !close_rel(imag[k], mirror) {
                return Err(Error::SymbolParity(format!(
                    "odd symbol fails antisymmetry at k = {k}: {} vs {}",
                    imag[k], -mirror
                )));
            }
        }
        Ok(Self {
            values: imag.into_iter().map(|v| Complex64::new(0.0, v)).collect(),
            parity: SymbolParity::OddImaginary,
        })
    }

    /// Validate raw complex per-mode values against either parity contract.
    pub fn from_complex(values: Vec<Complex64>) -> Result<Self> {
        let all_real = values.iter().all(|v| v.im == 0.0);
        if all_real {
            return Self::even_real(values.into_iter().map(|v| v.re).collect());
        }
        let all_imag = values.iter().all(|v| v.re == 0.0);
        if all_imag {
            return Self::odd_imaginary(values.into_iter().map(|v| v.im).collect());
        }
        Err(Error::SymbolParity(
            "multiplier mixes real and imaginary parts".into(),
        ))
    }

    pub fn parity(&self) -> SymbolParity {
        self.parity
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

fn close_rel(x: f64, y: f64) -> bool {
    (x - y).abs() <= 1e-12 * (1.0 + x.abs().max(y.abs()))
}

/// Apply a diagonal-in-Fourier operator to a real nodal field:
/// inverse(symbol ⊙ forward(field)), with the imaginary residue dropped.
pub fn apply_operator(
    plan: &FourierTransform,
    symbol: &Multiplier,
    field: &[f64],
) -> Result<Vec<f64>> {
    if symbol.values.len() != field.len() {
        return Err(Error::LengthMismatch {
            expected: symbol.values.len(),
            got: field.len(),
        });
    }
    let mut hat = plan.forward(field)?;
    for (h, s) in hat.iter_mut().zip(&symbol.values) {
        *h *= s;
    }
    plan.inverse_in_place(&mut hat);
    debug_assert!({
        let im: f64 = hat.iter().map(|c| c.im * c.im).sum::<f64>().sqrt();
        let re: f64 = hat.iter().map(|c| c.re * c.re).sum::<f64>().sqrt();
        im <= IM_RESIDUE_REL * (1.0 + re)
    });
    Ok(hat.iter().map(|c| c.re).collect())
}

/// Reverse the stored vector: (U_1, …, U_N) ↦ (U_N, …, U_1).
///
/// On the grid this reflects about x = −h/2; it anticommutes with the
/// derivative and commutes with every even multiplier.
pub fn reflect(field: &[f64]) -> Vec<f64> {
    field.iter().rev().copied().collect()
}

/// Translate a periodic field by `shift` via the spectral phase factor
/// e^{i·k̃·shift}; the result samples f(x + shift) on the same grid.
///
/// The Nyquist mode has no conjugate partner, so its factor is replaced by
/// cos(k̃·shift) to keep the output real.
pub fn translate(
    plan: &FourierTransform,
    grid: &PeriodicGrid,
    field: &[f64],
    shift: f64,
) -> Result<Vec<f64>> {
    let mut hat = plan.forward(field)?;
    translate_spectrum(grid, &mut hat, shift);
    plan.inverse(&hat)
}

/// In-place spectral form of [`translate`].
pub fn translate_spectrum(grid: &PeriodicGrid, spectrum: &mut [Complex64], shift: f64) {
    let n = grid.len();
    for (k, c) in spectrum.iter_mut().enumerate() {
        let kt = grid.wavenumber(k);
        if k == n / 2 {
            *c *= (kt * shift).cos();
        } else {
            *c *= Complex64::new(0.0, kt * shift).exp();
        }
    }
}

/// Paired interface and velocity fields with lazily computed spectra.
#[derive(Debug, Clone)]
pub struct WaveState {
    zeta: Vec<f64>,
    u: Vec<f64>,
    spectra: OnceLock<(Vec<Complex64>, Vec<Complex64>)>,
}

impl WaveState {
    pub fn new(zeta: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        if zeta.len() != u.len() {
            return Err(Error::LengthMismatch {
                expected: zeta.len(),
                got: u.len(),
            });
        }
        Ok(Self { zeta, u, spectra: OnceLock::new() })
    }

    /// Build from spectra, synthesizing the nodal views and caching the input.
    pub fn from_spectra(
        plan: &FourierTransform,
        zeta_hat: Vec<Complex64>,
        u_hat: Vec<Complex64>,
    ) -> Result<Self> {
        let zeta = plan.inverse(&zeta_hat)?;
        let u = plan.inverse(&u_hat)?;
        let state = Self { zeta, u, spectra: OnceLock::new() };
        let _ = state.spectra.set((zeta_hat, u_hat));
        Ok(state)
    }

    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn len(&self) -> usize {
        self.zeta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeta.is_empty()
    }

    /// Spectra of both fields, computed on first use.
    pub fn spectra(&self, plan: &FourierTransform) -> &(Vec<Complex64>, Vec<Complex64>) {
        self.spectra.get_or_init(|| {
            let zh = plan.forward(&self.zeta).expect("state length matches plan");
            let uh = plan.forward(&self.u).expect("state length matches plan");
            (zh, uh)
        })
    }
}

/// Grid, system, symbols, and transform plan bundled for the solvers.
///
/// The symbol arrays bake in the system parameters, so keeping them in one
/// struct rules out mixing symbols of one system with another.
#[derive(Debug)]
pub struct Collocation {
    grid: PeriodicGrid,
    system: AbcdSystem,
    symbols: SymbolSet,
    plan: FourierTransform,
}

impl Collocation {
    pub fn new(grid: PeriodicGrid, system: AbcdSystem) -> Self {
        let symbols = SymbolSet::build(&grid, &system);
        let plan = FourierTransform::new(grid.len());
        Self { grid, system, symbols, plan }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn system(&self) -> &AbcdSystem {
        &self.system
    }

    pub fn symbols(&self) -> &SymbolSet {
        &self.symbols
    }

    pub fn plan(&self) -> &FourierTransform {
        &self.plan
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}
