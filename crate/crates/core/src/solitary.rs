//! Solitary-wave profiles by the per-mode Petviashvili iteration with
//! minimal-polynomial-extrapolation (MPE) acceleration.
//!
//! On the grid the profile pair (ζ, u) satisfies, mode by mode,
//!
//!   S_k (ζ̂_k, û_k)ᵀ = 𝒩̂_k,   S_k = [ −c_s j_b   l       ]
//!                                    [ (1−γ) j_c  −c_s j_d ],
//!
//! with 𝒩̂ = (ε/γ)(transform(ζu), transform(u²)/2).  Each Petviashvili sweep
//! rescales the right-hand side by the square of the stabilizing factor
//! m = ⟨Lz, z⟩/⟨𝒩(z), z⟩ before the 2×2 solves, which prevents collapse to
//! the zero fixed point.  Cyclic MPE over the iterate sequence accelerates
//! the linear convergence.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::AbcdSystem;
use crate::spectral::{Collocation, PeriodicGrid, WaveState};

/// Configuration of one profile solve.
#[derive(Debug, Clone)]
pub struct ProfileSolveConfig {
    pub grid: PeriodicGrid,
    /// Traveling speed c_s; negative speeds produce left-moving waves.
    pub speed: f64,
    /// Euclidean-norm bound on the spectral residual.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// MPE cycle length; a cycle extrapolates from `mpe_width + 2` iterates.
    pub mpe_width: usize,
    pub use_mpe: bool,
    /// Initial iterate A·sech²(w·(x − x₀)) for both fields (u carries the
    /// sign of the speed).
    pub guess_amplitude: f64,
    pub guess_width: f64,
    pub guess_center: f64,
}

impl ProfileSolveConfig {
    pub fn new(grid: PeriodicGrid, speed: f64) -> Self {
        Self {
            grid,
            speed,
            tolerance: 1e-12,
            max_iterations: 500,
            mpe_width: 6,
            use_mpe: true,
            guess_amplitude: 1.0,
            guess_width: 0.3,
            guess_center: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "tolerance = {} must be positive",
                self.tolerance
            )));
        }
        if self.mpe_width < 2 {
            return Err(Error::ParameterDomain(format!(
                "mpe_width = {} must be at least 2",
                self.mpe_width
            )));
        }
        if self.speed == 0.0 {
            return Err(Error::ParameterDomain("speed must be nonzero".into()));
        }
        Ok(())
    }
}

/// A converged profile pair, recentered so the ζ peak sits at x = 0.
#[derive(Debug, Clone)]
pub struct SolitaryWave {
    pub zeta: Vec<f64>,
    pub u: Vec<f64>,
    pub speed: f64,
    /// Euclidean norm of the spectral residual at each iterate, including
    /// the accepted final one.
    pub residual_history: Vec<f64>,
    /// Number of Petviashvili sweeps performed.
    pub iterations: usize,
    pub amplitude_zeta: f64,
    pub amplitude_u: f64,
}

impl SolitaryWave {
    pub fn state(&self) -> WaveState {
        WaveState::new(self.zeta.clone(), self.u.clone()).expect("matching lengths")
    }

    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().unwrap_or(&f64::INFINITY)
    }
}

/// The per-mode 2×2 system matrices S_k and their determinants.
#[derive(Debug, Clone)]
pub(crate) struct ModeMatrices {
    pub s11: Vec<f64>,
    pub s12: Vec<f64>,
    pub s21: Vec<f64>,
    pub s22: Vec<f64>,
    pub det: Vec<f64>,
}

impl ModeMatrices {
    pub fn build(coll: &Collocation, c_s: f64) -> Result<Self> {
        let sym = coll.symbols();
        let sys = coll.system();
        let n = coll.len();
        let mut m = Self {
            s11: Vec::with_capacity(n),
            s12: Vec::with_capacity(n),
            s21: Vec::with_capacity(n),
            s22: Vec::with_capacity(n),
            det: Vec::with_capacity(n),
        };
        for k in 0..n {
            let s11 = -c_s * sym.jb[k];
            let s12 = sym.l[k];
            let s21 = (1.0 - sys.gamma) * sym.jc[k];
            let s22 = -c_s * sym.jd[k];
            let det = s11 * s22 - s12 * s21;
            let frob2 = s11 * s11 + s12 * s12 + s21 * s21 + s22 * s22;
            if det.abs() < 1e-14 * (1.0 + frob2) {
                return Err(Error::SingularMode {
                    index: k,
                    ktilde: coll.grid().wavenumber(k),
                    det,
                });
            }
            m.s11.push(s11);
            m.s12.push(s12);
            m.s21.push(s21);
            m.s22.push(s22);
            m.det.push(det);
        }
        Ok(m)
    }
}

/// S_k for one mode: [[−c_s j_b, l], [(1−γ)j_c, −c_s j_d]].
pub fn mode_matrix(coll: &Collocation, k_index: usize, c_s: f64) -> Result<[[f64; 2]; 2]> {
    let sym = coll.symbols();
    let sys = coll.system();
    let s11 = -c_s * sym.jb[k_index];
    let s12 = sym.l[k_index];
    let s21 = (1.0 - sys.gamma) * sym.jc[k_index];
    let s22 = -c_s * sym.jd[k_index];
    let det = s11 * s22 - s12 * s21;
    let frob2 = s11 * s11 + s12 * s12 + s21 * s21 + s22 * s22;
    if det.abs() < 1e-14 * (1.0 + frob2) {
        return Err(Error::SingularMode {
            index: k_index,
            ktilde: coll.grid().wavenumber(k_index),
            det,
        });
    }
    Ok([[s11, s12], [s21, s22]])
}

/// (ε/γ)·(transform(ζ⊙u), transform(u⊙u)/2), products in physical space.
pub fn nonlinear_image(
    coll: &Collocation,
    zeta: &[f64],
    u: &[f64],
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let sys = coll.system();
    let scale = sys.epsilon / sys.gamma;
    let zu: Vec<f64> = zeta.iter().zip(u).map(|(z, v)| z * v).collect();
    let uu: Vec<f64> = u.iter().map(|v| v * v).collect();
    let mut n1 = coll.plan().forward(&zu)?;
    let mut n2 = coll.plan().forward(&uu)?;
    for c in n1.iter_mut() {
        *c *= scale;
    }
    for c in n2.iter_mut() {
        *c *= 0.5 * scale;
    }
    Ok((n1, n2))
}

fn spectral_nonlinear(
    coll: &Collocation,
    zh: &[Complex64],
    uh: &[Complex64],
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let zeta = coll.plan().inverse(zh)?;
    let u = coll.plan().inverse(uh)?;
    nonlinear_image(coll, &zeta, &u)
}

fn re_dot(x: &[Complex64], y: &[Complex64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a.re * b.re + a.im * b.im).sum()
}

fn residual_norm(
    m: &ModeMatrices,
    zh: &[Complex64],
    uh: &[Complex64],
    n1: &[Complex64],
    n2: &[Complex64],
) -> f64 {
    let mut acc = 0.0;
    for k in 0..zh.len() {
        let r1 = m.s11[k] * zh[k] + m.s12[k] * uh[k] - n1[k];
        let r2 = m.s21[k] * zh[k] + m.s22[k] * uh[k] - n2[k];
        acc += r1.norm_sqr() + r2.norm_sqr();
    }
    acc.sqrt()
}

/// One Petviashvili sweep on a state: returns the next state and the
/// stabilizing factor m.
pub fn petviashvili_step(
    coll: &Collocation,
    state: &WaveState,
    c_s: f64,
) -> Result<(WaveState, f64)> {
    let matrices = ModeMatrices::build(coll, c_s)?;
    let (zh, uh) = state.spectra(coll.plan()).clone();
    let (n1, n2) = nonlinear_image(coll, state.zeta(), state.u())?;
    let (new_zh, new_uh, m) = step_spectral(&matrices, &zh, &uh, &n1, &n2)?;
    Ok((WaveState::from_spectra(coll.plan(), new_zh, new_uh)?, m))
}

fn step_spectral(
    m: &ModeMatrices,
    zh: &[Complex64],
    uh: &[Complex64],
    n1: &[Complex64],
    n2: &[Complex64],
) -> Result<(Vec<Complex64>, Vec<Complex64>, f64)> {
    let n = zh.len();
    let mut lz1 = vec![Complex64::default(); n];
    let mut lz2 = vec![Complex64::default(); n];
    for k in 0..n {
        lz1[k] = m.s11[k] * zh[k] + m.s12[k] * uh[k];
        lz2[k] = m.s21[k] * zh[k] + m.s22[k] * uh[k];
    }
    let num = re_dot(&lz1, zh) + re_dot(&lz2, uh);
    let den = re_dot(n1, zh) + re_dot(n2, uh);
    if den.abs() < 1e-300 {
        return Err(Error::DegenerateIterate);
    }
    let factor = num / den;
    let m2 = factor * factor;
    let mut new_zh = vec![Complex64::default(); n];
    let mut new_uh = vec![Complex64::default(); n];
    for k in 0..n {
        let b1 = m2 * n1[k];
        let b2 = m2 * n2[k];
        new_zh[k] = (m.s22[k] * b1 - m.s12[k] * b2) / m.det[k];
        new_uh[k] = (m.s11[k] * b2 - m.s21[k] * b1) / m.det[k];
    }
    Ok((new_zh, new_uh, factor))
}

/// Minimal polynomial extrapolation over a window of consecutive iterates
/// (concatenated spectral vectors).  With iterates x₀ … x_{w+1} it forms the
/// differences u_j = x_{j+1} − x_j, solves the least-squares system
/// [u₀ … u_{w−1}] c ≈ −u_w by pivoted normal equations, and returns
/// Σ γ_j x_j with γ = (c, 1)/Σ(c, 1).  Falls back to the newest iterate when
/// the system is rank-deficient or the coefficient sum vanishes.
pub fn mpe_accelerate(window: &[Vec<Complex64>]) -> Result<Vec<Complex64>> {
    if window.len() < 3 {
        return Err(Error::WindowTooShort {
            needed: 3,
            got: window.len(),
        });
    }
    let w = window.len() - 2;
    let diffs: Vec<Vec<Complex64>> = window
        .windows(2)
        .map(|p| p[1].iter().zip(&p[0]).map(|(a, b)| a - b).collect())
        .collect();

    // normal equations G c = b over the first w differences
    let mut g = vec![vec![0.0; w]; w];
    let mut rhs = vec![0.0; w];
    for i in 0..w {
        for j in i..w {
            let v = re_dot(&diffs[i], &diffs[j]);
            g[i][j] = v;
            g[j][i] = v;
        }
        rhs[i] = -re_dot(&diffs[i], &diffs[w]);
    }
    let max_diag = g.iter().enumerate().map(|(i, r)| r[i]).fold(0.0, f64::max);
    let threshold = 1e-14 * (1.0 + max_diag);

    // Gaussian elimination with partial pivoting; columns whose best pivot
    // falls below the threshold are treated as free and their coefficient
    // set to zero (minimal-pivot solution of the rank-deficient system).
    let mut c = vec![0.0; w];
    let mut pivot_rows: Vec<(usize, usize)> = Vec::new();
    let mut used = vec![false; w];
    for col in 0..w {
        let mut best = threshold;
        let mut best_row = None;
        for (row, row_used) in used.iter().enumerate() {
            if !row_used && g[row][col].abs() > best {
                best = g[row][col].abs();
                best_row = Some(row);
            }
        }
        let Some(prow) = best_row else { continue };
        used[prow] = true;
        pivot_rows.push((prow, col));
        for row in 0..w {
            if row != prow && !used[row] {
                let f = g[row][col] / g[prow][col];
                for j in 0..w {
                    g[row][j] -= f * g[prow][j];
                }
                rhs[row] -= f * rhs[prow];
            }
        }
    }
    for &(row, col) in pivot_rows.iter().rev() {
        let mut v = rhs[row];
        for j in 0..w {
            if j != col {
                v -= g[row][j] * c[j];
            }
        }
        c[col] = v / g[row][col];
    }

    let newest = window.last().expect("non-empty window");
    if pivot_rows.is_empty() && re_dot(&diffs[w], &diffs[w]) > threshold {
        // stationary directions only in the tail: nothing to extrapolate
        return Ok(newest.clone());
    }
    let sum: f64 = c.iter().sum::<f64>() + 1.0;
    let scale: f64 = c.iter().map(|v| v.abs()).sum::<f64>() + 1.0;
    if sum.abs() <= 1e-12 * scale || !sum.is_finite() {
        return Ok(newest.clone());
    }
    let len = newest.len();
    let mut out = vec![Complex64::default(); len];
    for (j, x) in window[..=w].iter().enumerate() {
        let gamma = if j < w { c[j] / sum } else { 1.0 / sum };
        for (o, v) in out.iter_mut().zip(x) {
            *o += gamma * v;
        }
    }
    Ok(out)
}

fn concat(zh: &[Complex64], uh: &[Complex64]) -> Vec<Complex64> {
    let mut v = Vec::with_capacity(zh.len() + uh.len());
    v.extend_from_slice(zh);
    v.extend_from_slice(uh);
    v
}

/// Solve for the profile pair at the configured speed, then recenter the
/// peak at x = 0 by a spectral shift.
pub fn solve_profile(sys: &AbcdSystem, cfg: &ProfileSolveConfig) -> Result<SolitaryWave> {
    let coll = Collocation::new(cfg.grid.clone(), *sys);
    solve_profile_on(&coll, cfg)
}

/// [`solve_profile`] against an existing collocation bundle.
pub fn solve_profile_on(coll: &Collocation, cfg: &ProfileSolveConfig) -> Result<SolitaryWave> {
    cfg.validate()?;
    if cfg.grid != *coll.grid() {
        return Err(Error::Precondition(
            "profile grid does not match the collocation grid".into(),
        ));
    }
    let matrices = ModeMatrices::build(coll, cfg.speed)?;
    let n = coll.len();

    let guess: Vec<f64> = coll
        .grid()
        .nodes()
        .iter()
        .map(|&x| {
            let s = 1.0 / ((cfg.guess_width * (x - cfg.guess_center)).cosh());
            cfg.guess_amplitude * s * s
        })
        .collect();
    let u_guess: Vec<f64> = guess.iter().map(|v| v * cfg.speed.signum()).collect();
    let mut zh = coll.plan().forward(&guess)?;
    let mut uh = coll.plan().forward(&u_guess)?;

    let mut history = Vec::new();
    let mut window: Vec<Vec<Complex64>> = vec![concat(&zh, &uh)];
    let mut iterations = 0usize;

    loop {
        let (n1, n2) = spectral_nonlinear(coll, &zh, &uh)?;
        let r = residual_norm(&matrices, &zh, &uh, &n1, &n2);
        history.push(r);
        if !r.is_finite() {
            return Err(Error::NoConvergence {
                iterations,
                residual: r,
                history,
            });
        }
        if r <= cfg.tolerance {
            break;
        }
        if iterations >= cfg.max_iterations {
            return Err(Error::NoConvergence {
                iterations,
                residual: r,
                history,
            });
        }
        let (new_zh, new_uh, _) = step_spectral(&matrices, &zh, &uh, &n1, &n2)?;
        zh = new_zh;
        uh = new_uh;
        iterations += 1;

        if cfg.use_mpe {
            window.push(concat(&zh, &uh));
            if window.len() == cfg.mpe_width + 2 {
                let candidate = mpe_accelerate(&window)?;
                let (czh, cuh) = candidate.split_at(n);
                if let Ok((cn1, cn2)) = spectral_nonlinear(coll, czh, cuh) {
                    let cr = residual_norm(&matrices, czh, cuh, &cn1, &cn2);
                    // accept the extrapolant only when it improves the residual
                    if cr.is_finite() && cr < r {
                        zh = czh.to_vec();
                        uh = cuh.to_vec();
                    }
                }
                window.clear();
                window.push(concat(&zh, &uh));
            }
        }
    }

    // recenter the peak of |zeta| at x = 0
    let zeta = coll.plan().inverse(&zh)?;
    let (peak_x, _) = parabolic_peak(coll.grid(), &zeta);
    crate::spectral::translate_spectrum(coll.grid(), &mut zh, peak_x);
    crate::spectral::translate_spectrum(coll.grid(), &mut uh, peak_x);
    let zeta = coll.plan().inverse(&zh)?;
    let u = coll.plan().inverse(&uh)?;

    let amplitude_zeta = extreme_value(&zeta);
    let amplitude_u = extreme_value(&u);
    Ok(SolitaryWave {
        zeta,
        u,
        speed: cfg.speed,
        residual_history: history,
        iterations,
        amplitude_zeta,
        amplitude_u,
    })
}

/// Signed value of largest magnitude.
fn extreme_value(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, |acc, x| if x.abs() > acc.abs() { x } else { acc })
}

/// Sub-grid location and height of the |field| maximum from a three-point
/// parabola through the discrete peak.
fn parabolic_peak(grid: &PeriodicGrid, field: &[f64]) -> (f64, f64) {
    let n = field.len();
    let mut jmax = 0;
    for (j, v) in field.iter().enumerate() {
        if v.abs() > field[jmax].abs() {
            jmax = j;
        }
    }
    let ym = field[(jmax + n - 1) % n];
    let y0 = field[jmax];
    let yp = field[(jmax + 1) % n];
    let denom = ym - 2.0 * y0 + yp;
    let delta = if denom.abs() > 0.0 { 0.5 * (ym - yp) / denom } else { 0.0 };
    let height = y0 - 0.25 * (ym - yp) * delta;
    (grid.node(jmax) + delta * grid.spacing(), height)
}

/// Euclidean norm, over all nodes and both equations, of the residual of the
/// nodal profile system at the wave.
pub fn collocation_residual(coll: &Collocation, wave: &SolitaryWave) -> Result<f64> {
    let sys = coll.system();
    let plan = coll.plan();
    let sym = coll.symbols();
    let n = coll.len();
    let zh = plan.forward(&wave.zeta)?;
    let uh = plan.forward(&wave.u)?;
    let mut t1 = vec![Complex64::default(); n];
    let mut t2 = vec![Complex64::default(); n];
    for k in 0..n {
        t1[k] = -wave.speed * sym.jb[k] * zh[k] + sym.l[k] * uh[k];
        t2[k] = (1.0 - sys.gamma) * sym.jc[k] * zh[k] - wave.speed * sym.jd[k] * uh[k];
    }
    let lin1 = plan.inverse(&t1)?;
    let lin2 = plan.inverse(&t2)?;
    let scale = sys.epsilon / sys.gamma;
    let mut acc = 0.0;
    for j in 0..n {
        let r1 = lin1[j] - scale * wave.zeta[j] * wave.u[j];
        let r2 = lin2[j] - 0.5 * scale * wave.u[j] * wave.u[j];
        acc += r1 * r1 + r2 * r2;
    }
    Ok(acc.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{eval_symbol_l, reflect, translate};
    use crate::theory;

    fn sys08() -> AbcdSystem {
        AbcdSystem::reduced(0.0, 0.8).unwrap()
    }

    fn small_coll() -> Collocation {
        let grid = PeriodicGrid::new(128.0, 1024).unwrap();
        Collocation::new(grid, sys08())
    }

    #[test]
    fn mode_matrix_zero_mode_zero_speed() {
        let coll = small_coll();
        let m = mode_matrix(&coll, 0, 0.0).unwrap();
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let expected = -(1.0 - 0.8) * eval_symbol_l(0.0, coll.system());
        assert!((det - expected).abs() < 1e-14);
        assert!(det < 0.0);
    }

    #[test]
    fn mode_determinant_matches_speed_limit_form() {
        // det S_k = j_b^2 (c_s^2 - R(k)) < 0 below the speed limit
        let coll = small_coll();
        let cs = 0.3;
        for k in 0..coll.len() {
            let m = mode_matrix(&coll, k, cs).unwrap();
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            let kt = coll.grid().wavenumber(k);
            let jb = coll.symbols().jb[k];
            let expected = jb * jb * (cs * cs - theory::r_gamma(coll.system(), kt));
            assert!(
                (det - expected).abs() <= 1e-11 * (1.0 + det.abs()),
                "mode {k}: {det} vs {expected}"
            );
            assert!(det < 0.0, "mode {k} not negative");
        }
    }

    #[test]
    fn nonlinear_image_of_zero_is_zero() {
        let coll = small_coll();
        let z = vec![0.0; coll.len()];
        let (n1, n2) = nonlinear_image(&coll, &z, &z).unwrap();
        assert!(n1.iter().all(|c| c.norm() == 0.0));
        assert!(n2.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn nonlinear_image_of_harmonic_fills_modes_zero_and_two() {
        let grid = PeriodicGrid::new(8.0, 32).unwrap();
        let coll = Collocation::new(grid, sys08());
        let w = std::f64::consts::PI / 8.0;
        let f: Vec<f64> = coll.grid().nodes().iter().map(|&x| (w * x).cos()).collect();
        let (n1, _) = nonlinear_image(&coll, &f, &f).unwrap();
        let total: f64 = n1.iter().map(|c| c.norm_sqr()).sum();
        let kept = n1[0].norm_sqr() + n1[2].norm_sqr() + n1[30].norm_sqr();
        assert!((total - kept).abs() <= 1e-20 * total.max(1.0) + 1e-18);
    }

    #[test]
    fn nonlinear_image_is_quadratic_in_amplitude() {
        let coll = small_coll();
        let f: Vec<f64> = coll
            .grid()
            .nodes()
            .iter()
            .map(|&x| (-0.1 * x * x).exp())
            .collect();
        let (n1, n2) = nonlinear_image(&coll, &f, &f).unwrap();
        let scaled: Vec<f64> = f.iter().map(|v| 3.0 * v).collect();
        let (s1, s2) = nonlinear_image(&coll, &scaled, &scaled).unwrap();
        for k in 0..coll.len() {
            assert!((s1[k] - 9.0 * n1[k]).norm() < 1e-9);
            assert!((s2[k] - 9.0 * n2[k]).norm() < 1e-9);
        }
    }

    #[test]
    fn zero_guess_is_degenerate() {
        let coll = small_coll();
        let zero = WaveState::new(vec![0.0; coll.len()], vec![0.0; coll.len()]).unwrap();
        assert!(matches!(
            petviashvili_step(&coll, &zero, 0.3),
            Err(Error::DegenerateIterate)
        ));
    }

    #[test]
    fn converged_wave_is_a_fixed_point_with_unit_factor() {
        let coll = small_coll();
        let mut cfg = ProfileSolveConfig::new(coll.grid().clone(), 0.3);
        cfg.tolerance = 1e-13;
        let wave = solve_profile_on(&coll, &cfg).unwrap();
        let state = wave.state();
        let (next, m) = petviashvili_step(&coll, &state, 0.3).unwrap();
        assert!((m - 1.0).abs() < 1e-10, "stabilizing factor {m}");
        let scale: f64 = state.zeta().iter().map(|v| v * v).sum::<f64>().sqrt();
        for (a, b) in next.zeta().iter().zip(state.zeta()) {
            assert!((a - b).abs() <= 1e-9 * (1.0 + scale));
        }
    }

    #[test]
    fn mpe_window_of_identical_vectors_is_stationary() {
        let v = vec![Complex64::new(1.0, 0.0); 16];
        let window = vec![v.clone(); 8];
        let out = mpe_accelerate(&window).unwrap();
        for (a, b) in out.iter().zip(&v) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn mpe_recovers_limit_of_geometric_sequence() {
        // v_n = v* + A^n w converges linearly; the extrapolant hits v* exactly
        let n = 32;
        let vstar: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 0.5)).collect();
        let dir: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.71).cos()))
            .collect();
        let a = 0.6;
        let window: Vec<Vec<Complex64>> = (0..8)
            .map(|step| {
                let f = a_pow(a, step);
                vstar.iter().zip(&dir).map(|(s, d)| s + f * d).collect()
            })
            .collect();
        let out = mpe_accelerate(&window).unwrap();
        for (o, s) in out.iter().zip(&vstar) {
            assert!((o - s).norm() < 1e-10, "{o} vs {s}");
        }
    }

    fn a_pow(a: f64, n: usize) -> f64 {
        (0..n).fold(1.0, |acc, _| acc * a)
    }

    #[test]
    fn mpe_rejects_short_window() {
        let window = vec![vec![Complex64::new(1.0, 0.0); 4]; 2];
        assert!(matches!(
            mpe_accelerate(&window),
            Err(Error::WindowTooShort { .. })
        ));
    }

    #[test]
    fn profile_converges_and_is_even() {
        let coll = small_coll();
        let cfg = ProfileSolveConfig::new(coll.grid().clone(), 0.3);
        let wave = solve_profile_on(&coll, &cfg).unwrap();
        assert!(wave.final_residual() <= cfg.tolerance);
        assert!(wave.iterations <= 60, "took {} iterations", wave.iterations);
        // even about the peak: zeta_j = zeta_{(N-j) mod N} once the peak is at 0
        let n = coll.len();
        for j in 1..n {
            let d = (wave.zeta[j] - wave.zeta[n - j]).abs();
            assert!(d < 1e-8, "zeta asymmetry {d} at {j}");
            let du = (wave.u[j] - wave.u[n - j]).abs();
            assert!(du < 1e-8, "u asymmetry {du} at {j}");
        }
        // reflection about -h/2 fixes the half-cell-shifted profile
        let plan = coll.plan();
        let shifted = translate(plan, coll.grid(), &wave.zeta, grid_half_cell(&coll)).unwrap();
        let refl = reflect(&shifted);
        for (a, b) in shifted.iter().zip(&refl) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    fn grid_half_cell(coll: &Collocation) -> f64 {
        -0.5 * coll.grid().spacing()
    }

    #[test]
    fn profile_residual_certificate() {
        let coll = small_coll();
        let cfg = ProfileSolveConfig::new(coll.grid().clone(), 0.3);
        let wave = solve_profile_on(&coll, &cfg).unwrap();
        let nodal = collocation_residual(&coll, &wave).unwrap();
        assert!(nodal <= 10.0 * cfg.tolerance, "nodal residual {nodal}");
    }

    #[test]
    fn translation_covariance_of_the_solve() {
        let coll = small_coll();
        let base = ProfileSolveConfig::new(coll.grid().clone(), 0.3);
        let mut moved = base.clone();
        moved.guess_center = coll.grid().spacing();
        let w1 = solve_profile_on(&coll, &base).unwrap();
        let w2 = solve_profile_on(&coll, &moved).unwrap();
        for (a, b) in w1.zeta.iter().zip(&w2.zeta) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn amplitude_decreases_with_speed() {
        let coll = small_coll();
        let mut last = f64::INFINITY;
        for cs in [0.05, 0.2, 0.3, 0.4, 0.42] {
            let cfg = ProfileSolveConfig::new(coll.grid().clone(), cs);
            let wave = solve_profile_on(&coll, &cfg).unwrap();
            assert!(
                wave.amplitude_zeta < last,
                "amplitude not decreasing at cs = {cs}"
            );
            last = wave.amplitude_zeta;
        }
    }

    #[test]
    fn mpe_does_not_slow_convergence() {
        let coll = small_coll();
        let mut with = ProfileSolveConfig::new(coll.grid().clone(), 0.2);
        with.use_mpe = true;
        let mut without = with.clone();
        without.use_mpe = false;
        let a = solve_profile_on(&coll, &with).unwrap();
        let b = solve_profile_on(&coll, &without).unwrap();
        assert!(
            a.iterations <= b.iterations,
            "MPE {} vs plain {}",
            a.iterations,
            b.iterations
        );
    }

    #[test]
    fn left_mover_is_mirror_of_right_mover() {
        let coll = small_coll();
        let right = solve_profile_on(&coll, &ProfileSolveConfig::new(coll.grid().clone(), 0.3))
            .unwrap();
        let left = solve_profile_on(&coll, &ProfileSolveConfig::new(coll.grid().clone(), -0.3))
            .unwrap();
        for j in 0..coll.len() {
            assert!((right.zeta[j] - left.zeta[j]).abs() < 1e-8);
            assert!((right.u[j] + left.u[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn nonhamiltonian_profile_converges() {
        let sys = AbcdSystem::reduced(2.0, 0.8).unwrap();
        let grid = PeriodicGrid::new(128.0, 1024).unwrap();
        let coll = Collocation::new(grid.clone(), sys);
        let wave = solve_profile_on(&coll, &ProfileSolveConfig::new(grid, 0.4)).unwrap();
        assert!(wave.final_residual() <= 1e-12);
        assert!(wave.amplitude_zeta > 0.0);
    }
}
