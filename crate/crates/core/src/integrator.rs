//! Time evolution of the semidiscrete collocation system and its invariants.
//!
//! The semidiscrete system reads, per mode,
//!
//!   dζ̂/dt = −(ik̃/j_b)(l·û − (ε/γ)(ζu)^),
//!   dû/dt = −(ik̃/j_d)((1−γ)j_c·ζ̂ − (ε/2γ)(u²)^),
//!
//! and is marched with the three-stage composition of the implicit midpoint
//! rule with weights b₁ = 1/(2 − 2^{1/3}), b₂ = 1 − 2b₁, b₃ = b₁ — a
//! symmetric, symplectic, fourth-order scheme.  Each midpoint stage solves
//! its 2×2 linear part exactly per mode and fixed-point iterates only on the
//! nonlinearity, which contracts fast in the operating regime Δt ~ h.

use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{Collocation, WaveState};

/// Composition weights (b₁, b₂, b₃) of the fourth-order scheme.
pub fn composition_weights() -> (f64, f64, f64) {
    let b1 = 1.0 / (2.0 - 2.0_f64.powf(1.0 / 3.0));
    (b1, 1.0 - 2.0 * b1, b1)
}

/// March configuration.
#[derive(Debug, Clone, Serialize)]
pub struct EvolveConfig {
    pub dt: f64,
    pub t_final: f64,
    /// The march requires dt ≤ courant_ratio·h unless overridden.
    pub courant_ratio: f64,
    pub courant_override: bool,
    /// Fixed-point stop: successive stage iterates must differ by at most
    /// this in the grid-normalized 2-norm.
    pub stage_tolerance: f64,
    pub stage_max_iters: usize,
    /// Diagnostics stride in steps.
    pub record_every: usize,
}

impl EvolveConfig {
    pub fn new(dt: f64, t_final: f64) -> Self {
        Self {
            dt,
            t_final,
            courant_ratio: 1.0,
            courant_override: false,
            stage_tolerance: 1e-13,
            stage_max_iters: 100,
            record_every: 100,
        }
    }

    fn validate(&self, spacing: f64) -> Result<()> {
        if !(self.dt > 0.0) || !(self.t_final > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "dt = {} and t_final = {} must be positive",
                self.dt, self.t_final
            )));
        }
        if !self.courant_override && self.dt > self.courant_ratio * spacing {
            return Err(Error::Precondition(format!(
                "dt = {} exceeds courant_ratio * h = {}",
                self.dt,
                self.courant_ratio * spacing
            )));
        }
        if self.record_every == 0 {
            return Err(Error::ParameterDomain("record_every must be positive".into()));
        }
        Ok(())
    }
}

/// Recorded invariants along a march.
#[derive(Debug, Clone, Default, Serialize)]
pub struct InvariantSeries {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub momentum: Vec<f64>,
}

impl InvariantSeries {
    fn push(&mut self, t: f64, e: f64, i: f64) {
        self.times.push(t);
        self.energy.push(e);
        self.momentum.push(i);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Snapshot passed to the march observer.
pub struct EvolveRecord<'a> {
    pub step: usize,
    pub time: f64,
    pub state: &'a WaveState,
    pub energy: f64,
    pub momentum: f64,
}

/// Result of a march.
#[derive(Debug)]
pub struct EvolveOutput {
    pub final_state: WaveState,
    pub invariants: InvariantSeries,
    pub steps: usize,
}

/// Spectral time derivative of a state.
pub fn semidiscrete_rhs(
    coll: &Collocation,
    state: &WaveState,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let marcher = Marcher::new(coll);
    let (zh, uh) = state.spectra(coll.plan());
    let mut ws = Workspace::new(coll.len());
    marcher.rhs(zh, uh, &mut ws)
}

/// One implicit-midpoint substep of size `h_step` (may be negative).
pub fn implicit_midpoint_step(
    coll: &Collocation,
    state: &WaveState,
    h_step: f64,
    cfg: &EvolveConfig,
) -> Result<WaveState> {
    let marcher = Marcher::new(coll);
    let (zh, uh) = state.spectra(coll.plan()).clone();
    let mut ws = Workspace::new(coll.len());
    let (mut zh, mut uh) = (zh, uh);
    marcher.midpoint(&mut zh, &mut uh, h_step, cfg, 0.0, &mut ws)?;
    WaveState::from_spectra(coll.plan(), zh, uh)
}

/// One full composition step of size `cfg.dt`.
pub fn composition_step(
    coll: &Collocation,
    state: &WaveState,
    cfg: &EvolveConfig,
) -> Result<WaveState> {
    let marcher = Marcher::new(coll);
    let (zh, uh) = state.spectra(coll.plan()).clone();
    let mut ws = Workspace::new(coll.len());
    let (mut zh, mut uh) = (zh, uh);
    marcher.composition(&mut zh, &mut uh, cfg.dt, cfg, 0.0, &mut ws)?;
    WaveState::from_spectra(coll.plan(), zh, uh)
}

/// E_h = ½((1−γ)⟨Z, J_c Z⟩ + ⟨U, 𝓛U⟩) − (ε/2γ)⟨Z⊙U⊙U, 1⟩ under the
/// Euclidean nodal inner product (quadratic parts evaluated spectrally).
pub fn discrete_energy(coll: &Collocation, state: &WaveState) -> f64 {
    let sys = coll.system();
    let sym = coll.symbols();
    let (zh, uh) = state.spectra(coll.plan());
    let n = coll.len() as f64;
    let mut quad = 0.0;
    for k in 0..coll.len() {
        quad += (1.0 - sys.gamma) * sym.jc[k] * zh[k].norm_sqr() + sym.l[k] * uh[k].norm_sqr();
    }
    quad /= n;
    let cubic: f64 = state
        .zeta()
        .iter()
        .zip(state.u())
        .map(|(z, u)| z * u * u)
        .sum();
    0.5 * quad - 0.5 * sys.epsilon / sys.gamma * cubic
}

/// I_h = ⟨Z, J_b U⟩ under the Euclidean nodal inner product.
pub fn discrete_momentum(coll: &Collocation, state: &WaveState) -> f64 {
    let sym = coll.symbols();
    let (zh, uh) = state.spectra(coll.plan());
    let n = coll.len() as f64;
    let mut acc = 0.0;
    for k in 0..coll.len() {
        acc += sym.jb[k] * (zh[k].re * uh[k].re + zh[k].im * uh[k].im);
    }
    acc / n
}

/// March `initial` to `cfg.t_final`, invoking `observer` at step 0, every
/// `cfg.record_every` steps, and at the final step.  Deterministic given its
/// inputs.
pub fn evolve<F>(
    coll: &Collocation,
    initial: &WaveState,
    cfg: &EvolveConfig,
    mut observer: F,
) -> Result<EvolveOutput>
where
    F: FnMut(&EvolveRecord) -> Result<()>,
{
    cfg.validate(coll.grid().spacing())?;
    if initial.len() != coll.len() {
        return Err(Error::LengthMismatch {
            expected: coll.len(),
            got: initial.len(),
        });
    }
    let marcher = Marcher::new(coll);
    let mut ws = Workspace::new(coll.len());
    let n_steps = (cfg.t_final / cfg.dt).round() as usize;
    let (mut zh, mut uh) = state_spectra(coll, initial);

    let mut invariants = InvariantSeries::default();
    let mut record = |step: usize,
                      zh: &[Complex64],
                      uh: &[Complex64],
                      invariants: &mut InvariantSeries,
                      observer: &mut F|
     -> Result<()> {
        let time = step as f64 * cfg.dt;
        let state = WaveState::from_spectra(coll.plan(), zh.to_vec(), uh.to_vec())?;
        let energy = discrete_energy(coll, &state);
        let momentum = discrete_momentum(coll, &state);
        invariants.push(time, energy, momentum);
        observer(&EvolveRecord {
            step,
            time,
            state: &state,
            energy,
            momentum,
        })
    };

    record(0, &zh, &uh, &mut invariants, &mut observer)?;
    for step in 1..=n_steps {
        let t = (step - 1) as f64 * cfg.dt;
        marcher.composition(&mut zh, &mut uh, cfg.dt, cfg, t, &mut ws)?;
        if step % cfg.record_every == 0 || step == n_steps {
            record(step, &zh, &uh, &mut invariants, &mut observer)?;
        }
    }

    let final_state = WaveState::from_spectra(coll.plan(), zh, uh)?;
    Ok(EvolveOutput {
        final_state,
        invariants,
        steps: n_steps,
    })
}

fn state_spectra(coll: &Collocation, state: &WaveState) -> (Vec<Complex64>, Vec<Complex64>) {
    let (zh, uh) = state.spectra(coll.plan());
    (zh.clone(), uh.clone())
}

/// Reusable buffers for the stage iteration.
struct Workspace {
    ys_z: Vec<Complex64>,
    ys_u: Vec<Complex64>,
    nodal_z: Vec<Complex64>,
    nodal_u: Vec<Complex64>,
    prod_zu: Vec<Complex64>,
    prod_uu: Vec<Complex64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        let zero = vec![Complex64::default(); n];
        Self {
            ys_z: zero.clone(),
            ys_u: zero.clone(),
            nodal_z: zero.clone(),
            nodal_u: zero.clone(),
            prod_zu: zero.clone(),
            prod_uu: zero,
        }
    }
}

/// Precomputed per-mode coefficients of the split right-hand side.
struct Marcher<'a> {
    coll: &'a Collocation,
    /// dζ̂/dt linear coefficient on û is i·a12.
    a12: Vec<f64>,
    /// dû/dt linear coefficient on ζ̂ is i·a21.
    a21: Vec<f64>,
    /// dζ̂/dt nonlinear coefficient on (ζu)^ is i·g1.
    g1: Vec<f64>,
    /// dû/dt nonlinear coefficient on (u²)^ is i·g2.
    g2: Vec<f64>,
}

impl<'a> Marcher<'a> {
    fn new(coll: &'a Collocation) -> Self {
        let sys = coll.system();
        let sym = coll.symbols();
        let n = coll.len();
        let mut a12 = Vec::with_capacity(n);
        let mut a21 = Vec::with_capacity(n);
        let mut g1 = Vec::with_capacity(n);
        let mut g2 = Vec::with_capacity(n);
        for k in 0..n {
            let kt = sym.deriv[k];
            a12.push(-kt * sym.l[k] / sym.jb[k]);
            a21.push(-kt * (1.0 - sys.gamma) * sym.jc[k] / sym.jd[k]);
            g1.push(kt * sys.epsilon / sys.gamma / sym.jb[k]);
            g2.push(kt * sys.epsilon / (2.0 * sys.gamma) / sym.jd[k]);
        }
        Self { coll, a12, a21, g1, g2 }
    }

    /// Nonlinear spectral products (ζu)^ and (u²)^ of a spectral pair,
    /// written into the supplied buffers.
    #[allow(clippy::too_many_arguments)]
    fn products_into(
        &self,
        zh: &[Complex64],
        uh: &[Complex64],
        nodal_z: &mut [Complex64],
        nodal_u: &mut [Complex64],
        prod_zu: &mut [Complex64],
        prod_uu: &mut [Complex64],
    ) {
        let plan = self.coll.plan();
        nodal_z.copy_from_slice(zh);
        nodal_u.copy_from_slice(uh);
        plan.inverse_in_place(nodal_z);
        plan.inverse_in_place(nodal_u);
        for j in 0..zh.len() {
            let z = nodal_z[j].re;
            let u = nodal_u[j].re;
            prod_zu[j] = Complex64::new(z * u, 0.0);
            prod_uu[j] = Complex64::new(u * u, 0.0);
        }
        plan.forward_in_place(prod_zu);
        plan.forward_in_place(prod_uu);
    }

    fn rhs(
        &self,
        zh: &[Complex64],
        uh: &[Complex64],
        ws: &mut Workspace,
    ) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        self.products_into(
            zh,
            uh,
            &mut ws.nodal_z,
            &mut ws.nodal_u,
            &mut ws.prod_zu,
            &mut ws.prod_uu,
        );
        let n = zh.len();
        let mut dz = vec![Complex64::default(); n];
        let mut du = vec![Complex64::default(); n];
        for k in 0..n {
            dz[k] = Complex64::i() * (self.a12[k] * uh[k] + self.g1[k] * ws.prod_zu[k]);
            du[k] = Complex64::i() * (self.a21[k] * zh[k] + self.g2[k] * ws.prod_uu[k]);
        }
        Ok((dz, du))
    }

    /// In-place implicit-midpoint substep: the stage equation
    /// y* = yⁿ + (h/2)·rhs(y*) is solved by inverting the linear part exactly
    /// per mode and iterating on the nonlinearity; then yⁿ⁺¹ = 2y* − yⁿ.
    fn midpoint(
        &self,
        zh: &mut Vec<Complex64>,
        uh: &mut Vec<Complex64>,
        h_step: f64,
        cfg: &EvolveConfig,
        time: f64,
        ws: &mut Workspace,
    ) -> Result<()> {
        let n = zh.len();
        let half = 0.5 * h_step;
        let Workspace {
            ys_z,
            ys_u,
            nodal_z,
            nodal_u,
            prod_zu,
            prod_uu,
        } = ws;
        ys_z.copy_from_slice(zh);
        ys_u.copy_from_slice(uh);
        let mut converged = false;
        let mut last_diff = f64::INFINITY;
        for _it in 0..cfg.stage_max_iters {
            self.products_into(ys_z, ys_u, nodal_z, nodal_u, prod_zu, prod_uu);
            let mut diff2 = 0.0;
            for k in 0..n {
                let w1 = Complex64::i() * (self.g1[k] * prod_zu[k]);
                let w2 = Complex64::i() * (self.g2[k] * prod_uu[k]);
                let r1 = zh[k] + half * w1;
                let r2 = uh[k] + half * w2;
                let q12 = half * self.a12[k];
                let q21 = half * self.a21[k];
                let det = 1.0 + q12 * q21;
                let y1 = (r1 + Complex64::i() * (q12 * r2)) / det;
                let y2 = (r2 + Complex64::i() * (q21 * r1)) / det;
                diff2 += (y1 - ys_z[k]).norm_sqr() + (y2 - ys_u[k]).norm_sqr();
                ys_z[k] = y1;
                ys_u[k] = y2;
            }
            last_diff = (diff2 / n as f64).sqrt();
            if last_diff <= cfg.stage_tolerance {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::StageFailure {
                time,
                iterations: cfg.stage_max_iters,
                residual: last_diff,
            });
        }
        for k in 0..n {
            zh[k] = 2.0 * ys_z[k] - zh[k];
            uh[k] = 2.0 * ys_u[k] - uh[k];
        }
        Ok(())
    }

    fn composition(
        &self,
        zh: &mut Vec<Complex64>,
        uh: &mut Vec<Complex64>,
        dt: f64,
        cfg: &EvolveConfig,
        time: f64,
        ws: &mut Workspace,
    ) -> Result<()> {
        let (b1, b2, b3) = composition_weights();
        self.midpoint(zh, uh, b1 * dt, cfg, time, ws)?;
        self.midpoint(zh, uh, b2 * dt, cfg, time, ws)?;
        self.midpoint(zh, uh, b3 * dt, cfg, time, ws)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AbcdSystem;
    use crate::solitary::{solve_profile_on, ProfileSolveConfig};
    use crate::spectral::{eval_symbol_l, PeriodicGrid};

    fn sys08() -> AbcdSystem {
        AbcdSystem::reduced(0.0, 0.8).unwrap()
    }

    fn gaussian_state(coll: &Collocation, amp: f64, decay: f64) -> WaveState {
        let f: Vec<f64> = coll
            .grid()
            .nodes()
            .iter()
            .map(|&x| amp * (-decay * x * x).exp())
            .collect();
        WaveState::new(f.clone(), f).unwrap()
    }

    fn small_coll() -> Collocation {
        Collocation::new(PeriodicGrid::new(32.0, 256).unwrap(), sys08())
    }

    fn state_diff(a: &WaveState, b: &WaveState) -> f64 {
        let mut acc = 0.0;
        for (x, y) in a.zeta().iter().zip(b.zeta()) {
            acc += (x - y) * (x - y);
        }
        for (x, y) in a.u().iter().zip(b.u()) {
            acc += (x - y) * (x - y);
        }
        (acc / a.len() as f64).sqrt()
    }

    #[test]
    fn composition_weights_values() {
        let (b1, b2, b3) = composition_weights();
        assert!((b1 - 1.3512072).abs() < 1e-7);
        assert!((b2 + 1.7024144).abs() < 1e-7);
        assert_eq!(b1, b3);
        assert!((b1 + b2 + b3 - 1.0).abs() <= f64::EPSILON);
    }

    #[test]
    fn rhs_vanishes_on_equilibria() {
        let coll = small_coll();
        let zero = WaveState::new(vec![0.0; 256], vec![0.0; 256]).unwrap();
        let (dz, du) = semidiscrete_rhs(&coll, &zero).unwrap();
        assert!(dz.iter().chain(&du).all(|c| c.norm() == 0.0));
        // constants are steady: the derivative multiplier kills mode zero
        let consts = WaveState::new(vec![0.7; 256], vec![-0.3; 256]).unwrap();
        let (dz, du) = semidiscrete_rhs(&coll, &consts).unwrap();
        assert!(dz.iter().chain(&du).all(|c| c.norm() < 1e-12));
    }

    #[test]
    fn rhs_of_profile_is_pure_translation() {
        let grid = PeriodicGrid::new(128.0, 1024).unwrap();
        let coll = Collocation::new(grid.clone(), sys08());
        let cs = 0.3;
        let wave = solve_profile_on(&coll, &ProfileSolveConfig::new(grid, cs)).unwrap();
        let state = wave.state();
        let (dz, _) = semidiscrete_rhs(&coll, &state).unwrap();
        let (zh, _) = state.spectra(coll.plan());
        let sym = coll.symbols();
        // expected dzeta/dt = -c_s * (ik) zeta^
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..coll.len() {
            let expected = Complex64::i() * (-cs * sym.deriv[k]) * zh[k];
            num += (dz[k] - expected).norm_sqr();
            den += expected.norm_sqr();
        }
        assert!(num.sqrt() <= 1e-8 * den.sqrt().max(1.0), "rhs mismatch");
    }

    #[test]
    fn linear_step_needs_one_stage_iteration() {
        // with epsilon = 0 the stage map is exact after one pass
        let sys = AbcdSystem::new(-2.0 / 9.0, 1.0 / 3.0, -1.0 / 9.0, 1.0 / 3.0, 0.8, 0.0, 1.0, 10.0)
            .unwrap();
        let coll = Collocation::new(PeriodicGrid::new(32.0, 256).unwrap(), sys);
        let state = gaussian_state(&coll, 0.3, 0.1);
        let cfg = EvolveConfig::new(0.05, 1.0);
        let stepped = implicit_midpoint_step(&coll, &state, 0.05, &cfg).unwrap();
        // exact midpoint rule per mode: solve (I - (h/2)L) y* = y, reflect
        let (zh, uh) = state.spectra(coll.plan());
        let sym = coll.symbols();
        let sysr = coll.system();
        let (sh_z, sh_u) = stepped.spectra(coll.plan());
        let h = 0.025; // half step
        for k in 0..coll.len() {
            let a12 = Complex64::i() * (-sym.deriv[k] * sym.l[k] / sym.jb[k]);
            let a21 =
                Complex64::i() * (-sym.deriv[k] * (1.0 - sysr.gamma) * sym.jc[k] / sym.jd[k]);
            let det = Complex64::new(1.0, 0.0) - h * h * a12 * a21;
            let ys1 = (zh[k] + h * a12 * uh[k]) / det;
            let ys2 = (uh[k] + h * a21 * zh[k]) / det;
            let e1 = 2.0 * ys1 - zh[k];
            let e2 = 2.0 * ys2 - uh[k];
            assert!((sh_z[k] - e1).norm() <= 1e-10 * (1.0 + e1.norm()));
            assert!((sh_u[k] - e2).norm() <= 1e-10 * (1.0 + e2.norm()));
        }
    }

    #[test]
    fn midpoint_step_is_time_reversible() {
        let coll = small_coll();
        let state = gaussian_state(&coll, 0.3, 0.1);
        let cfg = EvolveConfig::new(0.05, 1.0);
        let fwd = implicit_midpoint_step(&coll, &state, 0.05, &cfg).unwrap();
        let back = implicit_midpoint_step(&coll, &fwd, -0.05, &cfg).unwrap();
        assert!(state_diff(&state, &back) < 1e-11);
    }

    #[test]
    fn base_method_is_second_order() {
        let coll = small_coll();
        let state = gaussian_state(&coll, 0.2, 0.1);
        let cfg = EvolveConfig::new(0.1, 1.0);
        let run = |dt: f64| {
            let steps = (1.0 / dt).round() as usize;
            let mut s = state.clone();
            for _ in 0..steps {
                s = implicit_midpoint_step(&coll, &s, dt, &cfg).unwrap();
            }
            s
        };
        let e1 = state_diff(&run(0.1), &run(0.05));
        let e2 = state_diff(&run(0.05), &run(0.025));
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.2, "observed order {order}");
    }

    #[test]
    fn composition_is_fourth_order() {
        let coll = small_coll();
        let state = gaussian_state(&coll, 0.2, 0.1);
        let run = |dt: f64| {
            let cfg = EvolveConfig::new(dt, 4.0);
            let mut zh_uh = state_spectra(&coll, &state);
            let marcher = Marcher::new(&coll);
            let mut ws = Workspace::new(coll.len());
            let steps = (4.0 / dt).round() as usize;
            for s in 0..steps {
                marcher
                    .composition(
                        &mut zh_uh.0,
                        &mut zh_uh.1,
                        dt,
                        &cfg,
                        s as f64 * dt,
                        &mut ws,
                    )
                    .unwrap();
            }
            WaveState::from_spectra(coll.plan(), zh_uh.0, zh_uh.1).unwrap()
        };
        let e1 = state_diff(&run(0.2), &run(0.1));
        let e2 = state_diff(&run(0.1), &run(0.05));
        let e3 = state_diff(&run(0.05), &run(0.025));
        let o1 = (e1 / e2).log2();
        let o2 = (e2 / e3).log2();
        assert!((o1 - 4.0).abs() < 0.2, "observed order {o1}");
        assert!((o2 - 4.0).abs() < 0.2, "observed order {o2}");
    }

    #[test]
    fn energy_of_zero_state_and_single_harmonic() {
        let coll = small_coll();
        let zero = WaveState::new(vec![0.0; 256], vec![0.0; 256]).unwrap();
        assert_eq!(discrete_energy(&coll, &zero), 0.0);
        assert_eq!(discrete_momentum(&coll, &zero), 0.0);

        let w = std::f64::consts::PI / coll.grid().half_length();
        let u: Vec<f64> = coll.grid().nodes().iter().map(|&x| (w * x).cos()).collect();
        let state = WaveState::new(vec![0.0; 256], u).unwrap();
        let e = discrete_energy(&coll, &state);
        let expected = 0.5 * eval_symbol_l(w, coll.system()) * (coll.len() as f64 / 2.0);
        assert!(
            (e - expected).abs() <= 1e-10 * expected.abs(),
            "E = {e}, expected {expected}"
        );
    }

    #[test]
    fn momentum_is_bilinear() {
        let coll = small_coll();
        let state = gaussian_state(&coll, 0.3, 0.1);
        let scaled = WaveState::new(
            state.zeta().iter().map(|z| 3.0 * z).collect(),
            state.u().to_vec(),
        )
        .unwrap();
        let i1 = discrete_momentum(&coll, &state);
        let i3 = discrete_momentum(&coll, &scaled);
        assert!((i3 - 3.0 * i1).abs() <= 1e-12 * (1.0 + i1.abs()));
    }

    #[test]
    fn linear_evolution_matches_mode_oscillation() {
        // with epsilon = 0 each mode rotates at frequency k*phi(k)
        let sys = AbcdSystem::new(-2.0 / 9.0, 1.0 / 3.0, -1.0 / 9.0, 1.0 / 3.0, 0.8, 0.0, 1.0, 10.0)
            .unwrap();
        let coll = Collocation::new(PeriodicGrid::new(32.0, 256).unwrap(), sys);
        let state = gaussian_state(&coll, 0.3, 0.1);
        let t_final = 2.0;
        let cfg = EvolveConfig {
            dt: 0.001,
            t_final,
            ..EvolveConfig::new(0.001, t_final)
        };
        let out = evolve(&coll, &state, &cfg, |_| Ok(())).unwrap();
        let (zh0, uh0) = state.spectra(coll.plan());
        let sym = coll.symbols();
        let (zh1, uh1) = out.final_state.spectra(coll.plan());
        let mut err = 0.0;
        let mut scale = 0.0;
        for k in 0..coll.len() {
            let kt = sym.deriv[k];
            let a12 = -kt * sym.l[k] / sym.jb[k];
            let a21 = -kt * (1.0 - sys.gamma) * sym.jc[k] / sym.jd[k];
            let omega = (a12 * a21).abs().sqrt(); // = |kt| phi(kt) for b = d
            let (c, s) = ((omega * t_final).cos(), (omega * t_final).sin());
            // exp(t Lam) for Lam = [[0, i a12], [i a21, 0]]
            let (ez, eu) = if omega == 0.0 {
                (zh0[k], uh0[k])
            } else {
                (
                    c * zh0[k] + Complex64::i() * (a12 / omega * s) * uh0[k],
                    c * uh0[k] + Complex64::i() * (a21 / omega * s) * zh0[k],
                )
            };
            err += (zh1[k] - ez).norm_sqr() + (uh1[k] - eu).norm_sqr();
            scale += ez.norm_sqr() + eu.norm_sqr();
        }
        assert!(
            err.sqrt() <= 1e-8 * scale.sqrt(),
            "linear oracle mismatch: {} vs {}",
            err.sqrt(),
            scale.sqrt()
        );
    }

    #[test]
    fn evolve_round_trip_reverses() {
        let coll = small_coll();
        let state = gaussian_state(&coll, 0.3, 0.1);
        let cfg = EvolveConfig::new(0.05, 100.0 * 0.05);
        let marcher = Marcher::new(&coll);
        let mut ws = Workspace::new(coll.len());
        let (mut zh, mut uh) = state_spectra(&coll, &state);
        for _ in 0..100 {
            marcher.composition(&mut zh, &mut uh, cfg.dt, &cfg, 0.0, &mut ws).unwrap();
        }
        for _ in 0..100 {
            marcher.composition(&mut zh, &mut uh, -cfg.dt, &cfg, 0.0, &mut ws).unwrap();
        }
        let back = WaveState::from_spectra(coll.plan(), zh, uh).unwrap();
        assert!(state_diff(&state, &back) < 1e-9);
    }

    #[test]
    fn courant_check_blocks_large_steps() {
        let coll = small_coll(); // h = 0.25
        let state = gaussian_state(&coll, 0.1, 0.1);
        let cfg = EvolveConfig::new(0.5, 1.0);
        assert!(matches!(
            evolve(&coll, &state, &cfg, |_| Ok(())),
            Err(Error::Precondition(_))
        ));
        let mut forced = cfg;
        forced.courant_override = true;
        assert!(evolve(&coll, &state, &forced, |_| Ok(())).is_ok());
    }

    #[test]
    fn evolved_states_stay_real() {
        // states synthesized from spectra keep conjugate symmetry; assert the
        // nodal fields carry no imaginary leakage by round-tripping
        let coll = small_coll();
        let state = gaussian_state(&coll, 0.4, 0.1);
        let cfg = EvolveConfig::new(0.1, 5.0);
        let out = evolve(&coll, &state, &cfg, |_| Ok(())).unwrap();
        let (zh, _) = out.final_state.spectra(coll.plan());
        let n = coll.len();
        let scale: f64 = zh.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        for k in 1..n {
            assert!(
                (zh[k] - zh[n - k].conj()).norm() <= 1e-12 * (1.0 + scale),
                "conjugate symmetry broken at mode {k}"
            );
        }
    }
}
