//! Experiment drivers: perturbed solitary waves, collisions, Gaussian
//! resolution runs, and the grid-refinement convergence study, with peak
//! tracking and structured CSV/JSON outputs.
//!
//! Each experiment owns one output directory:
//!
//! ```text
//! out/
//!   meta.json         full configuration echo, written before the march
//!   snapshots/        snap_<step>.csv (x, zeta, u)
//!   tracks/           track_<i>.csv (t, amplitude, position, speed)
//!   invariants.csv    t, E_h, I_h
//!   summary.json      per-wave amplitudes, speeds, readings, drifts
//!   plot/             gnuplot-ready .dat mirrors (--plotdata only)
//! ```
//!
//! A failed run leaves a FAILED marker next to whatever partial outputs were
//! flushed.

use std::fs;
use std::path::{Path, PathBuf};

use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{evolve, EvolveConfig, InvariantSeries};
use crate::model::AbcdSystem;
use crate::output;
use crate::solitary::{solve_profile_on, ProfileSolveConfig, SolitaryWave};
use crate::spectral::{translate_spectrum, Collocation, PeriodicGrid, WaveState};

/// Which fields a perturbation factor multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PerturbationMode {
    Both,
    ZetaOnly,
    UOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Rightward,
    Leftward,
}

/// One solitary wave to place in the initial data.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WaveLaunch {
    /// Speed magnitude; must be positive.
    pub speed: f64,
    pub center: f64,
    pub direction: Direction,
}

impl WaveLaunch {
    pub fn rightward(speed: f64, center: f64) -> Self {
        Self { speed, center, direction: Direction::Rightward }
    }

    pub fn leftward(speed: f64, center: f64) -> Self {
        Self { speed, center, direction: Direction::Leftward }
    }

    /// Signed speed passed to the profile solver.
    pub fn signed_speed(&self) -> f64 {
        match self.direction {
            Direction::Rightward => self.speed,
            Direction::Leftward => -self.speed,
        }
    }
}

/// ζ(x, 0) = u(x, 0) = A·e^{−τx²}.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GaussianPulse {
    pub amplitude: f64,
    pub decay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExperimentKind {
    /// Unperturbed propagation of the launched waves.
    Propagate,
    /// Launched waves scaled by the perturbation factor.
    Perturb,
    /// Exactly two launched waves.
    Collide,
    /// Gaussian pulse initial data.
    Gaussian,
}

/// Profile-solver settings shared by every launched wave.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolveSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub mpe_width: usize,
    pub use_mpe: bool,
    pub guess_amplitude: f64,
    pub guess_width: f64,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iterations: 500,
            mpe_width: 6,
            use_mpe: true,
            guess_amplitude: 1.0,
            guess_width: 0.3,
        }
    }
}

impl SolveSettings {
    fn config(&self, grid: PeriodicGrid, speed: f64) -> ProfileSolveConfig {
        let mut cfg = ProfileSolveConfig::new(grid, speed);
        cfg.tolerance = self.tolerance;
        cfg.max_iterations = self.max_iterations;
        cfg.mpe_width = self.mpe_width;
        cfg.use_mpe = self.use_mpe;
        cfg.guess_amplitude = self.guess_amplitude;
        cfg.guess_width = self.guess_width;
        cfg
    }
}

/// Complete description of one experiment run.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub kind: ExperimentKind,
    pub system: AbcdSystem,
    pub half_length: f64,
    pub n_modes: usize,
    pub waves: Vec<WaveLaunch>,
    /// Amplitude factor A; 1 leaves the waves untouched.
    pub perturbation: f64,
    pub perturbation_mode: PerturbationMode,
    pub gaussian: Option<GaussianPulse>,
    pub solve: SolveSettings,
    pub evolve: EvolveConfig,
    /// Snapshot stride in steps; 0 keeps only the first and last snapshots.
    pub snapshot_every: usize,
    /// Times at which per-track amplitude readings are taken (nearest record).
    pub readings_at: Vec<f64>,
    pub output_dir: PathBuf,
    pub plotdata: bool,
}

impl ExperimentSpec {
    pub fn new(
        name: impl Into<String>,
        kind: ExperimentKind,
        system: AbcdSystem,
        output_dir: impl Into<PathBuf>,
    ) -> Self {
        Self {
            name: name.into(),
            kind,
            system,
            half_length: 256.0,
            n_modes: 4096,
            waves: Vec::new(),
            perturbation: 1.0,
            perturbation_mode: PerturbationMode::Both,
            gaussian: None,
            solve: SolveSettings::default(),
            evolve: EvolveConfig::new(6.25e-3, 100.0),
            snapshot_every: 0,
            readings_at: vec![100.0, 400.0],
            output_dir: output_dir.into(),
            plotdata: false,
        }
    }

    /// Half-width of the exclusion window used when claiming several peaks:
    /// four characteristic lengths 1/guess_width of the initial profiles.
    pub fn mask_halfwidth(&self) -> f64 {
        4.0 / self.solve.guess_width
    }

    fn validate(&self) -> Result<()> {
        match self.kind {
            ExperimentKind::Collide => {
                if self.waves.len() != 2 {
                    return Err(Error::ParameterDomain(format!(
                        "a collision needs exactly two waves, got {}",
                        self.waves.len()
                    )));
                }
            }
            ExperimentKind::Gaussian => {
                let Some(g) = self.gaussian else {
                    return Err(Error::ParameterDomain(
                        "gaussian experiments need pulse parameters".into(),
                    ));
                };
                if !(g.amplitude > 0.0) || !(g.decay > 0.0) {
                    return Err(Error::ParameterDomain(format!(
                        "gaussian pulse needs positive amplitude and decay, got A = {}, tau = {}",
                        g.amplitude, g.decay
                    )));
                }
            }
            ExperimentKind::Propagate | ExperimentKind::Perturb => {
                if self.waves.is_empty() {
                    return Err(Error::ParameterDomain("no waves to launch".into()));
                }
            }
        }
        for w in &self.waves {
            if !(w.speed > 0.0) {
                return Err(Error::ParameterDomain(format!(
                    "wave speed {} must be positive; use the direction field",
                    w.speed
                )));
            }
        }
        Ok(())
    }
}

/// Initial data plus the profile solves that produced it.
pub struct InitialData {
    pub state: WaveState,
    pub waves: Vec<SolitaryWave>,
    pub warnings: Vec<String>,
}

/// Assemble the initial condition: solve each profile (left-movers solve
/// with negative speed), translate to the requested centers, superpose, and
/// apply the perturbation factor.
pub fn build_initial(coll: &Collocation, spec: &ExperimentSpec) -> Result<InitialData> {
    let n = coll.len();
    let mut warnings = Vec::new();

    if spec.kind == ExperimentKind::Gaussian {
        let g = spec.gaussian.expect("validated");
        let field: Vec<f64> = coll
            .grid()
            .nodes()
            .iter()
            .map(|&x| g.amplitude * (-g.decay * x * x).exp())
            .collect();
        return Ok(InitialData {
            state: WaveState::new(field.clone(), field)?,
            waves: Vec::new(),
            warnings,
        });
    }

    let mut waves = Vec::new();
    let mut placed: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for launch in &spec.waves {
        let cfg = spec.solve.config(coll.grid().clone(), launch.signed_speed());
        let wave = solve_profile_on(coll, &cfg)?;
        let (zeta, u) = if launch.center == 0.0 {
            (wave.zeta.clone(), wave.u.clone())
        } else {
            let mut zh = coll.plan().forward(&wave.zeta)?;
            let mut uh = coll.plan().forward(&wave.u)?;
            translate_spectrum(coll.grid(), &mut zh, -launch.center);
            translate_spectrum(coll.grid(), &mut uh, -launch.center);
            (coll.plan().inverse(&zh)?, coll.plan().inverse(&uh)?)
        };
        placed.push((zeta, u));
        waves.push(wave);
    }

    for i in 0..placed.len() {
        for j in (i + 1)..placed.len() {
            let overlap = mutual_mass(&placed[i].0, &placed[j].0);
            if overlap > 1e-10 {
                warnings.push(format!(
                    "waves {i} and {j} overlap with mutual mass {overlap:.3e}"
                ));
            }
        }
    }

    let mut zeta = vec![0.0; n];
    let mut u = vec![0.0; n];
    for (z, v) in &placed {
        for k in 0..n {
            zeta[k] += z[k];
            u[k] += v[k];
        }
    }
    let (az, au) = match spec.perturbation_mode {
        PerturbationMode::Both => (spec.perturbation, spec.perturbation),
        PerturbationMode::ZetaOnly => (spec.perturbation, 1.0),
        PerturbationMode::UOnly => (1.0, spec.perturbation),
    };
    for k in 0..n {
        zeta[k] *= az;
        u[k] *= au;
    }
    Ok(InitialData {
        state: WaveState::new(zeta, u)?,
        waves,
        warnings,
    })
}

/// Normalized pairwise overlap Σ|f||g| / (‖f‖‖g‖).
fn mutual_mass(f: &[f64], g: &[f64]) -> f64 {
    let dot: f64 = f.iter().zip(g).map(|(a, b)| a.abs() * b.abs()).sum();
    let nf: f64 = f.iter().map(|a| a * a).sum::<f64>().sqrt();
    let ng: f64 = g.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nf == 0.0 || ng == 0.0 {
        0.0
    } else {
        dot / (nf * ng)
    }
}

/// One tracked peak sample.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WaveTrackRecord {
    pub time: f64,
    /// Parabola-corrected peak height of ζ.
    pub amplitude: f64,
    /// Unwrapped peak location (continuous across the periodic seam).
    pub position: f64,
    /// Least-squares slope over the last up-to-10 records; absent until two
    /// records exist.
    pub speed_estimate: Option<f64>,
}

/// Amplitude threshold below which a field is considered peakless.
const PEAK_FLOOR: f64 = 1e-14;

/// Raw (wrapped) parabola peak of ζ.
fn raw_peak(grid: &PeriodicGrid, zeta: &[f64], masked: &[bool]) -> Result<(f64, f64)> {
    let n = zeta.len();
    let mut jmax = None;
    for j in 0..n {
        if masked[j] {
            continue;
        }
        if jmax.map_or(true, |m: usize| zeta[j] > zeta[m]) {
            jmax = Some(j);
        }
    }
    let jmax = jmax.ok_or(Error::NoPeak)?;
    if zeta[jmax] < PEAK_FLOOR {
        return Err(Error::NoPeak);
    }
    let ym = zeta[(jmax + n - 1) % n];
    let y0 = zeta[jmax];
    let yp = zeta[(jmax + 1) % n];
    let denom = ym - 2.0 * y0 + yp;
    let delta = if denom.abs() > 0.0 {
        (0.5 * (ym - yp) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let amplitude = y0 - 0.25 * (ym - yp) * delta;
    Ok((grid.node(jmax) + delta * grid.spacing(), amplitude))
}

fn unwrap_position(raw: f64, previous: f64, period: f64) -> f64 {
    raw + period * ((previous - raw) / period).round()
}

fn speed_from(history: &[WaveTrackRecord], time: f64, position: f64) -> Option<f64> {
    let tail_len = history.len().min(9);
    let mut ts: Vec<f64> = history[history.len() - tail_len..]
        .iter()
        .map(|r| r.time)
        .collect();
    let mut xs: Vec<f64> = history[history.len() - tail_len..]
        .iter()
        .map(|r| r.position)
        .collect();
    ts.push(time);
    xs.push(position);
    if ts.len() < 2 {
        return None;
    }
    let n = ts.len() as f64;
    let tbar = ts.iter().sum::<f64>() / n;
    let xbar = xs.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, x) in ts.iter().zip(&xs) {
        num += (t - tbar) * (x - xbar);
        den += (t - tbar) * (t - tbar);
    }
    (den > 0.0).then(|| num / den)
}

/// Track the single highest peak of ζ, unwrapping against the history and
/// estimating the speed from the last ten records.
pub fn track_peak(
    grid: &PeriodicGrid,
    zeta: &[f64],
    time: f64,
    history: &[WaveTrackRecord],
) -> Result<WaveTrackRecord> {
    let masked = vec![false; zeta.len()];
    let (raw, amplitude) = raw_peak(grid, zeta, &masked)?;
    let position = match history.last() {
        Some(prev) => unwrap_position(raw, prev.position, 2.0 * grid.half_length()),
        None => raw,
    };
    Ok(WaveTrackRecord {
        time,
        amplitude,
        position,
        speed_estimate: speed_from(history, time, position),
    })
}

/// Multi-peak tracker: claims the highest peaks one by one, masking a window
/// around each claim, then matches claims to existing tracks by periodic
/// distance.
#[derive(Debug)]
pub struct PeakTracker {
    mask_halfwidth: f64,
    tracks: Vec<Vec<WaveTrackRecord>>,
}

impl PeakTracker {
    pub fn new(n_tracks: usize, mask_halfwidth: f64) -> Self {
        Self {
            mask_halfwidth,
            tracks: vec![Vec::new(); n_tracks.max(1)],
        }
    }

    pub fn tracks(&self) -> &[Vec<WaveTrackRecord>] {
        &self.tracks
    }

    pub fn into_tracks(self) -> Vec<Vec<WaveTrackRecord>> {
        self.tracks
    }

    pub fn update(&mut self, grid: &PeriodicGrid, time: f64, zeta: &[f64]) -> Result<()> {
        let n = zeta.len();
        let period = 2.0 * grid.half_length();
        let mut masked = vec![false; n];
        let mut claims: Vec<(f64, f64)> = Vec::new();
        for _ in 0..self.tracks.len() {
            match raw_peak(grid, zeta, &masked) {
                Ok((pos, amp)) => {
                    for (j, m) in masked.iter_mut().enumerate() {
                        let d = periodic_distance(grid.node(j), pos, period);
                        if d <= self.mask_halfwidth {
                            *m = true;
                        }
                    }
                    claims.push((pos, amp));
                }
                // everything masked or flat: reuse the strongest claim
                Err(_) => match claims.first() {
                    Some(&c) => claims.push(c),
                    None => return Err(Error::NoPeak),
                },
            }
        }

        // nearest-claim matching, tracks in fixed order
        let mut available: Vec<usize> = (0..claims.len()).collect();
        for track in &mut self.tracks {
            let target = track.last().map(|r| r.position);
            let pick = match target {
                Some(p) => available
                    .iter()
                    .copied()
                    .min_by(|&a, &b| {
                        let da = periodic_distance(claims[a].0, p, period);
                        let db = periodic_distance(claims[b].0, p, period);
                        da.partial_cmp(&db).expect("finite distances")
                    })
                    .expect("at least one claim"),
                // first record: tallest unclaimed peak
                None => available
                    .iter()
                    .copied()
                    .max_by(|&a, &b| {
                        claims[a]
                            .1
                            .partial_cmp(&claims[b].1)
                            .expect("finite amplitudes")
                    })
                    .expect("at least one claim"),
            };
            if available.len() > 1 {
                available.retain(|&i| i != pick);
            }
            let (raw, amplitude) = claims[pick];
            let position = match track.last() {
                Some(prev) => unwrap_position(raw, prev.position, period),
                None => raw,
            };
            let speed_estimate = speed_from(track, time, position);
            track.push(WaveTrackRecord {
                time,
                amplitude,
                position,
                speed_estimate,
            });
        }
        Ok(())
    }
}

fn periodic_distance(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d)
}

/// Per-track summary entry.
#[derive(Debug, Clone, Serialize)]
pub struct TrackSummary {
    pub initial_amplitude: f64,
    pub initial_position: f64,
    pub final_amplitude: f64,
    pub final_position: f64,
    pub final_speed_estimate: Option<f64>,
    pub readings: Vec<AmplitudeReading>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AmplitudeReading {
    pub requested_time: f64,
    pub actual_time: f64,
    pub amplitude: f64,
    pub position: f64,
}

/// Per-launched-wave profile summary.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileSummary {
    pub signed_speed: f64,
    pub iterations: usize,
    pub final_residual: f64,
    pub amplitude_zeta: f64,
    pub amplitude_u: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub spec: ExperimentSpec,
    pub profiles: Vec<ProfileSummary>,
    pub tracks: Vec<TrackSummary>,
    pub energy_initial: f64,
    pub energy_final: f64,
    pub max_energy_deviation: f64,
    pub momentum_initial: f64,
    pub momentum_final: f64,
    pub max_momentum_deviation: f64,
    pub warnings: Vec<String>,
}

/// Everything a finished experiment hands back.
pub struct OutputBundle {
    pub dir: PathBuf,
    pub summary: ExperimentSummary,
    pub invariants: InvariantSeries,
    pub tracks: Vec<Vec<WaveTrackRecord>>,
    pub final_state: WaveState,
}

/// Run one experiment end to end, writing all outputs under its directory.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<OutputBundle> {
    spec.validate()?;
    let grid = PeriodicGrid::new(spec.half_length, spec.n_modes)?;
    let coll = Collocation::new(grid, spec.system);
    let dir = spec.output_dir.clone();
    fs::create_dir_all(dir.join("snapshots"))?;
    fs::create_dir_all(dir.join("tracks"))?;
    output::write_json(&dir.join("meta.json"), spec)?;

    match run_inner(&coll, spec, &dir) {
        Ok(bundle) => Ok(bundle),
        Err(e) => {
            let _ = fs::write(dir.join("FAILED"), format!("{e}\n"));
            Err(e)
        }
    }
}

fn run_inner(coll: &Collocation, spec: &ExperimentSpec, dir: &Path) -> Result<OutputBundle> {
    let initial = build_initial(coll, spec)?;
    let n_tracks = match spec.kind {
        ExperimentKind::Gaussian => 1,
        _ => spec.waves.len(),
    };
    let mut tracker = PeakTracker::new(n_tracks, spec.mask_halfwidth());
    let total_steps = (spec.evolve.t_final / spec.evolve.dt).round() as usize;
    let snapshot_due = |step: usize| {
        step == 0
            || step == total_steps
            || (spec.snapshot_every > 0 && step % spec.snapshot_every == 0)
    };

    let out = evolve(coll, &initial.state, &spec.evolve, |rec| {
        tracker.update(coll.grid(), rec.time, rec.state.zeta())?;
        if snapshot_due(rec.step) {
            let path = dir.join("snapshots").join(format!("snap_{:08}.csv", rec.step));
            output::write_nodal_csv(
                &path,
                coll.grid(),
                coll.system(),
                &[("zeta", rec.state.zeta()), ("u", rec.state.u())],
            )?;
        }
        Ok(())
    })?;

    write_invariants_csv(&dir.join("invariants.csv"), &out.invariants)?;
    let tracks = tracker.into_tracks();
    for (i, track) in tracks.iter().enumerate() {
        write_track_csv(&dir.join("tracks").join(format!("track_{i}.csv")), track)?;
    }

    let summary = summarize(spec, &initial, &out.invariants, &tracks);
    output::write_json(&dir.join("summary.json"), &summary)?;

    if spec.plotdata {
        write_plotdata(dir, coll, &out.invariants, &tracks)?;
    }

    Ok(OutputBundle {
        dir: dir.to_path_buf(),
        summary,
        invariants: out.invariants,
        tracks,
        final_state: out.final_state,
    })
}

fn summarize(
    spec: &ExperimentSpec,
    initial: &InitialData,
    invariants: &InvariantSeries,
    tracks: &[Vec<WaveTrackRecord>],
) -> ExperimentSummary {
    let profiles = initial
        .waves
        .iter()
        .map(|w| ProfileSummary {
            signed_speed: w.speed,
            iterations: w.iterations,
            final_residual: w.final_residual(),
            amplitude_zeta: w.amplitude_zeta,
            amplitude_u: w.amplitude_u,
        })
        .collect();
    let track_summaries = tracks
        .iter()
        .map(|t| {
            let first = t.first();
            let last = t.last();
            TrackSummary {
                initial_amplitude: first.map_or(f64::NAN, |r| r.amplitude),
                initial_position: first.map_or(f64::NAN, |r| r.position),
                final_amplitude: last.map_or(f64::NAN, |r| r.amplitude),
                final_position: last.map_or(f64::NAN, |r| r.position),
                final_speed_estimate: last.and_then(|r| r.speed_estimate),
                readings: spec
                    .readings_at
                    .iter()
                    .filter_map(|&rt| {
                        let rec = t.iter().min_by(|a, b| {
                            (a.time - rt)
                                .abs()
                                .partial_cmp(&(b.time - rt).abs())
                                .expect("finite times")
                        })?;
                        Some(AmplitudeReading {
                            requested_time: rt,
                            actual_time: rec.time,
                            amplitude: rec.amplitude,
                            position: rec.position,
                        })
                    })
                    .collect(),
            }
        })
        .collect();
    let e0 = invariants.energy.first().copied().unwrap_or(f64::NAN);
    let i0 = invariants.momentum.first().copied().unwrap_or(f64::NAN);
    ExperimentSummary {
        spec: spec.clone(),
        profiles,
        tracks: track_summaries,
        energy_initial: e0,
        energy_final: invariants.energy.last().copied().unwrap_or(f64::NAN),
        max_energy_deviation: invariants
            .energy
            .iter()
            .map(|e| (e - e0).abs())
            .fold(0.0, f64::max),
        momentum_initial: i0,
        momentum_final: invariants.momentum.last().copied().unwrap_or(f64::NAN),
        max_momentum_deviation: invariants
            .momentum
            .iter()
            .map(|i| (i - i0).abs())
            .fold(0.0, f64::max),
        warnings: initial.warnings.clone(),
    }
}

fn write_invariants_csv(path: &Path, inv: &InvariantSeries) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(w, "t,E_h,I_h")?;
    for i in 0..inv.len() {
        writeln!(
            w,
            "{},{},{}",
            output::fmt_f64(inv.times[i]),
            output::fmt_f64(inv.energy[i]),
            output::fmt_f64(inv.momentum[i])
        )?;
    }
    Ok(())
}

fn write_track_csv(path: &Path, track: &[WaveTrackRecord]) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(w, "t,amplitude,position,speed")?;
    for r in track {
        writeln!(
            w,
            "{},{},{},{}",
            output::fmt_f64(r.time),
            output::fmt_f64(r.amplitude),
            output::fmt_f64(r.position),
            r.speed_estimate.map_or_else(String::new, output::fmt_f64)
        )?;
    }
    Ok(())
}

/// Space-separated mirrors of the CSV outputs for direct gnuplot use.
fn write_plotdata(
    dir: &Path,
    coll: &Collocation,
    inv: &InvariantSeries,
    tracks: &[Vec<WaveTrackRecord>],
) -> Result<()> {
    use std::io::Write;
    let plot = dir.join("plot");
    fs::create_dir_all(&plot)?;
    {
        let mut w = std::io::BufWriter::new(fs::File::create(plot.join("invariants.dat"))?);
        writeln!(w, "# t E_h I_h")?;
        for i in 0..inv.len() {
            writeln!(
                w,
                "{} {} {}",
                output::fmt_f64(inv.times[i]),
                output::fmt_f64(inv.energy[i]),
                output::fmt_f64(inv.momentum[i])
            )?;
        }
    }
    for (i, track) in tracks.iter().enumerate() {
        let mut w =
            std::io::BufWriter::new(fs::File::create(plot.join(format!("track_{i}.dat")))?);
        writeln!(w, "# t amplitude position speed")?;
        for r in track {
            writeln!(
                w,
                "{} {} {} {}",
                output::fmt_f64(r.time),
                output::fmt_f64(r.amplitude),
                output::fmt_f64(r.position),
                r.speed_estimate.map_or_else(|| "nan".into(), output::fmt_f64)
            )?;
        }
    }
    // mirror every snapshot csv as a space-separated .dat
    let snaps = dir.join("snapshots");
    if snaps.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(&snaps)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        entries.sort();
        for entry in entries {
            let file = output::read_wave_csv(&entry)?;
            let stem = entry.file_stem().and_then(|s| s.to_str()).unwrap_or("snap");
            let mut w =
                std::io::BufWriter::new(fs::File::create(plot.join(format!("{stem}.dat")))?);
            writeln!(w, "# x zeta u")?;
            for j in 0..file.n_modes {
                writeln!(
                    w,
                    "{} {} {}",
                    output::fmt_f64(coll.grid().node(j)),
                    output::fmt_f64(file.zeta[j]),
                    output::fmt_f64(file.u[j])
                )?;
            }
        }
    }
    Ok(())
}

/// One row of the convergence table.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub err_zeta: f64,
    pub err_u: f64,
    /// log2(err(N/2) / err(N)); absent on the first row.
    pub observed_rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub reference_n: usize,
    pub dt: f64,
    pub t_final: f64,
    pub halvings: usize,
}

/// Configuration of the grid-refinement study.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceConfig {
    pub system: AbcdSystem,
    pub half_length: f64,
    pub n_list: Vec<usize>,
    pub reference_n: usize,
    pub gaussian: GaussianPulse,
    pub t_final: f64,
    /// Starting time step; halved until the table stabilizes.
    pub dt0: f64,
    pub max_halvings: usize,
    /// Relative movement below which the table is considered converged in dt.
    pub stabilization: f64,
}

impl ConvergenceConfig {
    pub fn new(system: AbcdSystem) -> Self {
        Self {
            system,
            half_length: 128.0,
            n_list: vec![64, 128, 256, 512],
            reference_n: 4096,
            gaussian: GaussianPulse { amplitude: 0.1, decay: 0.1 },
            t_final: 1.0,
            dt0: 0.01,
            max_halvings: 4,
            stabilization: 0.01,
        }
    }
}

/// Evolve Gaussian data on each grid and compare against the reference grid
/// restricted to the coarse modes; the time step is halved until the error
/// table moves by less than the stabilization threshold.
pub fn convergence_study(cfg: &ConvergenceConfig) -> Result<ConvergenceTable> {
    let max_n = cfg.n_list.iter().copied().max().unwrap_or(0);
    if cfg.n_list.is_empty() {
        return Err(Error::ParameterDomain("empty refinement list".into()));
    }
    if cfg.reference_n < 4 * max_n {
        return Err(Error::Precondition(format!(
            "reference_n = {} must be at least 4x the largest grid {max_n}",
            cfg.reference_n
        )));
    }
    let mut dt = cfg.dt0;
    let mut table = errors_at(cfg, dt)?;
    let mut halvings = 0;
    while halvings < cfg.max_halvings {
        let finer = errors_at(cfg, dt / 2.0)?;
        let moved = table
            .iter()
            .zip(&finer)
            .map(|(a, b)| {
                let scale = a.1.abs().max(b.1.abs()).max(1e-300);
                (a.1 - b.1).abs() / scale
            })
            .fold(0.0, f64::max);
        dt /= 2.0;
        halvings += 1;
        table = finer;
        if moved < cfg.stabilization {
            break;
        }
    }
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for (i, &(n, ez, eu)) in table.iter().enumerate() {
        let observed_rate = (i > 0).then(|| (table[i - 1].1 / ez).log2());
        rows.push(ConvergenceRow {
            n,
            err_zeta: ez,
            err_u: eu,
            observed_rate,
        });
    }
    Ok(ConvergenceTable {
        rows,
        reference_n: cfg.reference_n,
        dt,
        t_final: cfg.t_final,
        halvings,
    })
}

fn gaussian_state(grid: &PeriodicGrid, g: &GaussianPulse) -> WaveState {
    let f: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&x| g.amplitude * (-g.decay * x * x).exp())
        .collect();
    WaveState::new(f.clone(), f).expect("matching lengths")
}

fn errors_at(cfg: &ConvergenceConfig, dt: f64) -> Result<Vec<(usize, f64, f64)>> {
    let run = |n: usize| -> Result<(Collocation, Vec<Complex64>, Vec<Complex64>)> {
        let grid = PeriodicGrid::new(cfg.half_length, n)?;
        let coll = Collocation::new(grid, cfg.system);
        let state = gaussian_state(coll.grid(), &cfg.gaussian);
        let mut ev = EvolveConfig::new(dt, cfg.t_final);
        ev.record_every = usize::MAX;
        let out = evolve(&coll, &state, &ev, |_| Ok(()))?;
        let (zh, uh) = out.final_state.spectra(coll.plan()).clone();
        Ok((coll, zh, uh))
    };
    let (_, ref_zh, ref_uh) = run(cfg.reference_n)?;
    let mut rows = Vec::new();
    for &n in &cfg.n_list {
        let (coll, zh, uh) = run(n)?;
        let rz = restrict_spectrum(&ref_zh, n);
        let ru = restrict_spectrum(&ref_uh, n);
        let h = coll.grid().spacing();
        let ez = spectral_diff_norm(coll.plan(), &zh, &rz, h)?;
        let eu = spectral_diff_norm(coll.plan(), &uh, &ru, h)?;
        rows.push((n, ez, eu));
    }
    Ok(rows)
}

/// Keep the coarse grid's modes of a fine spectrum, rescaled to the coarse
/// transform's normalization.
fn restrict_spectrum(fine: &[Complex64], n_coarse: usize) -> Vec<Complex64> {
    let n_fine = fine.len();
    let scale = n_coarse as f64 / n_fine as f64;
    let half = n_coarse / 2;
    let mut out = vec![Complex64::default(); n_coarse];
    for k in 0..half {
        out[k] = scale * fine[k];
    }
    for k in half..n_coarse {
        out[k] = scale * fine[n_fine - n_coarse + k];
    }
    out
}

/// √h-weighted discrete L² distance between two same-grid spectra.
fn spectral_diff_norm(
    plan: &crate::spectral::FourierTransform,
    a: &[Complex64],
    b: &[Complex64],
    h: f64,
) -> Result<f64> {
    let diff: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let nodal = plan.inverse(&diff)?;
    Ok((h * nodal.iter().map(|v| v * v).sum::<f64>()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::discrete_energy;

    fn sys08() -> AbcdSystem {
        AbcdSystem::reduced(0.0, 0.8).unwrap()
    }

    fn tiny_spec(dir: &Path) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new("tiny", ExperimentKind::Gaussian, sys08(), dir);
        spec.half_length = 32.0;
        spec.n_modes = 256;
        spec.gaussian = Some(GaussianPulse { amplitude: 0.2, decay: 0.1 });
        spec.evolve = EvolveConfig::new(0.1, 2.0);
        spec.evolve.record_every = 5;
        spec.readings_at = vec![1.0];
        spec
    }

    #[test]
    fn validation_catches_malformed_specs() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = ExperimentSpec::new("bad", ExperimentKind::Collide, sys08(), dir.path());
        spec.waves = vec![WaveLaunch::rightward(0.1, -20.0)];
        assert!(run_experiment(&spec).is_err());

        let mut spec = ExperimentSpec::new("bad2", ExperimentKind::Gaussian, sys08(), dir.path());
        spec.gaussian = Some(GaussianPulse { amplitude: -1.0, decay: 0.01 });
        assert!(run_experiment(&spec).is_err());
    }

    #[test]
    fn gaussian_initial_data_matches_formula() {
        let dir = tempfile::tempdir().unwrap();
        let spec = tiny_spec(dir.path());
        let grid = PeriodicGrid::new(spec.half_length, spec.n_modes).unwrap();
        let coll = Collocation::new(grid, spec.system);
        let init = build_initial(&coll, &spec).unwrap();
        for (j, &x) in coll.grid().nodes().iter().enumerate() {
            let expected = 0.2 * (-0.1 * x * x).exp();
            assert_eq!(init.state.zeta()[j], expected);
            assert_eq!(init.state.u()[j], expected);
        }
    }

    #[test]
    fn unperturbed_single_wave_is_bitwise_the_profile() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec =
            ExperimentSpec::new("prop", ExperimentKind::Propagate, sys08(), dir.path());
        spec.half_length = 128.0;
        spec.n_modes = 1024;
        spec.waves = vec![WaveLaunch::rightward(0.3, 0.0)];
        let grid = PeriodicGrid::new(spec.half_length, spec.n_modes).unwrap();
        let coll = Collocation::new(grid, spec.system);
        let init = build_initial(&coll, &spec).unwrap();
        assert_eq!(init.waves.len(), 1);
        assert_eq!(init.state.zeta(), &init.waves[0].zeta[..]);
        assert_eq!(init.state.u(), &init.waves[0].u[..]);
    }

    #[test]
    fn perturbation_scales_selected_fields() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec =
            ExperimentSpec::new("pert", ExperimentKind::Perturb, sys08(), dir.path());
        spec.half_length = 128.0;
        spec.n_modes = 1024;
        spec.waves = vec![WaveLaunch::rightward(0.3, 0.0)];
        spec.perturbation = 1.2;
        spec.perturbation_mode = PerturbationMode::ZetaOnly;
        let grid = PeriodicGrid::new(spec.half_length, spec.n_modes).unwrap();
        let coll = Collocation::new(grid, spec.system);
        let init = build_initial(&coll, &spec).unwrap();
        let base = &init.waves[0];
        for j in 0..coll.len() {
            assert_eq!(init.state.zeta()[j], 1.2 * base.zeta[j]);
            assert_eq!(init.state.u()[j], base.u[j]);
        }
    }

    #[test]
    fn superposition_energy_is_additive_for_separated_waves() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec =
            ExperimentSpec::new("sup", ExperimentKind::Collide, sys08(), dir.path());
        spec.half_length = 256.0;
        spec.n_modes = 2048;
        spec.waves = vec![
            WaveLaunch::rightward(0.3, -60.0),
            WaveLaunch::leftward(0.35, 60.0),
        ];
        let grid = PeriodicGrid::new(spec.half_length, spec.n_modes).unwrap();
        let coll = Collocation::new(grid, spec.system);
        let init = build_initial(&coll, &spec).unwrap();
        let total = discrete_energy(&coll, &init.state);
        let mut parts = 0.0;
        for w in &init.waves {
            parts += discrete_energy(&coll, &w.state());
        }
        assert!(
            (total - parts).abs() <= 1e-8 * (1.0 + parts.abs()),
            "E(sum) = {total} vs sum(E) = {parts}"
        );
    }

    #[test]
    fn planted_peak_is_located_to_subgrid_accuracy() {
        let grid = PeriodicGrid::new(32.0, 256).unwrap();
        let h = grid.spacing();
        for frac in [0.0, 0.3, 0.5, 0.7] {
            let x0 = 3.0 + frac * h;
            let zeta: Vec<f64> = grid
                .nodes()
                .iter()
                .map(|&x| 1.0 / (0.3 * (x - x0)).cosh().powi(2))
                .collect();
            let rec = track_peak(&grid, &zeta, 0.0, &[]).unwrap();
            assert!(
                (rec.position - x0).abs() <= 1e-3 * h,
                "planted at {x0}, found {} (err {})",
                rec.position,
                (rec.position - x0).abs()
            );
        }
    }

    #[test]
    fn translated_snapshot_moves_the_tracked_peak() {
        let grid = PeriodicGrid::new(32.0, 256).unwrap();
        let plan = crate::spectral::FourierTransform::new(256);
        let h = grid.spacing();
        let zeta: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&x| 1.0 / (0.3 * x).cosh().powi(2))
            .collect();
        let s = 1.2345;
        let moved = crate::spectral::translate(&plan, &grid, &zeta, -s).unwrap();
        let a = track_peak(&grid, &zeta, 0.0, &[]).unwrap();
        let b = track_peak(&grid, &moved, 1.0, &[]).unwrap();
        assert!(
            ((b.position - a.position) - s).abs() <= 1e-3 * h,
            "shift read as {}",
            b.position - a.position
        );
    }

    #[test]
    fn flat_field_yields_no_peak() {
        let grid = PeriodicGrid::new(32.0, 256).unwrap();
        let zeta = vec![1e-16; 256];
        assert!(matches!(
            track_peak(&grid, &zeta, 0.0, &[]),
            Err(Error::NoPeak)
        ));
    }

    #[test]
    fn unwrapping_crosses_the_periodic_seam() {
        let grid = PeriodicGrid::new(32.0, 256).unwrap();
        let plan = crate::spectral::FourierTransform::new(256);
        let base: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&x| 1.0 / (0.3 * (x - 30.0)).cosh().powi(2))
            .collect();
        let mut history = vec![track_peak(&grid, &base, 0.0, &[]).unwrap()];
        // move the peak rightward across the seam in five steps
        for i in 1..=5 {
            let moved =
                crate::spectral::translate(&plan, &grid, &base, -(i as f64)).unwrap();
            let rec = track_peak(&grid, &moved, i as f64, &history).unwrap();
            history.push(rec);
        }
        let last = history.last().unwrap();
        assert!((last.position - 35.0).abs() < 1e-2, "got {}", last.position);
        let speed = last.speed_estimate.unwrap();
        assert!((speed - 1.0).abs() < 1e-3, "speed {speed}");
    }

    #[test]
    fn experiment_outputs_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let spec = tiny_spec(&dir.path().join("run"));
        let a = run_experiment(&spec).unwrap();
        let first = output::to_json_string(&a.summary).unwrap();
        let b = run_experiment(&spec).unwrap();
        let second = output::to_json_string(&b.summary).unwrap();
        assert_eq!(first, second, "summary JSON must be bit-identical");
        let base = &spec.output_dir;
        assert!(base.join("meta.json").is_file());
        assert!(base.join("summary.json").is_file());
        assert!(base.join("invariants.csv").is_file());
        assert!(base.join("tracks").join("track_0.csv").is_file());
        assert!(base.join("snapshots").join("snap_00000000.csv").is_file());
        assert!(base.join("snapshots").join("snap_00000020.csv").is_file());
        assert_eq!(a.invariants.len(), b.invariants.len());
    }

    #[test]
    fn plotdata_mirrors_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = tiny_spec(&dir.path().join("run"));
        spec.plotdata = true;
        run_experiment(&spec).unwrap();
        let plot = spec.output_dir.join("plot");
        assert!(plot.join("invariants.dat").is_file());
        assert!(plot.join("track_0.dat").is_file());
        assert!(plot.join("snap_00000000.dat").is_file());
    }

    #[test]
    fn convergence_reference_floor_is_enforced() {
        let mut cfg = ConvergenceConfig::new(sys08());
        cfg.n_list = vec![64, 128];
        cfg.reference_n = 256;
        assert!(matches!(
            convergence_study(&cfg),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn self_comparison_error_is_zero() {
        let cfg = ConvergenceConfig {
            n_list: vec![256],
            reference_n: 256,
            half_length: 32.0,
            t_final: 0.2,
            dt0: 0.05,
            ..ConvergenceConfig::new(sys08())
        };
        let rows = errors_at(&cfg, cfg.dt0).unwrap();
        assert_eq!(rows[0].1, 0.0);
        assert_eq!(rows[0].2, 0.0);
    }

    #[test]
    fn coarse_errors_decay_fast() {
        let cfg = ConvergenceConfig {
            n_list: vec![32, 64],
            reference_n: 256,
            half_length: 32.0,
            t_final: 0.2,
            dt0: 0.02,
            max_halvings: 1,
            ..ConvergenceConfig::new(sys08())
        };
        let table = convergence_study(&cfg).unwrap();
        assert!(table.rows[0].err_zeta / table.rows[1].err_zeta >= 10.0);
    }
}
