//! Particle-based ground truth: Brownian molecules released from a point
//! transmitter, folded back at reflecting surfaces and removed on first
//! contact with an absorbing receiver.
//!
//! Each molecule draws its Gaussian increments from its own ChaCha8 stream,
//! selected by `(replication, molecule)` under a key derived from the run
//! seed. Trajectories are therefore independent of how molecules are
//! scheduled across threads, and histograms are merged with integer adds,
//! so results are bit-identical for any degree of parallelism.

use std::marker::PhantomData;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    mirror_point, segment_boundary_hit, segment_sphere_entry, AbsorbingSphere, Reflector,
    SegmentHit, Vec3,
};
use crate::real::Real;

/// Maximum number of reflections resolved within one step.
pub const MAX_FOLDS: u32 = 16;

/// Coarse steps are only taken when the nearest surface is at least this
/// many per-axis standard deviations of the aggregated displacement away.
/// At 10 the chance that the continuous path touches any surface during a
/// coarse step is below 5e-8.
pub const FAR_FIELD_SAFETY: f64 = 10.0;

/// Upper bound on the number of fine steps merged into one coarse step.
const MAX_COARSE_STEPS: u64 = 1 << 16;

const MOLECULES_PER_TASK: usize = 64;

/// Simulation parameters. Times in seconds, lengths in micrometers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub diffusion_um2_per_s: f64,
    pub dt_s: f64,
    pub t_total_s: f64,
    pub n_molecules: u64,
    pub n_reps: u32,
    pub seed: u64,
    pub bin_width_s: f64,
    /// Merge consecutive Gaussian steps while a molecule is far from every
    /// surface (see [`FAR_FIELD_SAFETY`]).
    #[serde(default = "default_true")]
    pub far_field_stepping: bool,
}

fn default_true() -> bool {
    true
}

impl SimConfig {
    pub const DIFFUSION_UM2_PER_S: f64 = 79.4;
    pub const DURATION_S: f64 = 2.0;
    pub const BIN_WIDTH_S: f64 = 1e-3;

    /// N = 1e5, dt = 1e-4 s, 10 replications.
    pub fn desk(seed: u64) -> Self {
        Self {
            diffusion_um2_per_s: Self::DIFFUSION_UM2_PER_S,
            dt_s: 1e-4,
            t_total_s: Self::DURATION_S,
            n_molecules: 100_000,
            n_reps: 10,
            seed,
            bin_width_s: Self::BIN_WIDTH_S,
            far_field_stepping: true,
        }
    }

    /// N = 1e6, dt = 1e-5 s, 100 replications.
    pub fn full_scale(seed: u64) -> Self {
        Self {
            dt_s: 1e-5,
            n_molecules: 1_000_000,
            n_reps: 100,
            ..Self::desk(seed)
        }
    }

    /// Per-axis standard deviation of one step, `sqrt(2 D dt)`.
    pub fn step_sigma(&self) -> f64 {
        (2.0 * self.diffusion_um2_per_s * self.dt_s).sqrt()
    }

    /// Checks the config and derives the integer step/bin layout.
    pub fn schedule(&self) -> Result<Schedule> {
        let bad = |msg: String| Err(Error::ConfigInvalid(msg));
        if !(self.diffusion_um2_per_s >= 0.0 && self.diffusion_um2_per_s.is_finite()) {
            return bad(format!(
                "diffusion coefficient must be >= 0, got {}",
                self.diffusion_um2_per_s
            ));
        }
        if !(self.dt_s > 0.0 && self.dt_s.is_finite()) {
            return bad(format!("dt must be > 0, got {}", self.dt_s));
        }
        if !(self.t_total_s >= self.dt_s && self.t_total_s.is_finite()) {
            return bad(format!(
                "t_total ({}) must be >= dt ({})",
                self.t_total_s, self.dt_s
            ));
        }
        if !(self.bin_width_s >= self.dt_s && self.bin_width_s.is_finite()) {
            return bad(format!(
                "bin width ({}) must be >= dt ({})",
                self.bin_width_s, self.dt_s
            ));
        }
        if self.n_molecules > u64::from(u32::MAX) {
            return bad(format!("at most {} molecules per replication", u32::MAX));
        }
        let n_steps = (self.t_total_s / self.dt_s).round();
        if ((n_steps * self.dt_s - self.t_total_s) / self.t_total_s).abs() > 1e-9 {
            return bad("t_total must be an integer multiple of dt".into());
        }
        let steps_per_bin = (self.bin_width_s / self.dt_s).round();
        if ((steps_per_bin * self.dt_s - self.bin_width_s) / self.bin_width_s).abs() > 1e-9 {
            return bad("bin width must be an integer multiple of dt".into());
        }
        let n_steps = n_steps as u64;
        let steps_per_bin = steps_per_bin as u64;
        Ok(Schedule {
            n_steps,
            steps_per_bin,
            n_bins: n_steps.div_ceil(steps_per_bin) as usize,
        })
    }
}

/// Integer time layout derived from a [`SimConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub n_steps: u64,
    pub steps_per_bin: u64,
    pub n_bins: usize,
}

impl Schedule {
    /// Bin of an absorption recorded at the end of step `step` (1-based).
    #[inline]
    pub fn bin_of_step(&self, step: u64) -> usize {
        ((step - 1) / self.steps_per_bin) as usize
    }
}

/// Transmitter, reflectors and receivers of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment<T> {
    tx: Vec3<T>,
    reflectors: Vec<Reflector<T>>,
    receivers: Vec<AbsorbingSphere<T>>,
}

impl<T: Real> Environment<T> {
    pub fn new(
        tx: Vec3<T>,
        reflectors: Vec<Reflector<T>>,
        receivers: Vec<AbsorbingSphere<T>>,
    ) -> Result<Self> {
        if !tx.is_finite() {
            return Err(Error::InvalidParameter(
                "transmitter position must be finite".into(),
            ));
        }
        for (i, rx) in receivers.iter().enumerate() {
            if rx.contains(tx) {
                return Err(Error::InvalidParameter(format!(
                    "transmitter lies inside receiver {i}"
                )));
            }
        }
        for (j, r) in reflectors.iter().enumerate() {
            if let Reflector::Plane(p) = r {
                if p.signed_distance(tx) < T::zero() {
                    return Err(Error::InvalidParameter(format!(
                        "transmitter lies on the invalid side of plane {j}"
                    )));
                }
            }
        }
        Ok(Self {
            tx,
            reflectors,
            receivers,
        })
    }

    pub fn tx(&self) -> Vec3<T> {
        self.tx
    }

    pub fn reflectors(&self) -> &[Reflector<T>] {
        &self.reflectors
    }

    pub fn receivers(&self) -> &[AbsorbingSphere<T>] {
        &self.receivers
    }

    /// Radius of a ball around `p` that reaches no receiver and no
    /// rectangle edge.
    ///
    /// Inside such a ball every reflector acts as an infinite plane, so
    /// folding a long step gives the reflected transition density exactly,
    /// and a folded point is never farther from `p` than its unfolded one.
    pub fn clearance(&self, p: Vec3<T>) -> T {
        let rx = self
            .receivers
            .iter()
            .map(|r| r.surface_distance(p))
            .fold(T::infinity(), T::min);
        self.reflectors
            .iter()
            .filter_map(|r| match r {
                Reflector::Plane(_) => None,
                Reflector::Rect(rect) => Some(rect.rim_distance(p)),
            })
            .fold(rx, T::min)
    }
}

/// Supplies independent standard normal triples.
pub trait NoiseSource<T> {
    fn standard_normal3(&mut self) -> Vec3<T>;
}

/// ChaCha8-backed Gaussian noise for one molecule.
#[derive(Debug, Clone)]
pub struct GaussianNoise<T> {
    rng: ChaCha8Rng,
    _scalar: PhantomData<T>,
}

impl<T: Real> GaussianNoise<T>
where
    StandardNormal: Distribution<T>,
{
    /// Stream keyed by `(seed, replication, molecule)`.
    pub fn for_molecule(seed: u64, replication: u32, molecule: u32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id(replication, molecule));
        Self {
            rng,
            _scalar: PhantomData,
        }
    }

    fn from_keyed(base: &ChaCha8Rng, replication: u32, molecule: u32) -> Self {
        let mut rng = base.clone();
        rng.set_stream(stream_id(replication, molecule));
        Self {
            rng,
            _scalar: PhantomData,
        }
    }
}

#[inline]
fn stream_id(replication: u32, molecule: u32) -> u64 {
    (u64::from(replication) << 32) | u64::from(molecule)
}

impl<T: Real> NoiseSource<T> for GaussianNoise<T>
where
    StandardNormal: Distribution<T>,
{
    #[inline]
    fn standard_normal3(&mut self) -> Vec3<T> {
        let x = self.rng.sample(StandardNormal);
        let y = self.rng.sample(StandardNormal);
        let z = self.rng.sample(StandardNormal);
        Vec3::new(x, y, z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Negates one component of another source's output.
#[derive(Debug, Clone)]
pub struct FlipAxis<N> {
    pub inner: N,
    pub axis: Axis,
}

impl<T: Real, N: NoiseSource<T>> NoiseSource<T> for FlipAxis<N> {
    fn standard_normal3(&mut self) -> Vec3<T> {
        let mut v = self.inner.standard_normal3();
        match self.axis {
            Axis::X => v.x = -v.x,
            Axis::Y => v.y = -v.y,
            Axis::Z => v.z = -v.z,
        }
        v
    }
}

/// Candidate position after one unconstrained Wiener increment with
/// per-axis standard deviation `sigma = sqrt(2 D dt)`.
#[inline]
pub fn brownian_step<T: Real, N: NoiseSource<T>>(pos: Vec3<T>, sigma: T, noise: &mut N) -> Vec3<T> {
    pos + noise.standard_normal3() * sigma
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome<T> {
    Absorbed(usize),
    Moved(Vec3<T>),
}

/// Counters accumulated while resolving steps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub reflections: u64,
    pub fold_limit_hits: u64,
}

impl StepDiagnostics {
    fn merge(&mut self, other: &Self) {
        self.reflections += other.reflections;
        self.fold_limit_hits += other.fold_limit_hits;
    }
}

/// Resolves the segment `prev → candidate` against the environment in
/// event order.
///
/// The earliest event along the segment wins: entering a receiver absorbs
/// the molecule, crossing a reflector folds the rest of the segment back
/// across it and resolution continues from the crossing point. After
/// [`MAX_FOLDS`] folds the molecule stays at the last crossing point.
#[inline]
pub fn resolve_step<T: Real>(
    prev: Vec3<T>,
    candidate: Vec3<T>,
    env: &Environment<T>,
    diag: &mut StepDiagnostics,
) -> StepOutcome<T> {
    resolve_step_inner(prev, candidate, env, diag, |_| {})
}

/// [`resolve_step`] that also returns the crossing points, in order.
pub fn resolve_step_traced<T: Real>(
    prev: Vec3<T>,
    candidate: Vec3<T>,
    env: &Environment<T>,
    diag: &mut StepDiagnostics,
) -> (StepOutcome<T>, Vec<Vec3<T>>) {
    let mut folds = Vec::new();
    let out = resolve_step_inner(prev, candidate, env, diag, |p| folds.push(p));
    (out, folds)
}

#[inline]
fn resolve_step_inner<T: Real>(
    prev: Vec3<T>,
    candidate: Vec3<T>,
    env: &Environment<T>,
    diag: &mut StepDiagnostics,
    mut on_fold: impl FnMut(Vec3<T>),
) -> StepOutcome<T> {
    let mut a = prev;
    let mut b = candidate;
    // A segment that starts on a flat surface cannot cross it again.
    let mut skip: Option<usize> = None;
    let mut folds = 0;
    loop {
        let mut entry: Option<(T, usize)> = None;
        for (i, rx) in env.receivers.iter().enumerate() {
            if let Some(hit) = segment_sphere_entry(a, b, rx) {
                if entry.is_none_or(|(s, _)| hit.s < s) {
                    entry = Some((hit.s, i));
                }
            }
        }
        let mut wall: Option<(SegmentHit<T>, usize)> = None;
        for (j, reflector) in env.reflectors.iter().enumerate() {
            if skip == Some(j) {
                continue;
            }
            if let Some(hit) = segment_boundary_hit(a, b, reflector) {
                if wall.is_none_or(|(w, _)| hit.s < w.s) {
                    wall = Some((hit, j));
                }
            }
        }
        match (entry, wall) {
            (Some((s, i)), w) if w.is_none_or(|(w, _)| s <= w.s) => {
                return StepOutcome::Absorbed(i)
            }
            (_, Some((hit, j))) => {
                if folds == MAX_FOLDS {
                    diag.fold_limit_hits += 1;
                    return StepOutcome::Moved(hit.point);
                }
                folds += 1;
                diag.reflections += 1;
                on_fold(hit.point);
                b = mirror_point(b, &env.reflectors[j].supporting_plane());
                a = hit.point;
                skip = Some(j);
            }
            (Some((_, i)), None) => return StepOutcome::Absorbed(i),
            (None, None) => return StepOutcome::Moved(b),
        }
    }
}

/// How a single molecule's walk ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fate {
    /// Absorbed by `receiver` at the end of step `step` (1-based).
    Absorbed {
        receiver: usize,
        step: u64,
    },
    Survived,
}

/// Walks molecules through an environment.
#[derive(Debug, Clone)]
pub struct Walker<'a, T> {
    env: &'a Environment<T>,
    sigma: T,
    n_steps: u64,
    far_field: bool,
    safety: T,
}

impl<'a, T: Real> Walker<'a, T> {
    pub fn new(env: &'a Environment<T>, cfg: &SimConfig) -> Result<Self> {
        let schedule = cfg.schedule()?;
        Ok(Self {
            env,
            sigma: T::lit(cfg.step_sigma()),
            n_steps: schedule.n_steps,
            far_field: cfg.far_field_stepping,
            safety: T::lit(FAR_FIELD_SAFETY),
        })
    }

    /// Runs one molecule from the transmitter; `observer` sees the step
    /// count and position at the start of every (fine or coarse) step.
    #[inline]
    pub fn run<N: NoiseSource<T>>(
        &self,
        noise: &mut N,
        diag: &mut StepDiagnostics,
        mut observer: impl FnMut(u64, Vec3<T>),
    ) -> Fate {
        let mut pos = self.env.tx;
        let mut done = 0u64;
        while done < self.n_steps {
            observer(done, pos);
            let mut merged = 1;
            if self.far_field && self.sigma > T::zero() {
                let remaining = self.n_steps - done;
                let ratio = self.env.clearance(pos) / (self.safety * self.sigma);
                let fit = (ratio * ratio).to_u64().unwrap_or(0);
                merged = fit.clamp(1, MAX_COARSE_STEPS).min(remaining);
            }
            let sigma = if merged == 1 {
                self.sigma
            } else {
                self.sigma * T::lit(merged as f64).sqrt()
            };
            let candidate = brownian_step(pos, sigma, noise);
            done += merged;
            match resolve_step(pos, candidate, self.env, diag) {
                StepOutcome::Absorbed(receiver) => {
                    return Fate::Absorbed {
                        receiver,
                        step: done,
                    }
                }
                StepOutcome::Moved(p) => pos = p,
            }
        }
        Fate::Survived
    }
}

/// Binned first-hit counts per receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitHistogram {
    pub bin_width_s: f64,
    /// `counts[receiver][bin]`; bin `b` covers `(b w, (b + 1) w]`.
    pub counts: Vec<Vec<u64>>,
    pub n_emitted: u64,
    pub n_absorbed: Vec<u64>,
    pub n_survived: u64,
    pub diagnostics: StepDiagnostics,
}

impl HitHistogram {
    pub fn empty(n_receivers: usize, n_bins: usize, bin_width_s: f64) -> Self {
        Self {
            bin_width_s,
            counts: vec![vec![0; n_bins]; n_receivers],
            n_emitted: 0,
            n_absorbed: vec![0; n_receivers],
            n_survived: 0,
            diagnostics: StepDiagnostics::default(),
        }
    }

    pub fn n_bins(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }

    pub fn n_receivers(&self) -> usize {
        self.counts.len()
    }

    /// End time of each bin.
    pub fn bin_end_times(&self) -> Vec<f64> {
        (1..=self.n_bins())
            .map(|b| b as f64 * self.bin_width_s)
            .collect()
    }

    /// Adds another histogram with the same layout.
    pub fn merge(&mut self, other: &HitHistogram) {
        assert_eq!(
            self.counts.len(),
            other.counts.len(),
            "receiver count mismatch"
        );
        for (mine, theirs) in self.counts.iter_mut().zip(&other.counts) {
            assert_eq!(mine.len(), theirs.len(), "bin count mismatch");
            for (a, b) in mine.iter_mut().zip(theirs) {
                *a += b;
            }
        }
        for (a, b) in self.n_absorbed.iter_mut().zip(&other.n_absorbed) {
            *a += b;
        }
        self.n_emitted += other.n_emitted;
        self.n_survived += other.n_survived;
        self.diagnostics.merge(&other.diagnostics);
    }

    fn record(&mut self, fate: Fate, schedule: &Schedule) {
        self.n_emitted += 1;
        match fate {
            Fate::Absorbed { receiver, step } => {
                self.counts[receiver][schedule.bin_of_step(step)] += 1;
                self.n_absorbed[receiver] += 1;
            }
            Fate::Survived => self.n_survived += 1,
        }
    }

    fn check_receiver(&self, receiver: usize) -> Result<()> {
        if receiver < self.counts.len() {
            Ok(())
        } else {
            Err(Error::ReceiverUnknown {
                index: receiver,
                count: self.counts.len(),
            })
        }
    }

    /// Fraction of emitted molecules absorbed by `receiver` in bins ending
    /// at or before `t`.
    pub fn cumulative_fraction(&self, receiver: usize, t: f64) -> Result<f64> {
        self.check_receiver(receiver)?;
        if self.n_emitted == 0 {
            return Ok(0.0);
        }
        let full_bins = ((t / self.bin_width_s) * (1.0 + 1e-12)).floor().max(0.0) as usize;
        let hits: u64 = self.counts[receiver].iter().take(full_bins).sum();
        Ok(hits as f64 / self.n_emitted as f64)
    }

    /// Cumulative absorbed fraction at every bin end.
    pub fn cumulative_curve(&self, receiver: usize) -> Result<Vec<f64>> {
        self.check_receiver(receiver)?;
        let n = self.n_emitted.max(1) as f64;
        let mut acc = 0u64;
        Ok(self.counts[receiver]
            .iter()
            .map(|&c| {
                acc += c;
                acc as f64 / n
            })
            .collect())
    }

    /// Fraction absorbed by any receiver at every bin end.
    pub fn combined_cumulative_curve(&self) -> Vec<f64> {
        let n = self.n_emitted.max(1) as f64;
        let mut acc = 0u64;
        (0..self.n_bins())
            .map(|b| {
                acc += self.counts.iter().map(|c| c[b]).sum::<u64>();
                acc as f64 / n
            })
            .collect()
    }
}

pub fn cumulative_fraction(h: &HitHistogram, receiver: usize, t: f64) -> Result<f64> {
    h.cumulative_fraction(receiver, t)
}

/// Runs one replication of `cfg.n_molecules` molecules.
pub fn simulate_replication<T: Real>(
    env: &Environment<T>,
    cfg: &SimConfig,
    replication: u32,
) -> Result<HitHistogram>
where
    StandardNormal: Distribution<T>,
{
    let schedule = cfg.schedule()?;
    let walker = Walker::new(env, cfg)?;
    let base = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_rx = env.receivers.len();
    let empty = || HitHistogram::empty(n_rx, schedule.n_bins, cfg.bin_width_s);
    let molecules = cfg.n_molecules as u32;
    let hist = (0..molecules)
        .into_par_iter()
        .with_min_len(MOLECULES_PER_TASK)
        .fold(empty, |mut hist, m| {
            let mut noise = GaussianNoise::<T>::from_keyed(&base, replication, m);
            let fate = walker.run(&mut noise, &mut hist.diagnostics, |_, _| {});
            hist.record(fate, &schedule);
            hist
        })
        .reduce(empty, |mut a, b| {
            a.merge(&b);
            a
        });
    Ok(hist)
}

/// One histogram per replication.
pub fn simulate_replications<T: Real>(
    env: &Environment<T>,
    cfg: &SimConfig,
) -> Result<Vec<HitHistogram>>
where
    StandardNormal: Distribution<T>,
{
    (0..cfg.n_reps)
        .map(|rep| simulate_replication(env, cfg, rep))
        .collect()
}

/// All replications merged into one histogram.
pub fn simulate<T: Real>(env: &Environment<T>, cfg: &SimConfig) -> Result<HitHistogram>
where
    StandardNormal: Distribution<T>,
{
    let schedule = cfg.schedule()?;
    let mut total = HitHistogram::empty(env.receivers.len(), schedule.n_bins, cfg.bin_width_s);
    for rep in 0..cfg.n_reps {
        total.merge(&simulate_replication(env, cfg, rep)?);
    }
    Ok(total)
}
