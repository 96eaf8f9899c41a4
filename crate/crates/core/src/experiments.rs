//! Reference topologies and the analytic-vs-simulation comparison harness.
//!
//! Built-in topologies live in `data/topologies.json` and use the same
//! schema as user topology files, so both go through one parser.

use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::analytic::{ChannelModel, Diffusion, HalfSpaceParams, SisoParams, TwoPlaneParams};
use crate::error::{Error, Result};
use crate::geometry::{AbsorbingSphere, Plane, Rect, Reflector, Vec3};
use crate::montecarlo::{simulate_replications, Environment, SimConfig, StepDiagnostics};

const BUILTIN_TOPOLOGIES: &str = include_str!("../data/topologies.json");

/// Image count used for the two-plane model when none is given.
pub const DEFAULT_K_PRIME: usize = 11;

/// Placement tolerance when checking a reflector against its rule.
const PLACEMENT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyId {
    T0,
    T1,
    T2,
    T3,
    T4,
    T2Finite,
    TwoPlane,
    Custom,
}

impl TopologyId {
    pub const BUILTIN: [TopologyId; 7] = [
        TopologyId::T0,
        TopologyId::T1,
        TopologyId::T2,
        TopologyId::T3,
        TopologyId::T4,
        TopologyId::T2Finite,
        TopologyId::TwoPlane,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TopologyId::T0 => "t0",
            TopologyId::T1 => "t1",
            TopologyId::T2 => "t2",
            TopologyId::T3 => "t3",
            TopologyId::T4 => "t4",
            TopologyId::T2Finite => "t2_finite",
            TopologyId::TwoPlane => "two_plane",
            TopologyId::Custom => "custom",
        }
    }
}

impl std::fmt::Display for TopologyId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TopologyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        Ok(match norm.as_str() {
            "t0" => TopologyId::T0,
            "t1" => TopologyId::T1,
            "t2" => TopologyId::T2,
            "t3" => TopologyId::T3,
            "t4" => TopologyId::T4,
            "t2_finite" | "t2finite" => TopologyId::T2Finite,
            "two_plane" | "twoplane" => TopologyId::TwoPlane,
            "custom" => TopologyId::Custom,
            _ => {
                let known: Vec<&str> = TopologyId::BUILTIN.iter().map(|t| t.as_str()).collect();
                return Err(Error::SpecInvalid(format!(
                    "unknown topology '{s}', available: {}",
                    known.join(", ")
                )));
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ReflectorSpec {
    Plane {
        point_um: [f64; 3],
        normal: [f64; 3],
    },
    Rect {
        center_um: [f64; 3],
        normal: [f64; 3],
        u_axis: [f64; 3],
        half_u_um: f64,
        half_v_um: f64,
    },
}

impl ReflectorSpec {
    pub fn plane_x(x: f64, facing: f64) -> Self {
        ReflectorSpec::Plane {
            point_um: [x, 0.0, 0.0],
            normal: [facing.signum(), 0.0, 0.0],
        }
    }

    pub fn build(&self) -> Result<Reflector<f64>> {
        Ok(match self {
            ReflectorSpec::Plane { point_um, normal } => Reflector::Plane(Plane::new(
                Vec3::from_f64(*point_um),
                Vec3::from_f64(*normal),
            )?),
            ReflectorSpec::Rect {
                center_um,
                normal,
                u_axis,
                half_u_um,
                half_v_um,
            } => Reflector::Rect(Rect::new(
                Vec3::from_f64(*center_um),
                Vec3::from_f64(*normal),
                Vec3::from_f64(*u_axis),
                *half_u_um,
                *half_v_um,
            )?),
        })
    }
}

/// One scenario: transmitter, receiver and reflecting surfaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologySpec {
    pub id: TopologyId,
    pub tx_um: [f64; 3],
    pub rx_center_um: [f64; 3],
    pub r_r_um: f64,
    /// Gap between the receiver surface and the (nearest) reflector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_um: Option<f64>,
    /// Number of image receivers for the two-plane model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_prime: Option<usize>,
    #[serde(default)]
    pub reflectors: Vec<ReflectorSpec>,
}

impl TopologySpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::SpecInvalid(format!("line {}, column {}: {e}", e.line(), e.column()))
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("topology spec serializes")
    }

    /// Short label such as `t2_d1` or `two_plane_k3`.
    pub fn label(&self) -> String {
        match self.id {
            TopologyId::T0 | TopologyId::T1 => format!("{}_rr{}", self.id, self.r_r_um),
            TopologyId::T2 | TopologyId::T3 => {
                format!("{}_d{}", self.id, self.d_um.unwrap_or(f64::NAN))
            }
            TopologyId::TwoPlane => {
                format!("{}_k{}", self.id, self.k_prime.unwrap_or(DEFAULT_K_PRIME))
            }
            _ => self.id.to_string(),
        }
    }

    /// Same scenario with the reflectors removed.
    pub fn without_reflectors(&self) -> Self {
        Self {
            id: TopologyId::Custom,
            d_um: None,
            k_prime: None,
            reflectors: Vec::new(),
            ..self.clone()
        }
    }

    /// Moves the reflecting plane(s) so the receiver surface is `d` away.
    pub fn with_gap(&self, d: f64) -> Result<Self> {
        let mut out = self.clone();
        let c = self.rx_center_um[0];
        match self.id {
            TopologyId::T2 | TopologyId::T3 => {
                out.reflectors = vec![ReflectorSpec::plane_x(c - self.r_r_um - d, 1.0)];
            }
            TopologyId::TwoPlane => {
                let h = d + self.r_r_um;
                out.reflectors = vec![
                    ReflectorSpec::plane_x(c - h, 1.0),
                    ReflectorSpec::plane_x(c + h, -1.0),
                ];
            }
            other => {
                return Err(Error::SpecInvalid(format!(
                    "topology {other} has no adjustable gap"
                )));
            }
        }
        out.d_um = Some(d);
        Ok(out)
    }

    /// Changes the receiver radius, keeping the reflectors in place.
    pub fn with_radius(&self, r_r: f64) -> Result<Self> {
        let mut out = self.clone();
        out.r_r_um = r_r;
        match self.id {
            TopologyId::T0 | TopologyId::T1 => out.d_um = Some(self.rx_center_um[0] - r_r),
            TopologyId::Custom => {}
            other => {
                return Err(Error::SpecInvalid(format!(
                    "topology {other} has a fixed receiver radius"
                )));
            }
        }
        Ok(out)
    }

    pub fn with_k_prime(&self, k: usize) -> Result<Self> {
        if self.reflectors.len() != 2 {
            return Err(Error::SpecInvalid(
                "k_prime only applies to two-plane topologies".into(),
            ));
        }
        let mut out = self.clone();
        out.k_prime = Some(k);
        Ok(out)
    }

    fn check_placement(&self, reflectors: &[Reflector<f64>]) -> Result<()> {
        let Some(d) = self.d_um else { return Ok(()) };
        let c = Vec3::from_f64(self.rx_center_um);
        let wanted = d + self.r_r_um;
        for r in reflectors {
            let gap = r.supporting_plane().signed_distance(c).abs();
            if (gap - wanted).abs() > PLACEMENT_TOLERANCE * wanted.max(1.0) {
                return Err(Error::SpecInvalid(format!(
                    "reflector is {gap} um from the receiver center, expected d + r_r = {wanted}"
                )));
            }
        }
        Ok(())
    }
}

fn registry() -> &'static [TopologySpec] {
    static REGISTRY: OnceLock<Vec<TopologySpec>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        serde_json::from_str(BUILTIN_TOPOLOGIES).expect("embedded topologies parse")
    })
}

/// Every built-in topology variant.
pub fn builtin_topologies() -> &'static [TopologySpec] {
    registry()
}

/// Looks up a built-in topology. Unset selectors pick the default variant
/// (`r_r = 5` for T0/T1, `d = 1` for T2/T3, `K' = 11` for two planes);
/// values outside the built-in variants are derived from it.
pub fn lookup_topology(
    id: TopologyId,
    r_r: Option<f64>,
    d: Option<f64>,
    k_prime: Option<usize>,
) -> Result<TopologySpec> {
    let candidates: Vec<&TopologySpec> = registry().iter().filter(|s| s.id == id).collect();
    let base = match id {
        TopologyId::T0 | TopologyId::T1 => candidates.iter().find(|s| s.r_r_um == 5.0),
        TopologyId::T2 | TopologyId::T3 => candidates.iter().find(|s| s.d_um == Some(1.0)),
        TopologyId::TwoPlane => candidates
            .iter()
            .find(|s| s.k_prime == Some(DEFAULT_K_PRIME)),
        _ => candidates.first(),
    }
    .copied()
    .ok_or_else(|| Error::SpecInvalid(format!("no built-in topology '{id}'")))?;

    let mut spec = base.clone();
    if let Some(r) = r_r {
        if r != spec.r_r_um {
            spec = candidates
                .iter()
                .find(|s| s.r_r_um == r)
                .map(|s| (*s).clone())
                .map_or_else(|| spec.with_radius(r), Ok)?;
        }
    }
    if let Some(d) = d {
        if spec.d_um != Some(d) {
            spec = candidates
                .iter()
                .find(|s| s.d_um == Some(d) && s.r_r_um == spec.r_r_um)
                .map(|s| (*s).clone())
                .map_or_else(|| spec.with_gap(d), Ok)?;
        }
    }
    if let Some(k) = k_prime {
        spec = spec.with_k_prime(k)?;
    }
    Ok(spec)
}

/// Builds the simulation environment and the matching closed-form model.
///
/// No reflector gives the free-space model, one plane or rectangle the
/// half-space model (a rectangle is replaced by its supporting plane) and
/// two parallel planes the truncated image-lattice model.
pub fn build_topology(
    spec: &TopologySpec,
    diffusion: Diffusion<f64>,
) -> Result<(Environment<f64>, ChannelModel<f64>)> {
    let invalid = |e: Error| Error::SpecInvalid(e.to_string());
    let tx = Vec3::from_f64(spec.tx_um);
    let rx =
        AbsorbingSphere::new(Vec3::from_f64(spec.rx_center_um), spec.r_r_um).map_err(invalid)?;
    let reflectors = spec
        .reflectors
        .iter()
        .map(ReflectorSpec::build)
        .collect::<Result<Vec<_>>>()
        .map_err(invalid)?;
    if let Some(d) = spec.d_um {
        if !(d >= 0.0) {
            return Err(Error::SpecInvalid(format!("d must be >= 0, got {d}")));
        }
    }
    spec.check_placement(&reflectors)?;

    let model = match reflectors.as_slice() {
        [] => ChannelModel::Siso(
            SisoParams::new(tx.distance(rx.center()), rx.radius(), diffusion).map_err(invalid)?,
        ),
        [single] => {
            let mut plane = single.supporting_plane();
            if plane.signed_distance(tx) < 0.0 {
                plane = plane.flipped();
            }
            ChannelModel::HalfSpace(
                HalfSpaceParams::new(tx, rx, plane, diffusion).map_err(invalid)?,
            )
        }
        [Reflector::Plane(p1), Reflector::Plane(p2)] => ChannelModel::TwoPlane(
            TwoPlaneParams::new(
                tx,
                rx,
                *p1,
                *p2,
                spec.k_prime.unwrap_or(DEFAULT_K_PRIME),
                diffusion,
            )
            .map_err(invalid)?,
        ),
        _ => {
            return Err(Error::SpecInvalid(
                "supported reflector sets: none, one plane or rect, or two planes".into(),
            ))
        }
    };
    let env = Environment::new(tx, reflectors, vec![rx]).map_err(invalid)?;
    Ok((env, model))
}

/// Root-mean-square difference of two equally long series.
pub fn rmse(analytic: &[f64], simulated: &[f64]) -> Result<f64> {
    if analytic.len() != simulated.len() {
        return Err(Error::LengthMismatch {
            left: analytic.len(),
            right: simulated.len(),
        });
    }
    if analytic.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = analytic
        .iter()
        .zip(simulated)
        .map(|(a, s)| (a - s) * (a - s))
        .sum();
    Ok((sum / analytic.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Desk,
    Full,
}

impl Scale {
    pub fn config(self, seed: u64) -> SimConfig {
        match self {
            Scale::Desk => SimConfig::desk(seed),
            Scale::Full => SimConfig::full_scale(seed),
        }
    }
}

/// Analytic CDF against the replication-averaged simulated cumulative
/// fraction on the histogram's bin-end grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub topology: TopologySpec,
    pub model: String,
    pub config: SimConfig,
    pub grid_s: Vec<f64>,
    pub analytic_cdf: Vec<f64>,
    pub simulated_cdf_mean: Vec<f64>,
    pub simulated_cdf_stderr: Vec<f64>,
    pub rmse: f64,
    pub diagnostics: StepDiagnostics,
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub const CSV_HEADER: &'static str =
        "t_seconds,analytic_cdf,simulated_cdf_mean,simulated_cdf_stderr";

    pub fn curves_csv(&self) -> String {
        let mut out = String::with_capacity(64 * self.grid_s.len());
        out.push_str(Self::CSV_HEADER);
        out.push('\n');
        for i in 0..self.grid_s.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                self.grid_s[i],
                self.analytic_cdf[i],
                self.simulated_cdf_mean[i],
                self.simulated_cdf_stderr[i]
            );
        }
        out
    }

    pub fn final_simulated(&self) -> f64 {
        self.simulated_cdf_mean.last().copied().unwrap_or(0.0)
    }
}

/// Simulates `spec`, evaluates its closed-form CDF and compares the two.
pub fn run_experiment(spec: &TopologySpec, cfg: &SimConfig) -> Result<ComparisonReport> {
    let diffusion = Diffusion::new(cfg.diffusion_um2_per_s)?;
    let (env, model) = build_topology(spec, diffusion)?;
    let reps = simulate_replications(&env, cfg)?;

    let schedule = cfg.schedule()?;
    let n_bins = schedule.n_bins;
    let grid_s: Vec<f64> = (1..=n_bins).map(|b| b as f64 * cfg.bin_width_s).collect();
    let curves: Vec<Vec<f64>> = reps
        .iter()
        .map(|h| h.cumulative_curve(0))
        .collect::<Result<_>>()?;
    let n = curves.len() as f64;
    let mut mean = vec![0.0; n_bins];
    let mut stderr = vec![0.0; n_bins];
    if !curves.is_empty() {
        for b in 0..n_bins {
            let m = curves.iter().map(|c| c[b]).sum::<f64>() / n;
            mean[b] = m;
            if curves.len() > 1 {
                let var = curves.iter().map(|c| (c[b] - m) * (c[b] - m)).sum::<f64>() / (n - 1.0);
                stderr[b] = (var / n).sqrt();
            }
        }
    }
    let analytic_cdf: Vec<f64> = grid_s.iter().map(|&t| model.cdf(t)).collect();
    let rmse = rmse(&analytic_cdf, &mean)?;
    let mut diagnostics = StepDiagnostics::default();
    for h in &reps {
        diagnostics.reflections += h.diagnostics.reflections;
        diagnostics.fold_limit_hits += h.diagnostics.fold_limit_hits;
    }
    Ok(ComparisonReport {
        topology: spec.clone(),
        model: model.name().to_string(),
        config: cfg.clone(),
        grid_s,
        analytic_cdf,
        simulated_cdf_mean: mean,
        simulated_cdf_stderr: stderr,
        rmse,
        diagnostics,
    })
}
