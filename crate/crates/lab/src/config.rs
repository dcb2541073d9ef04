//! Versioned experiment configuration. Unknown keys are a load error.

use std::path::{Path, PathBuf};

use catenoid_core::evolution::{smooth_bump, TimeProfile};
use catenoid_core::geometry::{japanese, RadialGrid, MIN_POINTS};
use catenoid_core::Sector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CONFIG_VERSION: u32 = 1;

/// Overrides `output_dir` when set; nothing else can be set from the environment.
pub const OUTPUT_DIR_ENV: &str = "CATENOID_LAB_OUTPUT_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub output_dir: PathBuf,
    /// Every randomized choice derives from this seed.
    pub seed: u64,
    pub grid: GridConfig,
    pub evolution: EvolutionConfig,
    pub modulation: ModulationConfig,
    pub shooting: ShootingConfig,
    pub tails: TailsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub rho_max: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundKind {
    Catenoid,
    /// Catenoid potential shifted by O(h²) so that the translation mode is an
    /// exact discrete zero mode.
    KernelExact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    /// dt = dt_safety · h / c_max.
    pub dt_safety: f64,
    pub t_final: f64,
    pub sectors: Vec<Sector>,
    pub alpha: f64,
    pub r_tilde: f64,
    pub probes: Vec<f64>,
    pub record_every: usize,
    pub background: BackgroundKind,
    /// Remove a_± and the six pairings from the data before evolving.
    pub project: bool,
    #[serde(default)]
    pub data: Vec<DataConfig>,
    #[serde(default)]
    pub sources: Vec<SourceConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub sector: Sector,
    pub psi: Profile,
    pub velocity: Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub sector: Sector,
    pub radial: Profile,
    pub time: TimeProfile,
    pub cutoff: Option<f64>,
}

/// Closed-form radial profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Zero,
    Gaussian { amplitude: f64, center: f64, width: f64 },
    Bump { amplitude: f64, start: f64, end: f64 },
    /// amplitude·⟨ρ⟩^{−exponent}.
    Power { amplitude: f64, exponent: f64 },
}

impl Profile {
    pub fn eval(&self, rho: f64) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Gaussian { amplitude, center, width } => amplitude * (-((rho - center) / width).powi(2)).exp(),
            Profile::Bump { amplitude, start, end } => amplitude * smooth_bump(rho, start, end),
            Profile::Power { amplitude, exponent } => amplitude * japanese(rho).powf(-exponent),
        }
    }

    pub fn sample(&self, grid: &RadialGrid) -> Vec<f64> {
        grid.sample(|r| self.eval(r))
    }

    /// Support radius for compact profiles (Gaussians count as compact at 8 widths).
    fn reach(&self) -> Option<f64> {
        match *self {
            Profile::Zero => Some(0.0),
            Profile::Gaussian { center, width, .. } => Some(center.abs() + 8.0 * width),
            Profile::Bump { start, end, .. } => Some(start.abs().max(end.abs())),
            Profile::Power { .. } => None,
        }
    }

    fn validate(&self, field: &str) -> Result<(), ConfigError> {
        let finite = |x: f64, name: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(invalid(&format!("{field}.{name}"), "must be finite"))
            }
        };
        match *self {
            Profile::Zero => Ok(()),
            Profile::Gaussian { amplitude, center, width } => {
                finite(amplitude, "amplitude")?;
                finite(center, "center")?;
                if !(width > 0.0 && width.is_finite()) {
                    return Err(invalid(&format!("{field}.width"), "must be positive"));
                }
                Ok(())
            }
            Profile::Bump { amplitude, start, end } => {
                finite(amplitude, "amplitude")?;
                finite(start, "start")?;
                finite(end, "end")?;
                if !(start < end) {
                    return Err(invalid(&format!("{field}.end"), "must exceed start"));
                }
                Ok(())
            }
            Profile::Power { amplitude, exponent } => {
                finite(amplitude, "amplitude")?;
                if !(exponent >= 0.0 && exponent.is_finite()) {
                    return Err(invalid(&format!("{field}.exponent"), "must be non-negative"));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationConfig {
    pub r_ctf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShootingConfig {
    pub bracket: [f64; 2],
    /// λ₀ = envelope_factor × max |a₊(0)| at the bracket ends.
    pub envelope_factor: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub t_final: f64,
    /// Random data families for `shoot` and the suite.
    pub families: usize,
    pub dt_safety: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailsConfig {
    pub a: f64,
    pub b: f64,
    pub probes: Vec<f64>,
    pub window: [f64; 2],
    pub samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut sectors = vec![Sector::RADIAL];
        sectors.extend(Sector::translations());
        sectors.push(Sector::new(2, 0));
        let data = sectors
            .iter()
            .enumerate()
            .map(|(k, s)| DataConfig {
                sector: *s,
                psi: Profile::Bump {
                    amplitude: 1.0,
                    start: -4.0 + 0.3 * k as f64,
                    end: 3.0,
                },
                velocity: Profile::Bump {
                    amplitude: 0.5,
                    start: -2.0,
                    end: 4.0 - 0.2 * k as f64,
                },
            })
            .collect();
        ExperimentConfig {
            version: CONFIG_VERSION,
            output_dir: PathBuf::from("lab-output"),
            seed: 20_261_016,
            grid: GridConfig {
                rho_max: 120.0,
                n_points: 4801,
            },
            evolution: EvolutionConfig {
                dt_safety: 0.5,
                t_final: 80.0,
                sectors,
                alpha: 0.1,
                r_tilde: 2.0,
                probes: vec![1.0, 5.0],
                record_every: 25,
                background: BackgroundKind::KernelExact,
                project: true,
                data,
                sources: Vec::new(),
            },
            modulation: ModulationConfig { r_ctf: 10.0 },
            shooting: ShootingConfig {
                bracket: [-2.0, 0.5],
                envelope_factor: 1e3,
                tolerance: 1e-28,
                max_iterations: 120,
                t_final: 40.0,
                families: 5,
                dt_safety: 0.5,
            },
            tails: TailsConfig {
                a: 3.0,
                b: 3.0,
                probes: vec![1.0, 5.0],
                window: [50.0, 800.0],
                samples: 16,
            },
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config types serialize to TOML")
    }

    /// Output directory after the environment override.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output_dir.clone(),
        }
    }

    pub fn radial_grid(&self) -> Result<RadialGrid, ConfigError> {
        RadialGrid::new(self.grid.rho_max, self.grid.n_points).map_err(|e| invalid("grid", e.to_string()))
    }

    /// dt for the main evolution, from the characteristic speed bound √2.
    pub fn evolution_dt(&self) -> f64 {
        self.evolution.dt_safety * self.spacing() / std::f64::consts::SQRT_2
    }

    pub fn shooting_dt(&self) -> f64 {
        self.shooting.dt_safety * self.spacing() / std::f64::consts::SQRT_2
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.grid.rho_max / (self.grid.n_points - 1) as f64
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != CONFIG_VERSION {
            return Err(invalid(
                "version",
                format!("unsupported version {}, expected {CONFIG_VERSION}", self.version),
            ));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(invalid("output_dir", "must not be empty"));
        }
        let g = &self.grid;
        if !(g.rho_max.is_finite() && g.rho_max > 0.0) {
            return Err(invalid("grid.rho_max", "must be positive and finite"));
        }
        if g.n_points < MIN_POINTS || g.n_points % 2 == 0 {
            return Err(invalid("grid.n_points", format!("must be odd and at least {MIN_POINTS}")));
        }
        let e = &self.evolution;
        if !(e.dt_safety > 0.0 && e.dt_safety <= 1.0) {
            return Err(invalid("evolution.dt_safety", "must lie in (0, 1]"));
        }
        if !(e.t_final > 0.0 && e.t_final.is_finite()) {
            return Err(invalid("evolution.t_final", "must be positive"));
        }
        if e.sectors.is_empty() {
            return Err(invalid("evolution.sectors", "must not be empty"));
        }
        for (k, s) in e.sectors.iter().enumerate() {
            if !s.is_valid() {
                return Err(invalid(&format!("evolution.sectors[{k}]"), "m must not exceed 2ℓ"));
            }
            if e.sectors[..k].contains(s) {
                return Err(invalid(&format!("evolution.sectors[{k}]"), "duplicate sector"));
            }
        }
        if !(e.alpha > 0.0 && e.alpha < 1.0) {
            return Err(invalid("evolution.alpha", "must lie in (0, 1)"));
        }
        if !(e.r_tilde >= 0.0 && e.r_tilde < g.rho_max) {
            return Err(invalid("evolution.r_tilde", "must lie in [0, rho_max)"));
        }
        if let Some(p) = e.probes.iter().find(|p| !(p.abs() <= g.rho_max)) {
            return Err(invalid("evolution.probes", format!("probe {p} lies outside the grid")));
        }
        if e.record_every == 0 {
            return Err(invalid("evolution.record_every", "must be at least 1"));
        }
        let mut reach: f64 = 0.0;
        for (k, d) in e.data.iter().enumerate() {
            let field = format!("evolution.data[{k}]");
            if !e.sectors.contains(&d.sector) {
                return Err(invalid(&format!("{field}.sector"), "not among evolution.sectors"));
            }
            d.psi.validate(&format!("{field}.psi"))?;
            d.velocity.validate(&format!("{field}.velocity"))?;
            reach = reach.max(d.psi.reach().unwrap_or(g.rho_max)).max(d.velocity.reach().unwrap_or(g.rho_max));
        }
        for (k, s) in e.sources.iter().enumerate() {
            let field = format!("evolution.sources[{k}]");
            if !e.sectors.contains(&s.sector) {
                return Err(invalid(&format!("{field}.sector"), "not among evolution.sectors"));
            }
            s.radial.validate(&format!("{field}.radial"))?;
            if let Some(c) = s.cutoff {
                if !(c >= 0.0) {
                    return Err(invalid(&format!("{field}.cutoff"), "must be non-negative"));
                }
            }
        }
        let needed = std::f64::consts::SQRT_2 * e.t_final + reach;
        if e.sources.is_empty() && needed > g.rho_max {
            return Err(invalid(
                "grid.rho_max",
                format!("boundary is not causally silent: need at least {needed:.3} for t_final and the data support"),
            ));
        }
        let m = &self.modulation;
        if !(m.r_ctf >= 4.0 && 2.0 * m.r_ctf <= g.rho_max) {
            return Err(invalid("modulation.r_ctf", "must lie in [4, rho_max/2]"));
        }
        if e.project && !e.data.iter().all(|d| d.psi.reach().is_some() && d.velocity.reach().is_some()) {
            return Err(invalid("evolution.project", "projection needs compactly supported data"));
        }
        let s = &self.shooting;
        if !(s.bracket[0] < s.bracket[1]) || !s.bracket.iter().all(|b| b.is_finite()) {
            return Err(invalid("shooting.bracket", "must be finite and increasing"));
        }
        if !(s.envelope_factor > 1.0 && s.envelope_factor.is_finite()) {
            return Err(invalid("shooting.envelope_factor", "must exceed 1"));
        }
        if !(s.tolerance > 0.0 && s.tolerance < 1.0) {
            return Err(invalid("shooting.tolerance", "must lie in (0, 1)"));
        }
        if s.max_iterations == 0 {
            return Err(invalid("shooting.max_iterations", "must be at least 1"));
        }
        if !(s.t_final > 0.0 && s.t_final.is_finite()) {
            return Err(invalid("shooting.t_final", "must be positive"));
        }
        if !(s.dt_safety > 0.0 && s.dt_safety <= 1.0) {
            return Err(invalid("shooting.dt_safety", "must lie in (0, 1]"));
        }
        let t = &self.tails;
        if !(t.a >= 3.0 && t.a.is_finite()) {
            return Err(invalid("tails.a", "must be at least 3"));
        }
        if !(t.b > 1.0 && t.b.is_finite()) {
            return Err(invalid("tails.b", "must exceed 1"));
        }
        if t.probes.is_empty() || t.probes.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(invalid("tails.probes", "must be a non-empty list of non-negative radii"));
        }
        if !(t.window[0] > 0.0 && t.window[1] >= 4.0 * t.window[0] && t.window[1].is_finite()) {
            return Err(invalid("tails.window", "must be positive and span a factor of at least 4"));
        }
        if t.samples < 8 {
            return Err(invalid("tails.samples", "must be at least 8"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn round_trip() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_field_rejected() {
        let text = ExperimentConfig::default().to_toml() + "\nsurprise = 1\n";
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn bad_alpha_names_the_field() {
        let mut cfg = ExperimentConfig::default();
        cfg.evolution.alpha = 0.0;
        match cfg.validate() {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "evolution.alpha"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
