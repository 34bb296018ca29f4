//! Scenario files: TOML tables with every key optional.

use std::f64::consts::PI;
use std::path::PathBuf;

use nanoring::collective::{Orientation, RingSpec};
use nanoring::fields::{Core, Environment, GridSpec, Plane};
use nanoring::green::{GreenConfig, MAX_NU};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
}

fn invalid(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, message: message.into() }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub fiber: FiberConfig,
    pub ring: RingConfig,
    pub second_ring: SecondRingConfig,
    pub wavelength: WavelengthConfig,
    pub numerics: NumericsConfig,
    pub pattern: PatternConfig,
    pub outputs: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiberConfig {
    pub n_fiber: f64,
}

impl Default for FiberConfig {
    fn default() -> Self {
        Self { n_fiber: 1.45 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RingConfig {
    #[serde(rename = "N")]
    pub atoms: usize,
    pub rho_over_a: f64,
    pub orientation: Orientation,
}

impl Default for RingConfig {
    fn default() -> Self {
        Self { atoms: 5, rho_over_a: 1.1, orientation: Orientation::Orthoradial }
    }
}

/// Uniform grid `start..=stop` with `points` values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        (0..self.points)
            .map(|i| self.start + (self.stop - self.start) * i as f64 / (self.points - 1) as f64)
            .collect()
    }

    fn check(&self, key: &'static str) -> Result<(), ConfigError> {
        if self.points == 0 || !self.start.is_finite() || !self.stop.is_finite() || self.stop < self.start {
            return Err(invalid(key, format!("need start ≤ stop and points ≥ 1, got {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SecondRingConfig {
    /// Adds the second ring to `pattern`.
    pub enabled: bool,
    /// Separations for `two-ring-blocks`; the first one places the ring in
    /// `pattern`.
    pub dz_over_a: Vec<f64>,
    /// Separations for `scan-separation`.
    pub dz_grid: Grid,
}

impl Default for SecondRingConfig {
    fn default() -> Self {
        Self { enabled: false, dz_over_a: vec![1.0, 10.0, 20.0], dz_grid: Grid { start: 0.5, stop: 30.0, points: 600 } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WavelengthConfig {
    /// Single wavelength for `scan-separation`, `pattern` and `two-ring-blocks`.
    pub lambda0_over_d: f64,
    /// Grid for `modes` and `scan-wavelength`; defaults to
    /// `π a/5 ≤ λ0 ≤ 2π a` with 150 points.
    pub grid: Option<Grid>,
}

impl Default for WavelengthConfig {
    fn default() -> Self {
        Self { lambda0_over_d: 3.4, grid: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    pub nu_max: u32,
    /// Gauss–Legendre nodes per radiation panel.
    pub nodes: usize,
    pub panels: usize,
    /// Gauss–Legendre nodes per panel of the spectral (β) quadrature.
    pub spectral_nodes: usize,
    pub tolerance: f64,
    pub adaptive: bool,
    pub l_max: u32,
    /// Evaluate the scattered level shifts (slower).
    pub real_part: bool,
    /// Minimum number of periods for the oscillation analysis.
    pub min_periods: f64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        let g = GreenConfig::default();
        Self {
            nu_max: g.nu_max,
            nodes: g.nodes,
            panels: g.panels,
            spectral_nodes: g.spectral_nodes,
            tolerance: g.tolerance,
            adaptive: g.adaptive,
            l_max: g.l_max,
            real_part: g.real_part,
            min_periods: nanoring::tworing::MIN_PERIODS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaneKind {
    Xz,
    Xy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PatternConfig {
    pub n: i32,
    pub plane: PlaneKind,
    /// Plane offset (`y` for xz, `z` for xy) over ρ.
    pub offset_over_rho: f64,
    pub half_width_over_rho: f64,
    pub resolution: usize,
    pub environments: Vec<Environment>,
    pub core: Core,
    /// `+1` or `−1` relative phase of the second ring.
    pub second_ring_sign: f64,
}

impl Default for PatternConfig {
    fn default() -> Self {
        Self {
            n: 1,
            plane: PlaneKind::Xz,
            offset_over_rho: 1.5,
            half_width_over_rho: 10.0,
            resolution: 201,
            environments: vec![Environment::Free, Environment::Fiber],
            core: Core::Mask,
            second_ring_sign: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// File stems to write; all of a command's files when empty.
    pub tables: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: PathBuf::from("out"), tables: Vec::new() }
    }
}

/// Every file stem a command can write.
pub const TABLES: [&str; 7] = ["dispersion", "wavelength", "separation", "oscillations", "pattern", "pattern_free", "blocks"];

impl ScenarioConfig {
    pub fn parse(text: &str, path: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.into(), message: e.to_string() })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: name.clone(), source })?;
        Self::parse(&text, &name)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.fiber.n_fiber > 1.0 && self.fiber.n_fiber.is_finite()) {
            return Err(invalid("fiber.n_fiber", format!("must exceed 1, got {}", self.fiber.n_fiber)));
        }
        self.ring_spec().map_err(|e| invalid("ring", e.to_string()))?;
        if !(self.wavelength.lambda0_over_d > 0.0 && self.wavelength.lambda0_over_d.is_finite()) {
            return Err(invalid("wavelength.lambda0_over_d", "must be positive"));
        }
        if let Some(g) = &self.wavelength.grid {
            g.check("wavelength.grid")?;
            if g.start <= 0.0 {
                return Err(invalid("wavelength.grid", "wavelengths must be positive"));
            }
        }
        self.second_ring.dz_grid.check("second_ring.dz_grid")?;
        if self.second_ring.dz_grid.start <= 0.0 || self.second_ring.dz_over_a.iter().any(|&z| !(z > 0.0)) {
            return Err(invalid("second_ring", "separations must be positive"));
        }
        if self.second_ring.enabled && self.second_ring.dz_over_a.is_empty() {
            return Err(invalid("second_ring.dz_over_a", "needs a separation when the second ring is enabled"));
        }
        let n = &self.numerics;
        if n.nu_max > MAX_NU {
            return Err(invalid("numerics.nu_max", format!("at most {MAX_NU} is supported, got {}", n.nu_max)));
        }
        if n.nodes == 0 || n.panels == 0 || n.spectral_nodes == 0 {
            return Err(invalid("numerics", "node and panel counts must be positive"));
        }
        if !(n.tolerance > 0.0) {
            return Err(invalid("numerics.tolerance", "must be positive"));
        }
        let p = &self.pattern;
        if p.resolution < 2 {
            return Err(invalid("pattern.resolution", "needs at least 2 points per side"));
        }
        if !(p.half_width_over_rho > 0.0) {
            return Err(invalid("pattern.half_width_over_rho", "must be positive"));
        }
        if p.second_ring_sign.abs() != 1.0 {
            return Err(invalid("pattern.second_ring_sign", "must be 1 or -1"));
        }
        let (lo, hi) = nanoring::collective::index_range(self.ring.atoms);
        if p.n < lo || p.n > hi {
            return Err(invalid("pattern.n", format!("REM index must lie in {lo}..={hi}")));
        }
        if p.environments.is_empty() {
            return Err(invalid("pattern.environments", "needs at least one environment"));
        }
        if let Some(t) = self.outputs.tables.iter().find(|t| !TABLES.contains(&t.as_str())) {
            return Err(invalid("outputs.tables", format!("unknown table `{t}`, expected one of {TABLES:?}")));
        }
        Ok(())
    }

    pub fn ring_spec(&self) -> Result<RingSpec, nanoring::collective::CollectiveError> {
        RingSpec::new(self.ring.atoms, self.ring.rho_over_a, 0.0, self.ring.orientation)
    }

    pub fn green_config(&self) -> GreenConfig {
        let n = &self.numerics;
        GreenConfig {
            nu_max: n.nu_max,
            nodes: n.nodes,
            panels: n.panels,
            tolerance: n.tolerance,
            adaptive: n.adaptive,
            l_max: n.l_max,
            real_part: n.real_part,
            spectral_nodes: n.spectral_nodes,
        }
    }

    /// Wavelength grid `λ0/d`.
    pub fn lambda_grid(&self, d: f64) -> Vec<f64> {
        match &self.wavelength.grid {
            Some(g) => g.values(),
            None => Grid { start: PI / 5.0 / d, stop: 2.0 * PI / d, points: 150 }.values(),
        }
    }

    pub fn grid_spec(&self) -> GridSpec {
        let p = &self.pattern;
        let rho = self.ring.rho_over_a;
        let plane = match p.plane {
            PlaneKind::Xz => Plane::Xz { y: p.offset_over_rho * rho },
            PlaneKind::Xy => Plane::Xy { z: p.offset_over_rho * rho },
        };
        GridSpec { core: p.core, ..GridSpec::square(plane, p.half_width_over_rho * rho, p.resolution) }
    }

    pub fn wants(&self, table: &str) -> bool {
        self.outputs.tables.is_empty() || self.outputs.tables.iter().any(|t| t == table)
    }
}
