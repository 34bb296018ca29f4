//! The subcommands, each producing its files in memory.

use std::f64::consts::PI;
use std::sync::Arc;

use nanoring::collective::{self, rem_state, CollectiveError, KernelSet, RingSpec};
use nanoring::fiber_modes::{dispersion_table, DispersionCache, FiberSpec, ModeSolver};
use nanoring::fields::{intensity_map, Environment, FieldError};
use nanoring::green::FiberGreen;
use nanoring::tworing::{self, block_structure, oscillation_analysis_with, ring_pair, symmetric_state};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::ScenarioConfig;
use crate::output::{provenance, Outputs};

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    /// Numerical failure at one grid point.
    #[error("{point}: {message}")]
    Numeric { point: String, message: String },
}

fn at(point: impl Into<String>) -> impl FnOnce(CollectiveError) -> CommandError {
    let point = point.into();
    move |e| CommandError::Numeric { point, message: e.to_string() }
}

/// Shared state of one invocation.
pub struct Context {
    pub config: ScenarioConfig,
    pub solver: ModeSolver,
}

impl Context {
    pub fn new(config: ScenarioConfig, cache: Option<Arc<DispersionCache>>) -> Self {
        let fiber = FiberSpec { n_fiber: config.fiber.n_fiber };
        Self { config, solver: ModeSolver::new(fiber, cache) }
    }

    fn ring(&self) -> RingSpec {
        self.config.ring_spec().expect("validated ring")
    }

    fn k0(&self, lambda0_over_d: f64) -> f64 {
        2.0 * PI / (lambda0_over_d * self.ring().spacing())
    }

    fn green(&self, lambda0_over_d: f64) -> Result<FiberGreen, CommandError> {
        FiberGreen::new(self.solver.fiber, self.k0(lambda0_over_d), self.config.green_config(), &self.solver)
            .map_err(|e| at(format!("lambda0_over_d = {lambda0_over_d}"))(e.into()))
    }
}

pub fn modes(ctx: &Context) -> Result<Outputs, CommandError> {
    let c = &ctx.config;
    let d = ctx.ring().spacing();
    let grid = c.lambda_grid(d);
    let mut out = Outputs::default();
    if c.wants("dispersion") {
        let rows = dispersion_table(&ctx.solver, d, &grid, c.numerics.l_max);
        let mut s = String::from("lambda0_over_d,lambda0_over_a,mode,beta_over_k0\n");
        for r in rows {
            s.push_str(&format!("{},{},{},{}\n", r.lambda0_over_d, r.lambda0_over_d * d, r.mode, r.beta_over_k0));
        }
        out.csv("dispersion.csv", &provenance(c, "modes"), &s);
    }
    Ok(out)
}

pub fn scan_wavelength(ctx: &Context) -> Result<Outputs, CommandError> {
    let c = &ctx.config;
    let ring = ctx.ring();
    let grid = c.lambda_grid(ring.spacing());
    let mut out = Outputs::default();
    if !c.wants("wavelength") {
        return Ok(out);
    }
    let rows = grid
        .par_iter()
        .map(|&x| {
            let green = ctx.green(x)?;
            let row = collective::scan_wavelength(ring, |_| Ok(green.clone()), &[x]).map_err(at(format!("lambda0_over_d = {x}")))?;
            Ok(row.into_iter().next().expect("one row"))
        })
        .collect::<Result<Vec<_>, CommandError>>()?;
    out.csv("wavelength.csv", &provenance(c, "scan-wavelength"), &collective::scan_csv(&rows));
    Ok(out)
}

pub fn scan_separation(ctx: &Context) -> Result<Outputs, CommandError> {
    let c = &ctx.config;
    let ring = ctx.ring();
    let x = c.wavelength.lambda0_over_d;
    let grid = c.second_ring.dz_grid.values();
    let green = ctx.green(x)?;
    let dz_max = grid.iter().fold(0.0f64, |m, z| m.max(*z));
    let kernels = KernelSet::new(&green, &[ring.rho], dz_max).map_err(at(format!("lambda0_over_d = {x}")))?;
    let rows = grid
        .par_iter()
        .map(|&z| {
            let row = tworing::scan_with(ring, &kernels, &[z]).map_err(at(format!("dz_over_a = {z}")))?;
            Ok(row.into_iter().next().expect("one row"))
        })
        .collect::<Result<Vec<_>, CommandError>>()?;
    let prov = provenance(c, "scan-separation");
    let mut out = Outputs::default();
    if c.wants("separation") {
        out.csv("separation.csv", &prov, &tworing::scan_csv(&rows));
    }
    if c.wants("oscillations") {
        let window = (c.second_ring.dz_grid.start, c.second_ring.dz_grid.stop);
        let (lo, hi) = ring.index_range();
        let reports: Vec<Value> = (lo..=hi)
            .map(|n| match oscillation_analysis_with(&rows, n, window, c.numerics.min_periods) {
                Ok(r) => json!({"n": n, "report": r}),
                Err(e) => json!({"n": n, "error": e.to_string()}),
            })
            .collect();
        out.json(
            "oscillations.json",
            &prov,
            json!({"lambda0_over_d": x, "window_over_a": [window.0, window.1], "rems": reports}),
        );
    }
    Ok(out)
}

pub fn pattern(ctx: &Context) -> Result<Outputs, CommandError> {
    let c = &ctx.config;
    let p = &c.pattern;
    let ring = ctx.ring();
    let x = c.wavelength.lambda0_over_d;
    let k0 = ctx.k0(x);
    let (rings, state) = if c.second_ring.enabled {
        let dz = c.second_ring.dz_over_a[0];
        let state = symmetric_state(p.n, ring.atoms, p.second_ring_sign).map_err(at("pattern.n"))?;
        (ring_pair(ring, dz).to_vec(), state)
    } else {
        (vec![ring], rem_state(p.n, ring.atoms).map_err(at("pattern.n"))?)
    };
    let spec = c.grid_spec();
    let prov = provenance(c, "pattern");
    let mut out = Outputs::default();
    for &env in &p.environments {
        let stem = match env {
            Environment::Fiber => "pattern",
            Environment::Free => "pattern_free",
        };
        if !c.wants(stem) {
            continue;
        }
        let green = match env {
            Environment::Fiber => Some(ctx.green(x)?),
            Environment::Free => None,
        };
        let map = intensity_map(spec, &state, &rings, green.as_ref(), k0).map_err(|e| match e {
            FieldError::Green(g) => at(format!("lambda0_over_d = {x}"))(g.into()),
            e => CommandError::Numeric { point: format!("lambda0_over_d = {x}"), message: e.to_string() },
        })?;
        let mut header = map.header();
        header["lambda0_over_d"] = json!(x);
        header["n"] = json!(p.n);
        out.json(&format!("{stem}.json"), &prov, header);
        out.csv(&format!("{stem}.csv"), &prov, &map.to_csv());
    }
    Ok(out)
}

pub fn two_ring_blocks(ctx: &Context) -> Result<Outputs, CommandError> {
    let c = &ctx.config;
    let ring = ctx.ring();
    let x = c.wavelength.lambda0_over_d;
    let mut out = Outputs::default();
    if !c.wants("blocks") {
        return Ok(out);
    }
    let green = ctx.green(x)?;
    let blocks = c
        .second_ring
        .dz_over_a
        .iter()
        .map(|&z| {
            let point = format!("dz_over_a = {z}");
            let h = collective::build_hamiltonian(&ring_pair(ring, z), &green).map_err(at(point.clone()))?;
            let b = block_structure(&h).map_err(at(point))?;
            let mut v = b.to_json();
            v["dz_over_a"] = json!(z);
            Ok(v)
        })
        .collect::<Result<Vec<_>, CommandError>>()?;
    out.json("blocks.json", &provenance(c, "two-ring-blocks"), json!({"lambda0_over_d": x, "blocks": blocks}));
    Ok(out)
}
