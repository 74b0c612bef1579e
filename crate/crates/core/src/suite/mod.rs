//! Verification suite: runs every identity and scaling property as a named check and
//! collects the results into serializable reports.

mod algebra;
mod operators;
mod scaling;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::RangeInclusive;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{FeecError, Result};
use crate::fespace::{FeSpace, Geometry};
use crate::projection::Projector;
use crate::simplicial::{MeshFile, SimplicialComplex};
use crate::weights::{Faults, Weights};

pub use scaling::{center_vertex, congruent_cell, ScalingSelect};

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Check {
    pub id: String,
    pub max_err: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(id: &str, max_err: f64, tol: f64) -> Self {
        Check { id: id.to_string(), max_err, tol, pass: max_err.is_finite() && max_err <= tol }
    }

    /// A check that could not be evaluated because a construction step failed.
    pub fn failed(id: &str, err: &FeecError) -> Self {
        match err {
            FeecError::Check { id: cid, max_err, tol } => {
                Check { id: cid.clone(), max_err: *max_err, tol: *tol, pass: false }
            }
            _ => Check { id: id.to_string(), max_err: f64::INFINITY, tol: 0.0, pass: false },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub op: String,
    pub mesh: String,
    pub r: Option<usize>,
    pub k: Option<usize>,
    pub checks: Vec<Check>,
    pub constants: BTreeMap<String, f64>,
}

impl Report {
    pub fn new(op: &str, mesh: &str, r: Option<usize>, k: Option<usize>) -> Self {
        Report { op: op.into(), mesh: mesh.into(), r, k, checks: Vec::new(), constants: BTreeMap::new() }
    }

    pub fn check(&mut self, id: &str, max_err: f64, tol: f64) {
        self.push(Check::new(id, max_err, tol));
    }

    /// Adds a check, merging with an existing one of the same id (worst error wins).
    pub fn push(&mut self, c: Check) {
        if let Some(old) = self.checks.iter_mut().find(|o| o.id == c.id) {
            let worse = !c.pass || (old.pass && c.max_err > old.max_err);
            if worse {
                *old = Check { pass: old.pass && c.pass, ..c };
            }
        } else {
            self.checks.push(c);
        }
    }

    pub fn record<T>(&mut self, id: &str, tol: f64, value: Result<T>, err: impl FnOnce(&T) -> f64) {
        match value {
            Ok(v) => self.check(id, err(&v), tol),
            Err(e) => self.push(Check::failed(id, &e)),
        }
    }

    pub fn constant(&mut self, name: &str, value: f64) {
        self.constants.insert(name.into(), value);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Clone, Debug)]
pub enum MeshSource {
    Structured { n: usize, m: usize },
    File { label: String, mesh: MeshFile },
}

impl MeshSource {
    pub fn dim(&self) -> usize {
        match self {
            MeshSource::Structured { n, .. } => *n,
            MeshSource::File { mesh, .. } => mesh.dim,
        }
    }

    pub fn label(&self) -> String {
        match self {
            MeshSource::Structured { n, m } => format!("structured n={n} m={m}"),
            MeshSource::File { label, .. } => label.clone(),
        }
    }

    pub fn build(&self) -> Result<SimplicialComplex> {
        match self {
            MeshSource::Structured { n, m } => SimplicialComplex::structured(*n, *m),
            MeshSource::File { mesh, .. } => SimplicialComplex::from_mesh_file(mesh),
        }
    }
}

/// Suite stages in execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Complex,
    Dimensions,
    Exactness,
    Whitney,
    Weights,
    Extension,
    Projection,
    Scaling,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Complex,
        Stage::Dimensions,
        Stage::Exactness,
        Stage::Whitney,
        Stage::Weights,
        Stage::Extension,
        Stage::Projection,
        Stage::Scaling,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Complex => "complex",
            Stage::Dimensions => "dimensions",
            Stage::Exactness => "exactness",
            Stage::Whitney => "whitney",
            Stage::Weights => "weights",
            Stage::Extension => "extension",
            Stage::Projection => "projection",
            Stage::Scaling => "scaling",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|st| st.name() == s)
    }
}

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub mesh: MeshSource,
    /// refinement levels used by the scaling stage
    pub levels: usize,
    pub r: RangeInclusive<usize>,
    pub k: RangeInclusive<usize>,
    pub seed: u64,
    /// evaluate the Whitney identities in exact rational arithmetic
    pub rational: bool,
    /// random inputs per (r, k) in the commutation checks
    pub samples: usize,
    pub stages: Vec<Stage>,
    pub scaling: ScalingSelect,
    pub faults: Faults,
    /// flip one sign of the top boundary matrix before running
    pub flip_boundary: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            mesh: MeshSource::Structured { n: 2, m: 2 },
            levels: 3,
            r: 1..=2,
            k: 0..=3,
            seed: 0,
            rational: true,
            samples: 20,
            stages: Stage::ALL.to_vec(),
            scaling: ScalingSelect::default(),
            faults: Faults::default(),
            flip_boundary: false,
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.mesh.dim();
        if !(1..=3).contains(&n) {
            return Err(FeecError::Dimension(format!("mesh dimension {n} outside 1..=3")));
        }
        if *self.r.start() < 1 || self.r.is_empty() {
            return Err(FeecError::Dimension("r range must start at 1 or above".into()));
        }
        if self.levels < 1 {
            return Err(FeecError::Dimension("at least one refinement level is needed".into()));
        }
        Ok(())
    }

    pub fn ks(&self, n: usize) -> Vec<usize> {
        (*self.k.start()..=(*self.k.end()).min(n)).collect()
    }

    pub fn rs(&self) -> Vec<usize> {
        self.r.clone().collect()
    }

    pub fn stage(&self, s: Stage) -> bool {
        self.stages.contains(&s)
    }
}

/// Per-degree objects shared by the weight, extension and projection stages.
pub(crate) struct Level {
    pub geo: Arc<Geometry>,
    pub fe: Arc<FeSpace>,
    pub proj: Projector,
}

impl Level {
    pub fn new(geo: Arc<Geometry>, r: usize, faults: Faults) -> Self {
        let fe = Arc::new(FeSpace::new(geo.clone(), r));
        let w = Arc::new(Weights::with_faults(geo, r, faults));
        let proj = Projector::new(fe.clone(), w);
        Level { geo: fe.geo.clone(), fe, proj }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteOutput {
    pub reports: Vec<Report>,
}

impl SuiteOutput {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(Report::passed)
    }

    pub fn failures(&self) -> Vec<(&Report, &Check)> {
        self.reports.iter().flat_map(|r| r.checks.iter().filter(|c| !c.pass).map(move |c| (r, c))).collect()
    }

    /// The check with the given id in the first report of `op` that has one.
    pub fn find(&self, op: &str, id: &str) -> Vec<&Check> {
        self.reports.iter().filter(|r| r.op == op).flat_map(|r| r.checks.iter().filter(|c| c.id == id)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.reports).expect("reports serialize")
    }

    /// One row per check: op,mesh,r,k,id,max_err,tol,pass.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("op,mesh,r,k,id,max_err,tol,pass\n");
        for r in &self.reports {
            for c in &r.checks {
                let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},\"{}\",{},{},{},{:e},{:e},{}",
                    r.op,
                    r.mesh,
                    opt(r.r),
                    opt(r.k),
                    c.id,
                    c.max_err,
                    c.tol,
                    c.pass
                );
            }
        }
        out
    }

    /// One row per constant: op,mesh,r,k,name,value.
    pub fn constants_csv(&self) -> String {
        let mut out = String::from("op,mesh,r,k,name,value\n");
        for r in &self.reports {
            for (name, v) in &r.constants {
                let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
                let _ = writeln!(out, "{},\"{}\",{},{},{},{:e}", r.op, r.mesh, opt(r.r), opt(r.k), name, v);
            }
        }
        out
    }
}

/// Runs the selected stages in order. Construction failures inside a stage become failed checks.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteOutput> {
    cfg.validate()?;
    let mut complex = cfg.mesh.build()?;
    let n = complex.dim();
    if cfg.flip_boundary {
        complex.flip_boundary_sign(n, 0, 0);
    }
    let label = cfg.mesh.label();
    let geo = Geometry::new(complex);
    let mut reports = Vec::new();
    let mut stages = cfg.stages.clone();
    stages.sort();
    stages.dedup();

    let mut levels: BTreeMap<usize, Level> = BTreeMap::new();
    for stage in stages {
        match stage {
            Stage::Complex => reports.push(algebra::complex_checks(&geo.complex, &label)),
            Stage::Dimensions => reports.extend(algebra::dimension_checks(cfg, &geo, &label)),
            Stage::Exactness => reports.extend(algebra::exactness_checks(cfg, &geo, &label)),
            Stage::Whitney => reports.extend(algebra::whitney_checks(cfg, &geo, &label)),
            Stage::Weights | Stage::Extension | Stage::Projection => {}
            Stage::Scaling => reports.extend(scaling::scaling_checks(cfg, n, &label)),
        }
        if matches!(stage, Stage::Weights | Stage::Extension | Stage::Projection) {
            for r in cfg.rs() {
                let level = levels.entry(r).or_insert_with(|| Level::new(geo.clone(), r, cfg.faults));
                match stage {
                    Stage::Weights => reports.extend(operators::weight_checks(cfg, level, &label)),
                    Stage::Extension => reports.extend(operators::extension_checks(cfg, level, &label)),
                    _ => reports.extend(operators::projection_checks(cfg, level, &label)),
                }
            }
        }
    }
    Ok(SuiteOutput { reports })
}

/// Relative error with a floor on the scale.
pub(crate) fn rel(err: f64, scale: f64) -> f64 {
    err / scale.max(1.0)
}
