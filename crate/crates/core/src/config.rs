//! Run configuration read from TOML.
//!
//! Every numeric field has a default compiled into the binary; the effective
//! configuration (after defaults and command-line overrides) is echoed into
//! the report.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{EpigraphProfile, LevelSetDomain, Monomial};
use crate::error::{Error, Result};
use crate::wiener::{CylindricalDomain, EpigraphSpec, FunctionalSpec, StudyGrid};

/// Default global seed.
pub const DEFAULT_SEED: u64 = 20_240_917;

/// A level-set domain description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    WholeSpace {
        dim: usize,
    },
    /// {x_axis < -offset}.
    Halfspace {
        dim: usize,
        #[serde(default)]
        axis: usize,
        offset: f64,
    },
    /// {⟨normal, x⟩ + offset < 0}.
    Affine {
        normal: Vec<f64>,
        offset: f64,
    },
    Ball {
        dim: usize,
        radius: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    Ellipsoid {
        semi_axes: Vec<f64>,
    },
    Epigraph {
        dim: usize,
        profile: EpigraphProfile,
    },
    Polynomial {
        dim: usize,
        terms: Vec<Monomial>,
    },
    /// Truncated path functional over R^m.
    Cylindrical {
        functional: FunctionalSource,
        m: usize,
    },
}

impl DomainConfig {
    pub fn build(&self) -> Result<LevelSetDomain> {
        match self {
            Self::WholeSpace { dim } => LevelSetDomain::whole_space(*dim),
            Self::Halfspace { dim, axis, offset } => {
                Ok(LevelSetDomain::halfspace(*dim, *axis, *offset)?.with_name(format!("halfspace-d{dim}-x{}<-{offset}", axis + 1)))
            }
            Self::Affine { normal, offset } => LevelSetDomain::affine(normal.clone(), *offset),
            Self::Ball { dim, radius, center: None } => Ok(LevelSetDomain::ball(*dim, *radius)?.with_name(format!("ball-d{dim}-R{radius}"))),
            Self::Ball { dim, radius, center: Some(c) } => {
                if c.len() != *dim {
                    return Err(Error::Config(format!("ball center has {} coordinates, dim is {dim}", c.len())));
                }
                Ok(LevelSetDomain::ball_centered(c.clone(), *radius)?.with_name(format!("ball-d{dim}-R{radius}-shifted")))
            }
            Self::Ellipsoid { semi_axes } => LevelSetDomain::ellipsoid(semi_axes.clone()),
            Self::Epigraph { dim, profile } => LevelSetDomain::epigraph(*dim, profile.clone()),
            Self::Polynomial { dim, terms } => LevelSetDomain::polynomial(*dim, terms.clone()),
            Self::Cylindrical { functional, m } => CylindricalDomain::new(functional.spec()?.clone(), *m)?.into_domain(),
        }
    }

    fn resolve(&mut self, base: &Path) -> Result<()> {
        if let Self::Cylindrical { functional, .. } = self {
            functional.resolve(base)?;
        }
        Ok(())
    }
}

/// A functional spec given inline or as a path to a TOML file.
///
/// Paths are relative to the referencing config file and are loaded when
/// the config is read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FunctionalSource {
    Inline(FunctionalSpec),
    File(PathBuf),
    /// A file that has been read; serialized with its resolved path.
    Loaded { path: PathBuf, spec: FunctionalSpec },
}

impl FunctionalSource {
    pub fn spec(&self) -> Result<&FunctionalSpec> {
        match self {
            Self::Inline(s) | Self::Loaded { spec: s, .. } => Ok(s),
            Self::File(p) => Err(Error::Config(format!("functional spec {} was not loaded", p.display()))),
        }
    }

    fn resolve(&mut self, base: &Path) -> Result<()> {
        if let Self::File(rel) = self {
            let path = base.join(rel);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::Config(format!("cannot read functional spec {}: {e}", path.display())))?;
            let spec = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            *self = Self::Loaded { path, spec };
        }
        Ok(())
    }
}

/// Box bounds plus target spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub h: f64,
}

/// A bump test function; `margin` widens the containment check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpConfig {
    pub center: Vec<f64>,
    pub radius: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_margin() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvatureConfig {
    pub domain: DomainConfig,
    #[serde(default = "default_boundary_samples")]
    pub samples: usize,
    #[serde(default = "yes")]
    pub assert_nonnegative: bool,
}

fn default_boundary_samples() -> usize {
    200
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractConfig {
    pub domain: DomainConfig,
    pub grid: GridConfig,
    pub bumps: Vec<BumpConfig>,
    #[serde(default = "default_sigmas")]
    pub sigmas: Vec<f64>,
    #[serde(default = "default_ps")]
    pub ps: Vec<f64>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// σ of the near-identity check.
    #[serde(default = "default_identity_sigma")]
    pub identity_sigma: f64,
    #[serde(default = "default_identity_band")]
    pub identity_band: [f64; 2],
    /// Rerun at half spacing for the excess-shrink check.
    #[serde(default = "yes")]
    pub refine: bool,
    /// Whether ratios are asserted at all; they never are on domains whose
    /// curvature scan finds H^γ < 0.
    #[serde(default = "yes")]
    pub assert: bool,
    #[serde(default = "default_boundary_samples")]
    pub boundary_samples: usize,
    #[serde(default = "default_solver_tol")]
    pub solver_tol: f64,
}

fn default_sigmas() -> Vec<f64> {
    vec![0.1, 1.0, 10.0]
}

fn default_ps() -> Vec<f64> {
    vec![1.5, 2.0, 3.0, 4.0]
}

fn default_eps() -> f64 {
    1e-3
}

fn default_identity_sigma() -> f64 {
    1e-4
}

fn default_identity_band() -> [f64; 2] {
    [0.9, 1.02]
}

fn default_solver_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub domain: DomainConfig,
    pub grid: GridConfig,
    pub sigma: f64,
    pub bump: BumpConfig,
    #[serde(default = "default_solver_tol")]
    pub solver_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenOracleConfig {
    pub h: f64,
    pub half_width: f64,
    pub ks: Vec<usize>,
    pub sigmas: Vec<f64>,
    /// Asserted window |x| ≤ window.
    pub window: f64,
    /// Wider window, reported only.
    pub report_window: f64,
    pub tol: f64,
    pub min_ratio: f64,
}

impl Default for EigenOracleConfig {
    fn default() -> Self {
        Self {
            h: 0.02,
            half_width: 8.0,
            ks: vec![1, 2, 3],
            sigmas: vec![0.5, 1.0, 2.0],
            window: 3.0,
            report_window: 6.0,
            tol: 1e-3,
            min_ratio: 1.8,
        }
    }
}

/// One Feynman-Kac comparison domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FkCase {
    pub domain: DomainConfig,
    pub grid: GridConfig,
    pub bump: BumpConfig,
    pub probes: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FkOracleConfig {
    pub enabled: bool,
    pub sigma: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub z_max: f64,
    pub cases: Vec<FkCase>,
}

impl Default for FkOracleConfig {
    fn default() -> Self {
        let bump1 = BumpConfig { center: vec![-3.0], radius: 1.0, margin: 0.1 };
        let bump2 = BumpConfig { center: vec![-3.0, 0.0], radius: 1.0, margin: 0.1 };
        Self {
            enabled: true,
            sigma: 1.0,
            n_paths: 200_000,
            dt: 1e-3,
            z_max: 3.0,
            cases: vec![
                FkCase {
                    domain: DomainConfig::Halfspace { dim: 1, axis: 0, offset: 1.0 },
                    grid: GridConfig { lower: vec![-8.0], upper: vec![0.0], h: 0.005 },
                    bump: bump1,
                    probes: vec![vec![-1.5], vec![-2.0], vec![-2.5], vec![-3.0], vec![-3.5]],
                },
                FkCase {
                    domain: DomainConfig::Halfspace { dim: 2, axis: 0, offset: 1.0 },
                    grid: GridConfig { lower: vec![-8.0, -8.0], upper: vec![0.0, 8.0], h: 0.025 },
                    bump: bump2,
                    probes: vec![vec![-1.5, 0.0], vec![-2.0, 0.5], vec![-2.5, -0.5], vec![-3.0, 0.0], vec![-3.5, 0.3]],
                },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub curvature: bool,
    pub eigen: EigenOracleConfig,
    pub fk: FkOracleConfig,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { curvature: true, eigen: EigenOracleConfig::default(), fk: FkOracleConfig::default() }
    }
}

/// Whether a shipped functional is expected to validate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    #[default]
    Valid,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalEntry {
    pub name: String,
    pub functional: FunctionalSource,
    #[serde(default)]
    pub expect: Expectation,
    #[serde(default = "default_audit_dims")]
    pub audit_dims: Vec<usize>,
    #[serde(default = "default_audit_samples")]
    pub samples: usize,
}

fn default_audit_dims() -> Vec<usize> {
    vec![1, 2, 3]
}

fn default_audit_samples() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpigraphEntry {
    pub name: String,
    pub spec: EpigraphSpec,
    #[serde(default = "default_epigraph_dims")]
    pub audit_dims: Vec<usize>,
    #[serde(default = "default_audit_samples")]
    pub samples: usize,
}

fn default_epigraph_dims() -> Vec<usize> {
    vec![2, 3, 4]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WienerConfig {
    pub series: bool,
    /// Truncation for the orthonormality check.
    pub orthonormality_m: usize,
    pub functionals: Vec<FunctionalEntry>,
    pub epigraphs: Vec<EpigraphEntry>,
}

impl Default for WienerConfig {
    fn default() -> Self {
        Self { series: true, orthonormality_m: 8, functionals: Vec::new(), epigraphs: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    pub functional: FunctionalSource,
    /// Bump in ξ₁ only.
    pub bump_center: f64,
    pub bump_radius: f64,
    #[serde(default = "default_study_dims")]
    pub dims: Vec<usize>,
    #[serde(default = "default_study_sigma")]
    pub sigma: f64,
    #[serde(default = "default_identity_sigma")]
    pub identity_sigma: f64,
    #[serde(default = "default_identity_bound")]
    pub identity_bound: f64,
    #[serde(default)]
    pub grid: StudyGrid,
}

fn default_study_dims() -> Vec<usize> {
    vec![1, 2, 3]
}

fn default_study_sigma() -> f64 {
    1.0
}

fn default_identity_bound() -> f64 {
    0.02
}

/// Contents of one config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteFile {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub curvature: Vec<CurvatureConfig>,
    #[serde(default)]
    pub solve: Vec<SolveConfig>,
    #[serde(default)]
    pub contract: Vec<ContractConfig>,
    #[serde(default)]
    pub oracle: Option<OracleConfig>,
    #[serde(default)]
    pub wiener: Option<WienerConfig>,
    #[serde(default)]
    pub converge: Vec<ConvergeConfig>,
}

fn default_name() -> String {
    "run".into()
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl Default for SuiteFile {
    /// Built-in suites used when no config file is given.
    fn default() -> Self {
        Self {
            name: "builtin".into(),
            seed: DEFAULT_SEED,
            curvature: Vec::new(),
            solve: Vec::new(),
            contract: Vec::new(),
            oracle: Some(OracleConfig::default()),
            wiener: Some(WienerConfig::default()),
            converge: Vec::new(),
        }
    }
}

impl SuiteFile {
    /// Parses a config and loads every file it references.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Parses config text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut file: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for c in &mut file.curvature {
            c.domain.resolve(base)?;
        }
        for c in &mut file.solve {
            c.domain.resolve(base)?;
        }
        for c in &mut file.contract {
            c.domain.resolve(base)?;
        }
        if let Some(o) = &mut file.oracle {
            for case in &mut o.fk.cases {
                case.domain.resolve(base)?;
            }
        }
        if let Some(w) = &mut file.wiener {
            for f in &mut w.functionals {
                f.functional.resolve(base)?;
            }
        }
        for c in &mut file.converge {
            c.functional.resolve(base)?;
        }
        Ok(file)
    }
}

/// The subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Curvature,
    Solve,
    Contract,
    Lemma,
    Oracle,
    Wiener,
    Converge,
    All,
}

impl Suite {
    pub fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Curvature => "curvature",
            Self::Solve => "solve",
            Self::Contract => "contract",
            Self::Lemma => "lemma",
            Self::Oracle => "oracle",
            Self::Wiener => "wiener",
            Self::Converge => "converge",
            Self::All => "all",
        }
    }
}

/// Everything a run needs.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub suite: Suite,
    pub config_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Multiplies every asserted tolerance.
    pub tol_scale: f64,
    /// Overrides the grid spacing of grid-based suites.
    pub grid_h: Option<f64>,
    pub assert: bool,
    pub file: SuiteFile,
}

impl RunConfig {
    /// Loads the config file (or the built-in suites) and applies overrides.
    pub fn new(
        suite: Suite,
        config_path: Option<PathBuf>,
        out_dir: PathBuf,
        seed: Option<u64>,
        tol_scale: f64,
        grid_h: Option<f64>,
        assert: bool,
    ) -> Result<Self> {
        if !(tol_scale > 0.0) || !tol_scale.is_finite() {
            return Err(Error::Config(format!("--tol-scale must be positive, got {tol_scale}")));
        }
        if let Some(h) = grid_h {
            if !(h > 0.0) {
                return Err(Error::Config(format!("--grid-h must be positive, got {h}")));
            }
        }
        let mut file = match &config_path {
            Some(p) => SuiteFile::load(p)?,
            None => SuiteFile::default(),
        };
        let seed = seed.unwrap_or(file.seed);
        file.seed = seed;
        if let Some(h) = grid_h {
            for c in &mut file.contract {
                c.grid.h = h;
            }
            for c in &mut file.solve {
                c.grid.h = h;
            }
            for c in &mut file.converge {
                c.grid.h = h;
            }
        }
        Ok(Self { suite, config_path, out_dir, seed, tol_scale, grid_h, assert, file })
    }

    /// Errors when the selected suite has nothing to run.
    pub fn check_nonempty(&self) -> Result<()> {
        let f = &self.file;
        let empty = match self.suite {
            Suite::Curvature => f.curvature.is_empty(),
            Suite::Solve => f.solve.is_empty(),
            Suite::Contract | Suite::Lemma => f.contract.is_empty(),
            Suite::Oracle => f.oracle.is_none(),
            Suite::Wiener => f.wiener.is_none(),
            Suite::Converge => f.converge.is_empty(),
            Suite::All => false,
        };
        if empty {
            return Err(Error::Config(format!("config has no [{}] section", self.suite.label())));
        }
        Ok(())
    }
}
