//! Flat `key = value` scenario configuration with dotted section prefixes
//! (`model.sigma = 0.142857`), plus the synthetic-geography generators:
//! Gaussian initial conditions and the sigmoid β(x,t) field.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::mesh::Mesh;
use crate::schwarz::PcKind;
use crate::seird::{integrate_field, BetaFn, ModelParameters, PicardConfig};
use crate::sparsela::KrylovConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected `key = value`, got `{text}`")]
    Malformed { path: String, line: usize, text: String },
    #[error("unknown config key `{0}` (check spelling against the documented keys)")]
    UnknownKey(String),
    #[error("config key `{key}`: cannot parse `{value}` as {want}")]
    BadValue { key: String, value: String, want: &'static str },
    #[error("unknown preconditioner kind `{0}`; expected one of none, asm, ras1, ras2, ras2-v2, ras2-v3")]
    UnknownPc(String),
    #[error("unknown mesh kind `{0}`; expected square or file")]
    UnknownMeshKind(String),
    #[error("unknown initial-condition kind `{0}`; expected center-gaussian, uniform, or multi-gaussian")]
    UnknownIcKind(String),
    #[error("requested total population must be positive, got {0}")]
    NonpositiveTotal(f64),
    #[error("ic.pulses entry `{0}` must be x:y:width:total")]
    BadPulse(String),
    #[error("{0}")]
    Invalid(String),
}

const KNOWN_KEYS: &[&str] = &[
    "mesh.kind",
    "mesh.n",
    "mesh.path",
    "model.allee",
    "model.beta",
    "model.beta_e",
    "model.beta_i",
    "model.sigma",
    "model.gamma_e",
    "model.gamma_r",
    "model.gamma_d",
    "model.nu_s",
    "model.nu_e",
    "model.nu_i",
    "model.nu_r",
    "model.beta_central",
    "model.beta_eastern",
    "model.beta_western",
    "model.x_eastern",
    "model.x_western",
    "ic.kind",
    "ic.total",
    "ic.infected_fraction",
    "ic.decay",
    "ic.pulses",
    "time.dt",
    "time.steps",
    "solver.pc",
    "solver.subdomains",
    "solver.overlap",
    "solver.rtol",
    "solver.picard_tol",
    "solver.picard_max_iters",
    "output.cadence",
];

/// Parsed but untyped key/value pairs.
#[derive(Debug)]
pub struct RawConfig {
    map: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Malformed {
                    path: origin.to_string(),
                    line: ln + 1,
                    text: line.to_string(),
                });
            };
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey(key));
            }
            map.insert(key, value.trim().to_string());
        }
        Ok(RawConfig { map })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn empty() -> Self {
        RawConfig { map: BTreeMap::new() }
    }

    fn f64(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                value: v.clone(),
                want: "a number",
            }),
        }
    }

    fn usize(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                value: v.clone(),
                want: "a nonnegative integer",
            }),
        }
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }
}

#[derive(Debug, Clone)]
pub enum MeshSpec {
    /// Structured unit-square triangulation with n cells per side.
    Square { n: usize },
    /// Mesh loaded from the text format of the mesh module.
    File { path: PathBuf },
}

#[derive(Debug, Clone)]
pub struct GaussianPulse {
    pub center: [f64; 2],
    /// Exponential decay coefficient w in exp(−w·r²).
    pub decay: f64,
    /// Requested ∫ of this pulse over the mesh.
    pub total: f64,
}

#[derive(Debug, Clone)]
pub enum IcSpec {
    /// i = 0.1·N·exp(−decay·r²) around the domain center, s = N − i.
    CenterGaussian { total_density: f64, decay: f64 },
    /// Spatially uniform densities with the given infected fraction.
    Uniform { total_density: f64, infected_fraction: f64 },
    /// Population as a sum of Gaussian pulses, each normalized to its
    /// requested total count; infected fraction applied pointwise.
    MultiGaussian { pulses: Vec<GaussianPulse>, infected_fraction: f64 },
}

/// Sigmoid-in-time × two-sided-sigmoid-in-x infection-rate field.
#[derive(Debug, Clone, Copy)]
pub struct BetaField {
    pub central: f64,
    pub eastern: f64,
    pub western: f64,
    pub x_eastern: f64,
    pub x_western: f64,
}

impl BetaField {
    /// (0.101 − 0.05/(1+e^{130−t})) · β(x) with
    /// β(x) = β_c + (β_e−β_c)/(1+e^{−5(x−x_e)}) + (β_w−β_c)/(1+e^{10(x−x_w)}).
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        let time = 0.101 - 0.05 / (1.0 + (130.0 - t).exp());
        let space = self.central
            + (self.eastern - self.central) / (1.0 + (-5.0 * (x - self.x_eastern)).exp())
            + (self.western - self.central) / (1.0 + (10.0 * (x - self.x_western)).exp());
        time * space
    }

    pub fn to_beta_fn(self) -> BetaFn {
        Box::new(move |x, t| self.eval(x[0], t))
    }
}

/// A fully resolved simulation scenario.
pub struct Scenario {
    pub mesh: MeshSpec,
    pub params: ModelParameters,
    pub beta_field: Option<BetaField>,
    pub ic: IcSpec,
    pub dt: f64,
    pub steps: usize,
    pub pc: PcKind,
    pub subdomains: usize,
    pub overlap: usize,
    pub outer: KrylovConfig,
    pub picard: PicardConfig,
    /// Write a VTK snapshot every this many steps; 0 disables snapshots.
    pub output_cadence: usize,
}

pub fn parse_pc(name: &str) -> Result<PcKind, ConfigError> {
    Ok(match name {
        "none" => PcKind::None,
        "asm" => PcKind::OneLevelAsm,
        "ras1" => PcKind::OneLevelRas,
        "ras2" => PcKind::TwoGridRas,
        "ras2-v2" => PcKind::TwoGridRasV2,
        "ras2-v3" => PcKind::TwoGridRasV3,
        other => return Err(ConfigError::UnknownPc(other.to_string())),
    })
}

impl Scenario {
    /// Resolve a scenario from a raw config; missing keys fall back to the
    /// square-domain baseline (unit square, standard epidemic parameters,
    /// center-Gaussian outbreak of a population of density 2000).
    pub fn from_config(cfg: &RawConfig) -> Result<Self, ConfigError> {
        let mesh = match cfg.str("mesh.kind").unwrap_or("square") {
            "square" => MeshSpec::Square { n: cfg.usize("mesh.n", 64)? },
            "file" => MeshSpec::File {
                path: PathBuf::from(cfg.str("mesh.path").ok_or_else(|| {
                    ConfigError::Invalid("mesh.kind = file requires mesh.path".into())
                })?),
            },
            other => return Err(ConfigError::UnknownMeshKind(other.to_string())),
        };
        let beta = cfg.f64("model.beta", 3.78e-4)?;
        let beta_field = if cfg.str("model.beta_central").is_some() {
            Some(BetaField {
                central: cfg.f64("model.beta_central", 0.0)?,
                eastern: cfg.f64("model.beta_eastern", 0.0)?,
                western: cfg.f64("model.beta_western", 0.0)?,
                x_eastern: cfg.f64("model.x_eastern", 0.0)?,
                x_western: cfg.f64("model.x_western", 0.0)?,
            })
        } else {
            None
        };
        // With a β field the base rates are 1 and the field carries the
        // magnitude: β_i(x,t) = β(t)·β(x).
        let base_beta = if beta_field.is_some() { 1.0 } else { beta };
        let params = ModelParameters {
            allee: cfg.f64("model.allee", 500.0)?,
            beta_e: cfg.f64("model.beta_e", base_beta)?,
            beta_i: cfg.f64("model.beta_i", base_beta)?,
            nu: [
                cfg.f64("model.nu_s", 3.94e-6)?,
                cfg.f64("model.nu_e", 3.94e-6)?,
                cfg.f64("model.nu_i", 1e-8)?,
                cfg.f64("model.nu_r", 3.94e-6)?,
                0.0,
            ],
            sigma: cfg.f64("model.sigma", 1.0 / 7.0)?,
            gamma_e: cfg.f64("model.gamma_e", 1.0 / 6.0)?,
            gamma_r: cfg.f64("model.gamma_r", 1.0 / 24.0)?,
            gamma_d: cfg.f64("model.gamma_d", 1.0 / 160.0)?,
        };
        let total = cfg.f64("ic.total", 2000.0)?;
        if total <= 0.0 {
            return Err(ConfigError::NonpositiveTotal(total));
        }
        let infected_fraction = cfg.f64("ic.infected_fraction", 0.1)?;
        let decay = cfg.f64("ic.decay", 10.0)?;
        let ic = match cfg.str("ic.kind").unwrap_or("center-gaussian") {
            "center-gaussian" => IcSpec::CenterGaussian { total_density: total, decay },
            "uniform" => IcSpec::Uniform { total_density: total, infected_fraction },
            "multi-gaussian" => {
                let raw = cfg.str("ic.pulses").ok_or_else(|| {
                    ConfigError::Invalid("ic.kind = multi-gaussian requires ic.pulses".into())
                })?;
                let mut pulses = Vec::new();
                for part in raw.split(';').filter(|p| !p.trim().is_empty()) {
                    let fields: Vec<f64> = part
                        .split(':')
                        .map(|f| f.trim().parse::<f64>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| ConfigError::BadPulse(part.trim().to_string()))?;
                    if fields.len() != 4 {
                        return Err(ConfigError::BadPulse(part.trim().to_string()));
                    }
                    if fields[3] <= 0.0 {
                        return Err(ConfigError::NonpositiveTotal(fields[3]));
                    }
                    pulses.push(GaussianPulse {
                        center: [fields[0], fields[1]],
                        decay: fields[2],
                        total: fields[3],
                    });
                }
                IcSpec::MultiGaussian { pulses, infected_fraction }
            }
            other => return Err(ConfigError::UnknownIcKind(other.to_string())),
        };
        let pc = parse_pc(cfg.str("solver.pc").unwrap_or("ras2-v3"))?;
        Ok(Scenario {
            mesh,
            params,
            beta_field,
            ic,
            dt: cfg.f64("time.dt", 0.1)?,
            steps: cfg.usize("time.steps", 10)?,
            pc,
            subdomains: cfg.usize("solver.subdomains", 16)?,
            // Minimum overlap (one vertex ring) is the baseline for RAS.
            overlap: cfg.usize("solver.overlap", 1)?,
            outer: KrylovConfig {
                rtol: cfg.f64("solver.rtol", 1e-5)?,
                ..Default::default()
            },
            picard: PicardConfig {
                tol: cfg.f64("solver.picard_tol", 1e-8)?,
                max_iters: cfg.usize("solver.picard_max_iters", 50)?,
            },
            output_cadence: cfg.usize("output.cadence", 0)?,
        })
    }
}

/// Nodal Gaussian `amplitude · exp(−decay·‖x − center‖²)`.
pub fn gaussian_ic(mesh: &Mesh, center: [f64; 2], amplitude: f64, decay: f64) -> Vec<f64> {
    assert!(decay > 0.0, "gaussian decay must be positive");
    mesh.vertices
        .iter()
        .map(|v| {
            let r2 = (v[0] - center[0]).powi(2) + (v[1] - center[1]).powi(2);
            amplitude * (-decay * r2).exp()
        })
        .collect()
}

/// Sum of Gaussian pulses, each rescaled so its integral over the mesh is
/// exactly the requested per-pulse total.
pub fn multi_gaussian_ic(mesh: &Mesh, pulses: &[GaussianPulse]) -> Result<Vec<f64>, ConfigError> {
    let mut field = vec![0.0; mesh.n_vertices()];
    let ([lo_x, lo_y], [hi_x, hi_y]) = mesh.bounding_box();
    for p in pulses {
        if p.total <= 0.0 {
            return Err(ConfigError::NonpositiveTotal(p.total));
        }
        if p.center[0] < lo_x || p.center[0] > hi_x || p.center[1] < lo_y || p.center[1] > hi_y {
            return Err(ConfigError::Invalid(format!(
                "gaussian center ({}, {}) lies outside the mesh bounding box",
                p.center[0], p.center[1]
            )));
        }
        let unit = gaussian_ic(mesh, p.center, 1.0, p.decay);
        let mass = integrate_field(mesh, &unit);
        if mass <= 0.0 {
            return Err(ConfigError::Invalid("gaussian pulse has zero mass on this mesh".into()));
        }
        let scale = p.total / mass;
        for (f, u) in field.iter_mut().zip(&unit) {
            *f += scale * u;
        }
    }
    Ok(field)
}
