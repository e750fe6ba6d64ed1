use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{CoefficientSet, FitMethod, ModelSpec};
use crate::ingest::AggregationConfig;
use crate::tensor::Matrix;

/// Input files. Relative paths are resolved against the config file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputConfig {
    /// Event CSV for `ingest`.
    pub events: Option<PathBuf>,
    /// Optional `cameo_root,quad_class` mapping for `ingest`.
    pub cameo_mapping: Option<PathBuf>,
    /// Panel container; defaults to `panel.rtn` in the output directory.
    pub tensor: Option<PathBuf>,
    /// Fit file; defaults to `fit.rfit` in the output directory.
    pub fit: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    pub qq_normalize: bool,
    pub demean: bool,
    /// Standardize each dyad's transitive design series.
    pub standardize_transitive: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            qq_normalize: true,
            demean: false,
            standardize_transitive: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub method: FitMethod,
    pub chains: usize,
    /// Variable subset to model, by label; all variables when absent.
    pub variables: Option<Vec<String>>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            method: FitMethod::Gibbs,
            chains: 1,
            variables: None,
        }
    }
}

/// Synthetic panel settings. `b1`/`b2` default to the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub actors: usize,
    pub variables: usize,
    pub periods: usize,
    pub sigma: f64,
    /// Defaults to `model.seed`.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub b1: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub b2: Option<Vec<Vec<f64>>>,
    pub b3: Vec<Vec<f64>>,
}

impl SimulateConfig {
    pub fn coefficients(&self) -> Result<CoefficientSet> {
        let square = |rows: &Option<Vec<Vec<f64>>>, tag: &str| -> Result<Matrix> {
            match rows {
                None => Ok(Matrix::identity(self.actors)),
                Some(r) => {
                    let m = Matrix::from_rows(r).map_err(|e| Error::Config(format!("simulate.{tag}: {e}")))?;
                    if m.shape() != (self.actors, self.actors) {
                        return Err(Error::Config(format!(
                            "simulate.{tag} must be {0}x{0}, got {1}x{2}",
                            self.actors,
                            m.rows(),
                            m.cols()
                        )));
                    }
                    Ok(m)
                }
            }
        };
        let b3 = Matrix::from_rows(&self.b3).map_err(|e| Error::Config(format!("simulate.b3: {e}")))?;
        if b3.shape() != (self.variables, 3 * self.variables) {
            return Err(Error::Config(format!(
                "simulate.b3 must be {}x{}, got {}x{}",
                self.variables,
                3 * self.variables,
                b3.rows(),
                b3.cols()
            )));
        }
        CoefficientSet::new(square(&self.b1, "b1")?, square(&self.b2, "b2")?, b3, self.sigma * self.sigma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out") }
    }
}

/// Which diagnostics `diagnose` writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExportConfig {
    pub trace: bool,
    pub summary: bool,
    pub b3_summary: bool,
    pub networks: bool,
    pub network_level: f64,
    pub convergence: bool,
    pub rmse_json: bool,
}

impl Default for ExportConfig {
    fn default() -> Self {
        ExportConfig {
            trace: true,
            summary: true,
            b3_summary: true,
            networks: true,
            network_level: 0.99,
            convergence: true,
            rmse_json: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub input: InputConfig,
    pub aggregation: Option<AggregationConfig>,
    pub preprocess: PreprocessConfig,
    pub model: ModelSpec,
    pub fit: FitConfig,
    pub simulate: Option<SimulateConfig>,
    pub output: OutputConfig,
    pub export: ExportConfig,
    #[serde(skip)]
    base_dir: PathBuf,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub method: Option<FitMethod>,
    pub variables: Option<Vec<String>>,
}

impl RunConfig {
    /// Parses TOML; unknown keys are errors. Relative paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        RunConfig::from_toml_str(&text, base)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(seed) = o.seed {
            self.model.seed = seed;
            if let Some(sim) = &mut self.simulate {
                sim.seed = Some(seed);
            }
        }
        if let Some(out) = &o.out {
            self.output.dir = out.clone();
        }
        if let Some(method) = o.method {
            self.fit.method = method;
        }
        if let Some(vars) = &o.variables {
            self.fit.variables = Some(vars.clone());
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if let Some(a) = &self.aggregation {
            a.validate()?;
        }
        if self.fit.chains == 0 {
            return Err(Error::Config("fit.chains must be at least 1".into()));
        }
        if matches!(&self.fit.variables, Some(v) if v.is_empty()) {
            return Err(Error::Config("fit.variables is empty".into()));
        }
        let level = self.export.network_level;
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::Config(format!("export.network_level {level} outside (0, 1)")));
        }
        if let Some(s) = &self.simulate {
            if s.actors < 3 || s.variables == 0 || s.periods < 2 {
                return Err(Error::Config("simulate needs actors >= 3, variables >= 1, periods >= 2".into()));
            }
            if !(s.sigma >= 0.0 && s.sigma.is_finite()) {
                return Err(Error::Config(format!("simulate.sigma must be non-negative, got {}", s.sigma)));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output.dir)
    }

    pub fn tensor_path(&self) -> PathBuf {
        match &self.input.tensor {
            Some(p) => self.resolve(p),
            None => self.output_dir().join(super::PANEL_FILE),
        }
    }

    pub fn fit_path(&self) -> PathBuf {
        match &self.input.fit {
            Some(p) => self.resolve(p),
            None => self.output_dir().join(super::FIT_FILE),
        }
    }

    /// Config as recorded in manifests: the output directory is left out so
    /// runs into different directories record the same config.
    pub(crate) fn for_manifest(&self) -> RunConfig {
        let mut c = self.clone();
        c.output.dir = PathBuf::from(".");
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_paper_run() {
        let cfg = RunConfig::from_toml_str("", ".").unwrap();
        assert_eq!(cfg.model.iterations, 8000);
        assert_eq!(cfg.model.burn_in, 1000);
        assert_eq!(cfg.fit.method, FitMethod::Gibbs);
        assert!(cfg.preprocess.qq_normalize);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml_str("[model]\niteratons = 10\n", ".").is_err());
        assert!(RunConfig::from_toml_str("bogus = 1\n", ".").is_err());
        assert!(RunConfig::from_toml_str("[export]\ntrace = true\nplots = true\n", ".").is_err());
    }

    #[test]
    fn overrides_take_precedence() {
        let mut cfg = RunConfig::from_toml_str("[model]\nseed = 3\n[fit]\nmethod = \"gibbs\"\n", "/base").unwrap();
        cfg.apply(&Overrides {
            seed: Some(9),
            method: Some(FitMethod::Als),
            variables: Some(vec!["a".into()]),
            out: Some("/tmp/x".into()),
        })
        .unwrap();
        assert_eq!(cfg.model.seed, 9);
        assert_eq!(cfg.fit.method, FitMethod::Als);
        assert_eq!(cfg.output_dir(), PathBuf::from("/tmp/x"));
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let cfg = RunConfig::from_toml_str("[input]\ntensor = \"data/p.rtn\"\n", "/cfg").unwrap();
        assert_eq!(cfg.tensor_path(), PathBuf::from("/cfg/data/p.rtn"));
        assert_eq!(cfg.fit_path(), PathBuf::from("/cfg/out/fit.rfit"));
    }

    #[test]
    fn simulate_coefficients_check_shapes() {
        let text = "[simulate]\nactors = 3\nvariables = 1\nperiods = 10\nsigma = 0.1\nb3 = [[0.5, 0.1, 0.0]]\n";
        let cfg = RunConfig::from_toml_str(text, ".").unwrap();
        let c = cfg.simulate.as_ref().unwrap().coefficients().unwrap();
        assert_eq!(c.b1, Matrix::identity(3));
        let bad = text.replace("[[0.5, 0.1, 0.0]]", "[[0.5, 0.1]]");
        let cfg = RunConfig::from_toml_str(&bad, ".").unwrap();
        assert!(cfg.simulate.unwrap().coefficients().is_err());
    }
}
