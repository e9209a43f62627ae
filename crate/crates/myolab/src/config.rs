//! Run-configuration files and the model parameter registry.
//!
//! Run configurations are TOML documents deserializing into
//! [`crate::coupling::RunConfig`]. Model parameters live in one file per
//! model (`<ID>.toml`, one section named after the model); the minimal
//! model's calibration is embedded so it always resolves, the literature
//! models require their files.

use crate::activation::ForceModel;
use crate::coupling::RunConfig;
use crate::error::{Error, Result};
use crate::models::{build_model, expected_keys, section_name, MODEL_IDS};
use std::path::{Path, PathBuf};

/// Environment variable holding a `:`-separated parameter-file search path.
pub const PARAM_PATH_ENV: &str = "MYOLAB_PARAM_PATH";

/// Parse a run configuration from TOML text.
pub fn parse_run_config(text: &str) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| Error::Config(format!("bad run configuration: {e}")))
}

/// Load a run configuration file.
pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_run_config(&text)
}

/// Ordered list of directories searched for `<ID>.toml` parameter files.
#[derive(Debug, Clone, Default)]
pub struct ParamSearch {
    pub dirs: Vec<PathBuf>,
}

impl ParamSearch {
    pub fn new(dirs: Vec<PathBuf>) -> Self {
        Self { dirs }
    }

    /// Search path assembled from the environment variable, the working
    /// directory's `params/`, and the parameter files shipped with the crate.
    pub fn from_env() -> Self {
        let mut dirs = Vec::new();
        if let Ok(var) = std::env::var(PARAM_PATH_ENV) {
            for part in var.split(':').filter(|s| !s.is_empty()) {
                dirs.push(PathBuf::from(part));
            }
        }
        dirs.push(PathBuf::from("params"));
        dirs.push(shipped_params_dir());
        Self { dirs }
    }

    /// First existing `<id>.toml` along the search path.
    pub fn resolve(&self, id: &str) -> Option<PathBuf> {
        self.dirs
            .iter()
            .map(|d| d.join(format!("{id}.toml")))
            .find(|p| p.is_file())
    }
}

/// Directory of the parameter files shipped with the crate.
pub fn shipped_params_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("params")
}

/// Build a model by id, resolving parameters along the search path.
///
/// The minimal model falls back to its embedded calibration when no file is
/// found; the literature models require a parameter file and the error lists
/// the keys the file must provide.
pub fn load_model(search: &ParamSearch, id: &str) -> Result<Box<dyn ForceModel>> {
    if !MODEL_IDS.contains(&id) {
        return Err(Error::Config(format!(
            "unknown model id '{id}' (known: {})",
            MODEL_IDS.join(", ")
        )));
    }
    match search.resolve(id) {
        Some(path) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            build_model(id, Some(&text))
        }
        None if id == "MDM" => build_model(id, None),
        None => Err(Error::Config(format!(
            "no parameter file {id}.toml found in {:?}; the [{}] section must provide: {}",
            self_dirs(search),
            section_name(id),
            expected_keys(id).join(", ")
        ))),
    }
}

fn self_dirs(search: &ParamSearch) -> Vec<String> {
    search
        .dirs
        .iter()
        .map(|d| d.display().to_string())
        .collect()
}

/// Validate the parameter file of one model; `Ok` carries a short status.
pub fn check_params(search: &ParamSearch, id: &str) -> Result<String> {
    let model = load_model(search, id)?;
    // exercise the model once so bad values surface immediately
    let r = model.initial_state();
    let mut out = vec![0.0; model.dim()];
    model.rhs(&r, 0.5, 0.0, 0.0, &mut out)?;
    model.tension(&r, 0.0)?;
    model.stiffness(&r, 0.0)?;
    let source = search
        .resolve(id)
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "embedded defaults".to_string());
    Ok(format!("{id}: ok ({} state variables, {source})", model.dim()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::SchemeKind;

    #[test]
    fn parses_a_full_run_config() {
        let text = r#"
model = "MDM"
scheme = "stabilized-segregated"
dt = 1e-3
t_end = 1.0

[calcium]
kind = "transient"
c0 = 0.1
c_max = 1.6
t0 = 0.1
tau1 = 0.02
tau2 = 0.05

[load]
kind = "constant"
value = 0.0

[mech]
mass = 0.0
visc = 0.0
k_p = 1e6
potential = "quadratic"
"#;
        let cfg = parse_run_config(text).unwrap();
        assert_eq!(cfg.model, "MDM");
        assert_eq!(cfg.scheme, SchemeKind::StabilizedSegregated);
        assert_eq!(cfg.substep, 1);
        assert!(cfg.stepper.is_none());
    }

    #[test]
    fn rejects_unknown_fields() {
        let text = r#"
model = "MDM"
scheme = "monolithic"
dt = 1e-3
t_end = 1.0
typo_field = 3

[calcium]
kind = "constant"
value = 0.1

[load]
kind = "constant"
value = 0.0

[mech]
mass = 0.0
visc = 0.0
k_p = 1e6
potential = "quadratic"
"#;
        assert!(parse_run_config(text).is_err());
    }

    #[test]
    fn shipped_parameter_files_resolve_every_model() {
        let search = ParamSearch::new(vec![shipped_params_dir()]);
        for id in MODEL_IDS {
            let model = load_model(&search, id).unwrap();
            assert_eq!(model.id(), id);
            check_params(&search, id).unwrap();
        }
    }

    #[test]
    fn missing_zoo_params_report_expected_keys() {
        let search = ParamSearch::new(vec![PathBuf::from("/nonexistent")]);
        let err = match load_model(&search, "L17") {
            Err(e) => e.to_string(),
            Ok(_) => panic!("expected a missing-file error"),
        };
        assert!(err.contains("L17.toml"));
        assert!(err.contains("k_trpn"), "missing key list in: {err}");
        // the minimal model still builds from its embedded calibration
        assert!(load_model(&search, "MDM").is_ok());
    }
}
