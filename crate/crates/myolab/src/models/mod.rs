//! The force-generation model zoo and its registry.
//!
//! Models are keyed by the abbreviations used throughout: `MDM` (minimal
//! distribution-moments model, parameters embedded), `NHS06`, `L17` and
//! `RDQ20-MF` (parameters loaded from per-model files).

pub mod l17;
pub mod nhs06;
pub mod rdq20;

pub use l17::{L17Model, L17Params};
pub use nhs06::{Nhs06Model, Nhs06Params};
pub use rdq20::{CooperativeLawParams, CooperativeRateLaw, Rdq20Model, Rdq20Params, Rdq20RateLaw};

use crate::activation::{ForceModel, MinimalModel, MinimalModelParams};
use crate::error::{Error, Result};

/// Registry identifiers, in presentation order.
pub const MODEL_IDS: [&str; 4] = ["MDM", "NHS06", "L17", "RDQ20-MF"];

/// Build a model from its identifier and an optional TOML parameter document.
///
/// Without a document the built-in defaults are used. Parameter files carry
/// one section named after the model (lowercased, `-` replaced by `_`).
pub fn build_model(id: &str, params_toml: Option<&str>) -> Result<Box<dyn ForceModel>> {
    match id {
        "MDM" => {
            let params = match params_toml {
                Some(doc) => parse_section::<MinimalModelParams>(doc, "mdm")?,
                None => MinimalModelParams::default(),
            };
            Ok(Box::new(MinimalModel::new(params)?))
        }
        "NHS06" => {
            let params = match params_toml {
                Some(doc) => parse_section::<Nhs06Params>(doc, "nhs06")?,
                None => Nhs06Params::default(),
            };
            Ok(Box::new(Nhs06Model::new(params)?))
        }
        "L17" => {
            let params = match params_toml {
                Some(doc) => parse_section::<L17Params>(doc, "l17")?,
                None => L17Params::default(),
            };
            Ok(Box::new(L17Model::new(params)?))
        }
        "RDQ20-MF" => {
            let params = match params_toml {
                Some(doc) => parse_section::<Rdq20Params>(doc, "rdq20_mf")?,
                None => Rdq20Params::default(),
            };
            Ok(Box::new(Rdq20Model::new(params)?))
        }
        other => Err(Error::Config(format!(
            "unknown model id '{other}' (known: {})",
            MODEL_IDS.join(", ")
        ))),
    }
}

/// Section name a model's parameter file must carry.
pub fn section_name(id: &str) -> String {
    id.to_ascii_lowercase().replace('-', "_")
}

fn parse_section<T: serde::de::DeserializeOwned>(doc: &str, section: &str) -> Result<T> {
    let value: toml::Value = toml::from_str(doc)
        .map_err(|e| Error::Config(format!("parameter file is not valid TOML: {e}")))?;
    let table = value
        .get(section)
        .ok_or_else(|| Error::Config(format!("parameter file is missing the [{section}] section")))?;
    table
        .clone()
        .try_into()
        .map_err(|e| Error::Config(format!("bad [{section}] parameters: {e}")))
}

/// Documented key list of a model's parameter file, for diagnostics.
pub fn expected_keys(id: &str) -> Vec<&'static str> {
    match id {
        "MDM" => vec!["mu0_f", "mu1_f", "r", "a_xb"],
        "NHS06" => vec![
            "k_on",
            "k_off",
            "ca_trpn_max",
            "gamma_trpn",
            "t_ref",
            "alpha_0",
            "alpha_r1",
            "alpha_r2",
            "n_hill",
            "n_rel",
            "k_z",
            "ca50_ref",
            "beta_0",
            "beta_1",
            "k1",
            "k2",
            "a_curv",
            "a_weights",
            "alpha_rates",
        ],
        "L17" => vec![
            "k_trpn", "n_trpn", "ca50_ref", "beta_1", "k_b", "k_u", "k_uw", "k_wu", "k_ws",
            "k_su", "n_tm", "gamma_w", "gamma_s", "a_w", "a_s", "c_w", "c_s", "t_ref", "r_s",
            "beta_0",
        ],
        "RDQ20-MF" => vec![
            "r0", "alpha_vel", "a_xb", "mu0_fp", "mu1_fp", "dt_ru", "law",
        ],
        _ => vec![],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_builds_every_model_with_defaults() {
        for id in MODEL_IDS {
            let m = build_model(id, None).unwrap();
            assert_eq!(m.id(), id);
            assert_eq!(m.initial_state().len(), m.dim());
            // fully inactive default states generate no force
            let t = m.tension(&m.initial_state(), 0.0).unwrap();
            assert_eq!(t, 0.0, "{id} should be force-free at its initial state");
        }
        assert!(build_model("H57", None).is_err());
    }

    #[test]
    fn parses_parameter_sections() {
        let doc = "[mdm]\nmu0_f = 100.0\nmu1_f = 2.0\nr = 500.0\na_xb = 1.0e7\n";
        let m = build_model("MDM", Some(doc)).unwrap();
        assert!((m.tension(&[0.0, 1.0], 0.0).unwrap() - 1.0e7).abs() < 1.0);

        let missing = "[wrong]\nx = 1\n";
        assert!(build_model("MDM", Some(missing)).is_err());
    }
}
