//! Tolerance resolution: built-in defaults, then a named profile, then a
//! config file, then individual flags. Later sources win.

use std::path::Path;

use momentforge::Tolerances;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const PROFILE_ENV: &str = "MOMENTFORGE_TOL_PROFILE";

/// Contents of a `--tol-config` file. Every field is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolFile {
    pub profile: Option<String>,
    pub rank_rtol: Option<f64>,
    pub psd_atol: Option<f64>,
    pub eq_atol: Option<f64>,
}

/// Explicit per-field overrides from the command line.
#[derive(Clone, Copy, Debug, Default)]
pub struct TolFlags {
    pub rank_rtol: Option<f64>,
    pub psd_atol: Option<f64>,
    pub eq_atol: Option<f64>,
}

/// The tolerances in effect and where each layer came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub tolerances: Tolerances,
    pub profile: String,
    pub config_file: Option<String>,
    pub overridden: Vec<String>,
}

fn preset(name: &str) -> Result<Tolerances, CliError> {
    Tolerances::preset(name).ok_or_else(|| {
        CliError::Usage(format!("unknown tolerance profile {name:?} (expected default, strict or loose)"))
    })
}

pub fn resolve(profile: Option<&str>, file: Option<&Path>, flags: TolFlags) -> Result<Resolved, CliError> {
    let parsed: TolFile = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("bad tolerance config {}: {e}", path.display())))?
        }
        None => TolFile::default(),
    };
    // A profile named on the command line or in the environment outranks the
    // one in the file, matching "flags win".
    let profile = profile.map(str::to_owned).or(parsed.profile.clone()).unwrap_or_else(|| "default".to_owned());
    let mut tol = preset(&profile)?;
    let mut overridden = Vec::new();
    let layers = [
        ("config", parsed.rank_rtol, parsed.psd_atol, parsed.eq_atol),
        ("flag", flags.rank_rtol, flags.psd_atol, flags.eq_atol),
    ];
    for (source, rank, psd, eq) in layers {
        for (name, value, slot) in [
            ("rank_rtol", rank, &mut tol.rank_rtol),
            ("psd_atol", psd, &mut tol.psd_atol),
            ("eq_atol", eq, &mut tol.eq_atol),
        ] {
            if let Some(v) = value {
                *slot = v;
                overridden.retain(|o: &String| !o.starts_with(name));
                overridden.push(format!("{name} ({source})"));
            }
        }
    }
    tol.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(Resolved { tolerances: tol, profile, config_file: file.map(|p| p.display().to_string()), overridden })
}
