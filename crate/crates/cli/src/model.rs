use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use reachset::chloroform::RateSet;
use reachset::dynamics::{AffineGenerator, GeneratorJson, GeneratorOptions};
use reachset::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Chloroform,
}

/// Where the generator comes from. With none given the chloroform preset is used.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Built-in model.
    #[arg(long, value_enum, conflicts_with_all = ["gen", "rates"])]
    pub preset: Option<Preset>,
    /// Generator JSON `{n, H, R, r_eq}`.
    #[arg(long, conflicts_with = "rates")]
    pub gen: Option<PathBuf>,
    /// Two-spin rates JSON `{r, J_hz, eps_C, eps_H}`.
    #[arg(long)]
    pub rates: Option<PathBuf>,
}

/// A loaded model. `rates` is known unless the generator was read directly.
pub struct Model {
    pub gen: AffineGenerator,
    pub rates: Option<RateSet>,
}

pub fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(Error::Validation(format!("input file {} does not exist", path.display())));
    }
    Ok(())
}

pub fn require_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => {
            Err(Error::Validation(format!("output directory {} does not exist", p.display())))
        }
        _ => Ok(()),
    }
}

pub fn read_rates(path: &Path) -> Result<RateSet> {
    require_file(path)?;
    RateSet::from_json_str(&std::fs::read_to_string(path)?)
}

impl ModelArgs {
    pub fn load(&self, epsilon: f64) -> Result<Model> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::Validation(format!("--epsilon must be positive, got {epsilon}")));
        }
        let (gen, rates) = if let Some(path) = &self.gen {
            require_file(path)?;
            let json: GeneratorJson = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            (AffineGenerator::from_json(&json, GeneratorOptions::default())?, None)
        } else {
            let rates = match &self.rates {
                Some(path) => read_rates(path)?,
                None => RateSet::default(),
            };
            (rates.assemble()?, Some(rates))
        };
        gen.require_contractive()?;
        let gen = if epsilon == 1.0 { gen } else { gen.scaled_equilibrium(epsilon) };
        Ok(Model { gen, rates })
    }
}
