//! Run configuration read from TOML. Every section is optional; missing keys
//! take the defaults below and the resolved file is archived with the run.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lcflow::solver::SchemeConfig;
use lcflow::{Grid, PhysicalConstants};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridSection,
    pub constants: ConstantsSection,
    pub data: DataSection,
    pub scheme: SchemeSection,
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub dim: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "L")]
    pub l: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { dim: 2, m: 64, l: 2.0 * std::f64::consts::PI }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantsSection {
    pub nu: f64,
    pub lambda: f64,
    pub gamma: f64,
}

impl Default for ConstantsSection {
    fn default() -> Self {
        Self { nu: 1.0, lambda: 1.0, gamma: 1.0 }
    }
}

/// Either a built-in scenario or three snapshot files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub scenario: Option<String>,
    /// Mode number for `stationary_director`.
    pub m: u32,
    /// Target smallness for `random_small`.
    pub eta: f64,
    pub seed: u64,
    pub a0: Option<PathBuf>,
    pub u0: Option<PathBuf>,
    pub d0: Option<PathBuf>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self { scenario: Some("stationary_director".into()), m: 1, eta: 0.01, seed: 1, a0: None, u0: None, d0: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeSection {
    pub r: f64,
    pub p: Option<f64>,
    #[serde(rename = "T")]
    pub t: f64,
    pub dt: Option<f64>,
    pub tol: f64,
    pub n_max: usize,
    pub c0: f64,
    pub normalize_director: bool,
    /// Run even when the data violate the smallness condition.
    pub allow_large_data: bool,
}

impl Default for SchemeSection {
    fn default() -> Self {
        let s = SchemeConfig::default();
        Self {
            r: s.r,
            p: s.p,
            t: s.t_end,
            dt: s.dt,
            tol: s.tol,
            n_max: s.n_max,
            c0: s.c0,
            normalize_director: s.normalize_director,
            allow_large_data: s.warn_only,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    /// Write every `stride`-th time level.
    pub stride: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: PathBuf::from("out"), stride: 1 }
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        bail!("{key}: must be a positive number, got {v}");
    }
    Ok(())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| anyhow::anyhow!("{}", e.to_string().trim_end()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))?;
        // snapshot paths are relative to the config file
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data.a0, &mut cfg.data.u0, &mut cfg.data.d0].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.dim != 2 && g.dim != 3 {
            bail!("grid.dim: must be 2 or 3, got {}", g.dim);
        }
        if g.m < 4 || g.m % 2 != 0 {
            bail!("grid.M: must be even and at least 4, got {}", g.m);
        }
        positive("grid.L", g.l)?;
        positive("constants.nu", self.constants.nu)?;
        positive("constants.lambda", self.constants.lambda)?;
        positive("constants.gamma", self.constants.gamma)?;
        let s = &self.scheme;
        if !(s.r > 1.0) {
            bail!("scheme.r: must exceed 1, got {}", s.r);
        }
        if let Some(p) = s.p {
            positive("scheme.p", p)?;
        }
        positive("scheme.T", s.t)?;
        if let Some(dt) = s.dt {
            positive("scheme.dt", dt)?;
        }
        positive("scheme.tol", s.tol)?;
        positive("scheme.c0", s.c0)?;
        if s.n_max == 0 {
            bail!("scheme.n_max: must be at least 1");
        }
        self.scheme().steps().map_err(|e| anyhow::anyhow!("scheme.dt: {e}"))?;
        if self.output.stride == 0 {
            bail!("output.stride: must be at least 1");
        }
        let d = &self.data;
        let files = [&d.a0, &d.u0, &d.d0].iter().filter(|p| p.is_some()).count();
        match (&d.scenario, files) {
            (_, 1 | 2) => bail!("data.a0/u0/d0: give all three snapshot paths or none"),
            (None, 0) => bail!("data.scenario: required when no snapshot paths are given"),
            (Some(name), 0) if !SCENARIOS.contains(&name.as_str()) => {
                bail!("data.scenario: unknown scenario {name:?} (expected one of {})", SCENARIOS.join(", "))
            }
            _ => {}
        }
        if d.m == 0 {
            bail!("data.m: must be at least 1");
        }
        positive("data.eta", d.eta)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Ok(Grid::new(self.grid.dim, self.grid.m, self.grid.l)?)
    }

    pub fn constants(&self) -> Result<PhysicalConstants> {
        let c = &self.constants;
        Ok(PhysicalConstants::new(c.nu, c.lambda, c.gamma)?)
    }

    pub fn scheme(&self) -> SchemeConfig {
        let s = &self.scheme;
        SchemeConfig {
            r: s.r,
            p: s.p,
            t_end: s.t,
            dt: s.dt,
            tol: s.tol,
            n_max: s.n_max,
            c0: s.c0,
            warn_only: s.allow_large_data,
            normalize_director: s.normalize_director,
            ..SchemeConfig::default()
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }
}

pub const SCENARIOS: [&str; 5] = ["zero", "stationary_director", "taylor_green", "mixture_step_density", "random_small"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(RunConfig::parse(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn errors_name_the_key() {
        let cases = [
            ("[grid]\nM = 63\n", "grid.M"),
            ("[scheme]\ntol = -1.0\n", "scheme.tol"),
            ("[scheme]\nT = 1.0\ndt = 0.3\n", "scheme.dt"),
            ("[data]\nscenario = \"nope\"\n", "data.scenario"),
            ("[scheme]\ntoll = 1e-3\n", "toll"),
            ("[grid]\nM = \"big\"\n", "M"),
            ("[data]\nu0 = \"u.elf\"\n", "data.a0/u0/d0"),
        ];
        for (text, key) in cases {
            let e = format!("{:#}", RunConfig::parse(text).unwrap_err());
            assert!(e.contains(key), "{text:?}: {e}");
        }
    }
}
