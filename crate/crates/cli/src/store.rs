//! Trajectory directories: `trajectory.toml` plus one snapshot file per field
//! and stored level under `snapshots/`.

use std::path::Path;

use anyhow::{bail, Context, Result};
use lcflow::solver::{StateSnapshot, Trajectory};
use lcflow::spectral::snapshot;
use lcflow::PhysicalConstants;
use serde::{Deserialize, Serialize};

pub const MANIFEST: &str = "trajectory.toml";
const FIELDS: [&str; 4] = ["a", "u", "d", "grad_pi"];

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    iteration: usize,
    constants: PhysicalConstants,
    /// Indices into the solver's time grid of the stored levels.
    levels: Vec<usize>,
}

fn file_name(field: &str, level: usize) -> String {
    format!("{field}_{level:05}.elf")
}

pub fn save(dir: &Path, traj: &Trajectory, stride: usize) -> Result<()> {
    let snaps = dir.join("snapshots");
    std::fs::create_dir_all(&snaps).with_context(|| format!("creating {}", snaps.display()))?;
    // uniform subsampling keeps the stored trajectory on a uniform grid
    let levels: Vec<usize> = (0..traj.snapshots().len()).step_by(stride.max(1)).collect();
    for &k in &levels {
        let s = &traj.snapshots()[k];
        for (name, f) in FIELDS.iter().zip([&s.a, &s.u, &s.d, &s.grad_pi]) {
            snapshot::write(snaps.join(file_name(name, k)), f, s.time)?;
        }
    }
    let manifest = Manifest { iteration: traj.iteration, constants: traj.constants(), levels };
    std::fs::write(dir.join(MANIFEST), toml::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn load(dir: &Path) -> Result<Trajectory> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let m: Manifest = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if m.levels.is_empty() {
        bail!("{}: no stored levels", path.display());
    }
    let mut snaps = Vec::with_capacity(m.levels.len());
    for &k in &m.levels {
        let mut fields = Vec::with_capacity(4);
        let mut time = 0.0;
        for name in FIELDS {
            let p = dir.join("snapshots").join(file_name(name, k));
            let (f, t) = snapshot::read(&p).with_context(|| format!("reading {}", p.display()))?;
            time = t;
            fields.push(f);
        }
        let mut it = fields.into_iter();
        snaps.push(StateSnapshot {
            time,
            a: it.next().unwrap(),
            u: it.next().unwrap(),
            d: it.next().unwrap(),
            grad_pi: it.next().unwrap(),
            constants: m.constants,
        });
    }
    Ok(Trajectory::new(snaps, m.iteration)?)
}
