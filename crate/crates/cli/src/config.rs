use std::f64::consts::PI;

use moire_core::harmonic::HarmonicMode;
use moire_core::singlewell::Stencil;
use moire_core::{EigMode, ModelParams};
use serde::{Deserialize, Serialize};

use crate::AppError;

/// Everything a run can be configured with. Absent keys take command defaults, so a
/// parsed config serialises back to exactly the keys that were given.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(rename = "U", skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,

    /// pointwise eigenvalues for landscape / wells
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<EigMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit_grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub landscape_n: Option<usize>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub gcut: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nbands: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kgrid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kpath: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kpath_n: Option<usize>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_list: Option<Vec<f64>>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agmon_n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stencil_radius: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_csv: Option<bool>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub harmonic_mode: Option<HarmonicMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nlevels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compare: Option<bool>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub well_n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub well_half_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub well_stencil: Option<Stencil>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nev: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub richardson: Option<bool>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub fourier_grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fourier_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Named parameter sets (α, β, U, φ, h). fig4 uses h = 1/9; reading it as "h = 9"
/// would leave the semiclassical regime entirely.
pub const PRESETS: [(&str, [Option<f64>; 5]); 10] = [
    ("p0", [Some(1.0), Some(1.0), Some(0.0), Some(4.0 * PI / 3.0), None]),
    ("fig1-a", [Some(1.0), Some(0.0), Some(2.0), Some(4.0 * PI / 3.0), None]),
    ("fig1-b", [Some(1.0), Some(5.0), Some(2.0), Some(4.0 * PI / 3.0), None]),
    ("fig1-c", [Some(1.0), Some(5.0), Some(0.0), Some(4.0 * PI / 3.0), None]),
    ("fig1-d", [Some(1.0), Some(0.0), Some(0.0), Some(4.0 * PI / 3.0), None]),
    ("fig2-a", [Some(1.0), Some(1.0), Some(0.0), Some(1.32), None]),
    ("fig2-b", [Some(1.0), Some(1.0), Some(0.0), Some(1.94), None]),
    ("fig2-c", [Some(1.0), Some(1.0), Some(0.0), Some(2.31), None]),
    ("fig4-a", [Some(1.0), Some(1.0 / 9.0), Some(0.0), Some(0.0), Some(1.0 / 9.0)]),
    ("fig4-b", [Some(1.0), Some(1.0 / 9.0), Some(0.0), Some(2.0 * PI / 3.0), Some(1.0 / 9.0)]),
];

pub fn parse_config(text: &str) -> Result<RunConfig, AppError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            AppError::Config(e.inner().to_string())
        } else {
            AppError::Config(format!("key `{path}`: {}", e.inner()))
        }
    })?;
    cfg.params()?;
    cfg.check()?;
    Ok(cfg)
}

fn positive<T: PartialOrd + Default + std::fmt::Display>(key: &str, v: Option<T>) -> Result<(), AppError> {
    match v {
        Some(x) if x <= T::default() => Err(AppError::Config(format!("{key} must be positive, got {x}"))),
        _ => Ok(()),
    }
}

impl RunConfig {
    /// Preset values overridden by explicit keys.
    pub fn params(&self) -> Result<ModelParams, AppError> {
        let mut base = [None; 5];
        if let Some(name) = &self.preset {
            base = PRESETS
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| AppError::Config(format!("key `preset`: unknown preset `{name}`")))?;
        }
        let given = [self.alpha, self.beta, self.u, self.phi, self.h];
        let keys = ["alpha", "beta", "U", "phi", "h"];
        let mut v = [0.0; 5];
        for i in 0..5 {
            v[i] = given[i].or(base[i]).ok_or_else(|| AppError::Config(format!("missing key `{}`", keys[i])))?;
        }
        let p = ModelParams { alpha: v[0], beta: v[1], u: v[2], phi: v[3], h: v[4] };
        p.validate().map_err(|e| AppError::Config(e.to_string()))?;
        Ok(p)
    }

    fn check(&self) -> Result<(), AppError> {
        positive("gcut", self.gcut)?;
        positive("nbands", self.nbands)?;
        positive("kgrid", self.kgrid)?;
        positive("kpath_n", self.kpath_n)?;
        positive("landscape_n", self.landscape_n)?;
        positive("agmon_n", self.agmon_n)?;
        positive("stencil_radius", self.stencil_radius)?;
        positive("nlevels", self.nlevels)?;
        positive("well_n", self.well_n)?;
        positive("well_half_width", self.well_half_width)?;
        positive("nev", self.nev)?;
        positive("fourier_grid", self.fourier_grid)?;
        if let Some(hs) = &self.h_list {
            if hs.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
                return Err(AppError::Config("h_list entries must be positive".into()));
            }
        }
        if let Some(e) = self.energy {
            if !e.is_finite() {
                return Err(AppError::Config("energy must be finite".into()));
            }
        }
        Ok(())
    }
}
