use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{TylerConfig, TylerInit};
use crate::linalg::{hermitian_toeplitz, CMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Fig1,
    Fig2,
    ValidateSfim,
    ValidateSscrb,
}

impl Experiment {
    /// Tag mixed into every per-run seed.
    pub fn id(self) -> u64 {
        match self {
            Experiment::Fig1 => 1,
            Experiment::Fig2 => 2,
            Experiment::ValidateSfim => 3,
            Experiment::ValidateSscrb => 4,
        }
    }
}

pub const DEFAULT_LAMBDA_GRID: [f64; 10] = [2.0, 2.5, 3.0, 4.0, 5.0, 7.0, 10.0, 20.0, 50.0, 100.0];
pub const DEFAULT_SEED: u64 = 20_180_917;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TylerInitSetting {
    Identity,
    Scm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TylerSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub init: TylerInitSetting,
}

impl Default for TylerSettings {
    fn default() -> Self {
        let d = TylerConfig::default();
        Self {
            tol: d.tol,
            max_iter: d.max_iter,
            init: TylerInitSetting::Identity,
        }
    }
}

impl TylerSettings {
    pub fn to_config(&self) -> TylerConfig {
        TylerConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            init: match self.init {
                TylerInitSetting::Identity => TylerInit::Identity,
                TylerInitSetting::Scm => TylerInit::Scm,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MusicSettings {
    pub grid_size: usize,
    pub refine: bool,
    pub refine_tolerance: f64,
}

impl Default for MusicSettings {
    fn default() -> Self {
        let d = crate::doa::MusicConfig::default();
        Self {
            grid_size: d.grid_size,
            refine: d.refine,
            refine_tolerance: d.refine_tolerance,
        }
    }
}

impl MusicSettings {
    pub fn to_config(&self) -> crate::doa::MusicConfig {
        crate::doa::MusicConfig {
            grid_size: self.grid_size,
            refine: self.refine,
            refine_tolerance: self.refine_tolerance,
        }
    }
}

/// Full description of one experiment. Every field is echoed into the JSON
/// sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n: usize,
    pub l: usize,
    pub lambda_grid: Vec<f64>,
    pub runs: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    /// Fig. 1 Toeplitz correlation `ρ = |ρ| e^{j2π·phase}`.
    pub rho_magnitude: f64,
    pub rho_phase_cycles: f64,
    /// Fig. 1 data power `E{Q}/N`.
    pub data_power: f64,
    /// Fig. 2 source frequency.
    pub nu0: f64,
    pub sigma2: f64,
    /// Per-element SNR `γ²/σ²` in dB.
    pub snr_db: f64,
    pub music: MusicSettings,
    pub tyler: TylerSettings,
    /// Sampling shape for SFIM validation when it should differ from the
    /// shape used to evaluate the scores (negative control).
    pub sample_lambda: Option<f64>,
    /// Relative error threshold reported by the SFIM validation.
    pub sfim_threshold: f64,
    /// Relative error threshold reported by the SSCRB validation.
    pub sscrb_threshold: f64,
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let base = Self {
            experiment,
            n: 8,
            l: 24,
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            runs: 10_000,
            seed: DEFAULT_SEED,
            output: None,
            threads: None,
            rho_magnitude: 0.8,
            rho_phase_cycles: 0.2,
            data_power: 4.0,
            nu0: 0.3,
            sigma2: 1.0,
            snr_db: 0.0,
            music: MusicSettings::default(),
            tyler: TylerSettings::default(),
            sample_lambda: None,
            sfim_threshold: 0.02,
            sscrb_threshold: 1e-9,
        };
        match experiment {
            Experiment::Fig1 | Experiment::Fig2 => base,
            Experiment::ValidateSfim => Self {
                n: 4,
                lambda_grid: vec![3.0],
                runs: 100_000,
                ..base
            },
            Experiment::ValidateSscrb => Self {
                lambda_grid: vec![2.0, 3.0, 5.0, 10.0, 100.0],
                runs: 100,
                ..base
            },
        }
    }

    /// Overlays the fields present in a TOML document onto the defaults of
    /// `experiment`.
    pub fn from_toml(experiment: Experiment, text: &str) -> Result<Self> {
        let overrides: ConfigOverrides = toml::from_str(text)?;
        if let Some(e) = overrides.experiment {
            if e != experiment {
                return Err(Error::Config(format!(
                    "config file is for {e:?}, but {experiment:?} was requested"
                )));
            }
        }
        let cfg = overrides.apply(Self::defaults(experiment));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_file(experiment: Experiment, path: &Path) -> Result<Self> {
        Self::from_toml(experiment, &std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n < 2 {
            return fail(format!("n must be at least 2, got {}", self.n));
        }
        if self.runs < 100 {
            return fail(format!("runs must be at least 100, got {}", self.runs));
        }
        if matches!(self.experiment, Experiment::Fig1 | Experiment::Fig2) && self.l <= self.n {
            return fail(format!("Tyler experiments need L > N, got L = {}, N = {}", self.l, self.n));
        }
        if self.l == 0 {
            return fail("l must be positive".into());
        }
        if self.lambda_grid.is_empty() {
            return fail("lambda_grid is empty".into());
        }
        if let Some(bad) = self
            .lambda_grid
            .iter()
            .chain(self.sample_lambda.iter())
            .find(|&&x| !(x > 1.0) || !x.is_finite())
        {
            return fail(format!("shape parameters must satisfy 1 < λ < ∞, got {bad}"));
        }
        if self.threads == Some(0) {
            return fail("threads must be at least 1".into());
        }
        if !(self.rho_magnitude >= 0.0 && self.rho_magnitude < 1.0) {
            return fail(format!("|ρ| must lie in [0, 1), got {}", self.rho_magnitude));
        }
        if !(self.data_power > 0.0) || !(self.sigma2 > 0.0) {
            return fail("data_power and sigma2 must be positive".into());
        }
        if !(-0.5..0.5).contains(&self.nu0) {
            return fail(format!("nu0 must lie in [-0.5, 0.5), got {}", self.nu0));
        }
        if !self.snr_db.is_finite() {
            return fail("snr_db must be finite".into());
        }
        if self.music.grid_size < 3 || !(self.music.refine_tolerance > 0.0) {
            return fail("invalid MUSIC settings".into());
        }
        self.tyler.to_config().validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.sfim_threshold > 0.0) || !(self.sscrb_threshold > 0.0) {
            return fail("thresholds must be positive".into());
        }
        Ok(())
    }

    pub fn rho(&self) -> C64 {
        C64::from_polar(self.rho_magnitude, 2.0 * PI * self.rho_phase_cycles)
    }

    /// Hermitian Toeplitz `Σ₀` with first column `[1, ρ, …, ρ^{N−1}]`;
    /// its trace is N.
    pub fn toeplitz_scatter(&self) -> CMatrix {
        let rho = self.rho();
        let col: Vec<C64> = (0..self.n).map(|k| rho.powu(k as u32)).collect();
        hermitian_toeplitz(&col)
    }

    /// `γ² = σ² · 10^{SNR/10}`.
    pub fn source_power(&self) -> f64 {
        self.sigma2 * 10f64.powf(self.snr_db / 10.0)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigOverrides {
    experiment: Option<Experiment>,
    n: Option<usize>,
    l: Option<usize>,
    lambda_grid: Option<Vec<f64>>,
    runs: Option<usize>,
    seed: Option<u64>,
    output: Option<PathBuf>,
    threads: Option<usize>,
    rho_magnitude: Option<f64>,
    rho_phase_cycles: Option<f64>,
    data_power: Option<f64>,
    nu0: Option<f64>,
    sigma2: Option<f64>,
    snr_db: Option<f64>,
    music: Option<MusicSettings>,
    tyler: Option<TylerSettings>,
    sample_lambda: Option<f64>,
    sfim_threshold: Option<f64>,
    sscrb_threshold: Option<f64>,
}

impl ConfigOverrides {
    fn apply(self, mut c: ExperimentConfig) -> ExperimentConfig {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        set!(n, l, lambda_grid, runs, seed, rho_magnitude, rho_phase_cycles, data_power, nu0, sigma2, snr_db, music, tyler, sfim_threshold, sscrb_threshold);
        if self.output.is_some() {
            c.output = self.output;
        }
        if self.threads.is_some() {
            c.threads = self.threads;
        }
        if self.sample_lambda.is_some() {
            c.sample_lambda = self.sample_lambda;
        }
        c
    }
}
