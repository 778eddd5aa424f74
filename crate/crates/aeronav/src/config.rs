//! Run configuration: model dimensions, environment parameters, loss
//! weights, augmentation, and optimizer settings, with two named profiles.
//!
//! The `desk` profile is sized so training runs and gradient checks finish
//! in seconds to minutes on one CPU core. The `paper` profile pins the
//! full-scale reference hyperparameters (d_model 768, layer counts 1/9/2,
//! learning rate 1e-5); it exists for configuration fidelity, not for
//! desk-scale execution.
//!
//! Files are flat `key = value` text. A `profile` key selects the base
//! (default `desk`); every other key overrides one field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Transformer and encoder dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_heads: usize,
    /// Cross-attention pooling blocks; the architecture uses exactly 1.
    pub n_mhca_layers: usize,
    pub n_text_layers: usize,
    pub n_gat_layers: usize,
    pub max_text_len: usize,
    /// Memory and step-encoding capacity per episode.
    pub max_steps: usize,
    /// Observation grid side length G.
    pub grid_g: usize,
    /// Observation channels (landmark classes + colors).
    pub channels: usize,
}

/// Synthetic world and flight parameters. Distances are meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub world_h: usize,
    pub world_w: usize,
    /// Meters per world cell.
    pub world_scale: f64,
    pub n_landmarks_min: usize,
    pub n_landmarks_max: usize,
    /// Episode cruise altitude.
    pub altitude: f64,
    /// Field of view in radians; footprint side = 2·z·tan(fov/2).
    pub fov: f64,
    /// Displacement cap per action.
    pub max_step: f64,
    /// A waypoint counts as reached within this distance.
    pub waypoint_radius: f64,
    pub z_min: f64,
    pub z_max: f64,
    /// Ground-truth trajectory length range, in steps to the target.
    pub route_steps_min: usize,
    pub route_steps_max: usize,
    /// Maximum extra dialog rounds prepended as history.
    pub history_rounds_max: usize,
}

/// Grounding (kappa) and multi-task (lambda) loss weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            kappa1: 1.0,
            kappa2: 3.0,
            kappa3: 1.5,
            lambda1: 0.2,
            lambda2: 0.1,
            lambda3: 0.25,
        }
    }
}

/// Observation augmentation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugConfig {
    /// Per-observation application probability.
    pub p: f64,
    pub noise_sigma: f64,
    pub blur_enabled: bool,
    pub contrast_lo: f64,
    pub contrast_hi: f64,
    pub dropout_rate: f64,
}

impl Default for AugConfig {
    fn default() -> Self {
        AugConfig {
            p: 0.4,
            noise_sigma: 0.05,
            blur_enabled: true,
            contrast_lo: 0.8,
            contrast_hi: 1.2,
            dropout_rate: 0.1,
        }
    }
}

/// Complete training-run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub profile: String,
    pub model: ModelConfig,
    pub env: EnvConfig,
    pub weights: LossWeights,
    pub aug: AugConfig,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_iterations: usize,
    /// Iterations between switching teacher and student forcing.
    pub alternation_period: usize,
    pub eval_interval: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// Small-dimension profile for one-core runs.
    pub fn desk() -> Self {
        TrainConfig {
            profile: "desk".to_string(),
            model: ModelConfig {
                d_model: 64,
                n_heads: 4,
                n_mhca_layers: 1,
                n_text_layers: 2,
                n_gat_layers: 2,
                max_text_len: 32,
                max_steps: 10,
                grid_g: 8,
                channels: 12,
            },
            env: EnvConfig {
                world_h: 48,
                world_w: 48,
                world_scale: 8.0,
                n_landmarks_min: 6,
                n_landmarks_max: 10,
                altitude: 40.0,
                fov: std::f64::consts::FRAC_PI_2,
                max_step: 40.0,
                waypoint_radius: 4.0,
                z_min: 10.0,
                z_max: 100.0,
                route_steps_min: 2,
                route_steps_max: 4,
                history_rounds_max: 2,
            },
            weights: LossWeights::default(),
            aug: AugConfig::default(),
            learning_rate: 1e-3,
            weight_decay: 0.0,
            batch_size: 4,
            max_iterations: 5_000,
            alternation_period: 1,
            eval_interval: 500,
            seed: 7,
        }
    }

    /// Full-scale reference hyperparameters; not intended to run at desk
    /// scale.
    pub fn paper() -> Self {
        let mut cfg = TrainConfig::desk();
        cfg.profile = "paper".to_string();
        cfg.model.d_model = 768;
        cfg.model.n_heads = 12;
        cfg.model.n_mhca_layers = 1;
        cfg.model.n_text_layers = 9;
        cfg.model.n_gat_layers = 2;
        cfg.learning_rate = 1e-5;
        cfg.batch_size = 4;
        cfg.max_iterations = 200_000;
        cfg.aug.p = 0.4;
        cfg
    }

    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(TrainConfig::desk()),
            "paper" => Ok(TrainConfig::paper()),
            other => Err(Error::Parse(format!("unknown profile {other}"))),
        }
    }

    /// Parse flat `key = value` text over a profile base. Blank lines and
    /// `#` comments are ignored; unknown keys are errors.
    pub fn from_str(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut profile = "desk".to_string();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected key = value, got {raw:?}", lineno + 1))
            })?;
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            if key == "profile" {
                profile = value;
            } else {
                pairs.push((key, value, lineno + 1));
            }
        }
        let mut cfg = TrainConfig::profile(&profile)?;
        for (key, value, lineno) in pairs {
            cfg.set(&key, &value)
                .map_err(|e| Error::Parse(format!("line {lineno}: {e}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serialize as flat `key = value` text that `from_str` reparses to an
    /// equal config.
    pub fn to_config_text(&self) -> String {
        let b = |v: bool| if v { "true" } else { "false" };
        format!(
            "profile = {}\n\
             d_model = {}\nn_heads = {}\nn_mhca_layers = {}\nn_text_layers = {}\n\
             n_gat_layers = {}\nmax_text_len = {}\nmax_steps = {}\ngrid_g = {}\nchannels = {}\n\
             world_h = {}\nworld_w = {}\nworld_scale = {}\nn_landmarks_min = {}\n\
             n_landmarks_max = {}\naltitude = {}\nfov = {}\nmax_step = {}\n\
             waypoint_radius = {}\nz_min = {}\nz_max = {}\nroute_steps_min = {}\n\
             route_steps_max = {}\nhistory_rounds_max = {}\n\
             kappa1 = {}\nkappa2 = {}\nkappa3 = {}\nlambda1 = {}\nlambda2 = {}\nlambda3 = {}\n\
             aug_p = {}\nnoise_sigma = {}\nblur_enabled = {}\ncontrast_lo = {}\n\
             contrast_hi = {}\ndropout_rate = {}\n\
             learning_rate = {}\nweight_decay = {}\nbatch_size = {}\nmax_iterations = {}\n\
             alternation_period = {}\neval_interval = {}\nseed = {}\n",
            self.profile,
            self.model.d_model,
            self.model.n_heads,
            self.model.n_mhca_layers,
            self.model.n_text_layers,
            self.model.n_gat_layers,
            self.model.max_text_len,
            self.model.max_steps,
            self.model.grid_g,
            self.model.channels,
            self.env.world_h,
            self.env.world_w,
            self.env.world_scale,
            self.env.n_landmarks_min,
            self.env.n_landmarks_max,
            self.env.altitude,
            self.env.fov,
            self.env.max_step,
            self.env.waypoint_radius,
            self.env.z_min,
            self.env.z_max,
            self.env.route_steps_min,
            self.env.route_steps_max,
            self.env.history_rounds_max,
            self.weights.kappa1,
            self.weights.kappa2,
            self.weights.kappa3,
            self.weights.lambda1,
            self.weights.lambda2,
            self.weights.lambda3,
            self.aug.p,
            self.aug.noise_sigma,
            b(self.aug.blur_enabled),
            self.aug.contrast_lo,
            self.aug.contrast_hi,
            self.aug.dropout_rate,
            self.learning_rate,
            self.weight_decay,
            self.batch_size,
            self.max_iterations,
            self.alternation_period,
            self.eval_interval,
            self.seed,
        )
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn u(v: &str) -> Result<usize> {
            v.parse().map_err(|_| Error::Parse(format!("expected unsigned integer, got {v:?}")))
        }
        fn f(v: &str) -> Result<f64> {
            v.parse().map_err(|_| Error::Parse(format!("expected number, got {v:?}")))
        }
        fn b(v: &str) -> Result<bool> {
            match v {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(Error::Parse(format!("expected true/false, got {v:?}"))),
            }
        }
        match key {
            "d_model" => self.model.d_model = u(value)?,
            "n_heads" => self.model.n_heads = u(value)?,
            "n_mhca_layers" => self.model.n_mhca_layers = u(value)?,
            "n_text_layers" => self.model.n_text_layers = u(value)?,
            "n_gat_layers" => self.model.n_gat_layers = u(value)?,
            "max_text_len" => self.model.max_text_len = u(value)?,
            "max_steps" => self.model.max_steps = u(value)?,
            "grid_g" => self.model.grid_g = u(value)?,
            "channels" => self.model.channels = u(value)?,
            "world_h" => self.env.world_h = u(value)?,
            "world_w" => self.env.world_w = u(value)?,
            "world_scale" => self.env.world_scale = f(value)?,
            "n_landmarks_min" => self.env.n_landmarks_min = u(value)?,
            "n_landmarks_max" => self.env.n_landmarks_max = u(value)?,
            "altitude" => self.env.altitude = f(value)?,
            "fov" => self.env.fov = f(value)?,
            "max_step" => self.env.max_step = f(value)?,
            "waypoint_radius" => self.env.waypoint_radius = f(value)?,
            "z_min" => self.env.z_min = f(value)?,
            "z_max" => self.env.z_max = f(value)?,
            "route_steps_min" => self.env.route_steps_min = u(value)?,
            "route_steps_max" => self.env.route_steps_max = u(value)?,
            "history_rounds_max" => self.env.history_rounds_max = u(value)?,
            "kappa1" => self.weights.kappa1 = f(value)?,
            "kappa2" => self.weights.kappa2 = f(value)?,
            "kappa3" => self.weights.kappa3 = f(value)?,
            "lambda1" => self.weights.lambda1 = f(value)?,
            "lambda2" => self.weights.lambda2 = f(value)?,
            "lambda3" => self.weights.lambda3 = f(value)?,
            "aug_p" => self.aug.p = f(value)?,
            "noise_sigma" => self.aug.noise_sigma = f(value)?,
            "blur_enabled" => self.aug.blur_enabled = b(value)?,
            "contrast_lo" => self.aug.contrast_lo = f(value)?,
            "contrast_hi" => self.aug.contrast_hi = f(value)?,
            "dropout_rate" => self.aug.dropout_rate = f(value)?,
            "learning_rate" => self.learning_rate = f(value)?,
            "weight_decay" => self.weight_decay = f(value)?,
            "batch_size" => self.batch_size = u(value)?,
            "max_iterations" => self.max_iterations = u(value)?,
            "alternation_period" => self.alternation_period = u(value)?,
            "eval_interval" => self.eval_interval = u(value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::Parse(format!("expected seed integer, got {value:?}")))?
            }
            other => return Err(Error::Parse(format!("unknown key {other}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if m.d_model == 0 || m.n_heads == 0 || m.d_model % m.n_heads != 0 {
            return Err(Error::Parse(format!(
                "n_heads {} must divide d_model {}",
                m.n_heads, m.d_model
            )));
        }
        if m.n_mhca_layers != 1 {
            return Err(Error::Parse("n_mhca_layers is pinned to 1".into()));
        }
        if m.max_text_len < 2 || m.max_steps == 0 || m.grid_g == 0 || m.channels == 0 {
            return Err(Error::Parse("model extents must be positive".into()));
        }
        let e = &self.env;
        if e.world_h < 16 || e.world_w < 16 {
            return Err(Error::Parse("world must be at least 16x16 cells".into()));
        }
        if e.n_landmarks_min < 2 || e.n_landmarks_max < e.n_landmarks_min {
            return Err(Error::Parse("need at least 2 landmarks and min <= max".into()));
        }
        if !(e.world_scale > 0.0 && e.altitude > 0.0 && e.max_step > 0.0) {
            return Err(Error::Parse("scales and steps must be positive".into()));
        }
        if !(e.fov > 0.0 && e.fov < std::f64::consts::PI) {
            return Err(Error::Parse("fov must be in (0, pi)".into()));
        }
        if !(e.z_min > 0.0 && e.z_min <= e.altitude && e.altitude <= e.z_max) {
            return Err(Error::Parse("altitude must lie within [z_min, z_max]".into()));
        }
        if e.route_steps_min == 0
            || e.route_steps_max < e.route_steps_min
            || e.route_steps_max + 1 > m.max_steps
        {
            return Err(Error::Parse(
                "route steps must fit max_steps with room for the stop step".into(),
            ));
        }
        let w = &self.weights;
        for (name, v) in [
            ("kappa1", w.kappa1),
            ("kappa2", w.kappa2),
            ("kappa3", w.kappa3),
            ("lambda1", w.lambda1),
            ("lambda2", w.lambda2),
            ("lambda3", w.lambda3),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Parse(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.aug.p) {
            return Err(Error::Parse(format!("aug_p must be in [0,1], got {}", self.aug.p)));
        }
        if !(0.0..=1.0).contains(&self.aug.dropout_rate) {
            return Err(Error::Parse("dropout_rate must be in [0,1]".into()));
        }
        if !(self.aug.contrast_lo > 0.0 && self.aug.contrast_hi >= self.aug.contrast_lo) {
            return Err(Error::Parse("contrast range must be positive and ordered".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::Parse("learning_rate > 0 and weight_decay >= 0 required".into()));
        }
        if self.batch_size == 0 || self.alternation_period == 0 || self.eval_interval == 0 {
            return Err(Error::Parse("batch, alternation, and eval sizes must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_loss_weights_are_the_reference_values() {
        let w = LossWeights::default();
        assert_eq!((w.kappa1, w.kappa2, w.kappa3), (1.0, 3.0, 1.5));
        assert_eq!((w.lambda1, w.lambda2, w.lambda3), (0.2, 0.1, 0.25));
        let cfg = TrainConfig::desk();
        assert_eq!(cfg.weights, LossWeights::default());
        assert_eq!(TrainConfig::paper().weights, LossWeights::default());
    }

    #[test]
    fn paper_profile_pins_reference_hyperparameters() {
        let cfg = TrainConfig::paper();
        assert_eq!(cfg.model.d_model, 768);
        assert_eq!(cfg.model.n_mhca_layers, 1);
        assert_eq!(cfg.model.n_text_layers, 9);
        assert_eq!(cfg.model.n_gat_layers, 2);
        assert_eq!(cfg.learning_rate, 1e-5);
        assert_eq!(cfg.batch_size, 4);
        assert_eq!(cfg.aug.p, 0.4);
        cfg.validate().unwrap();
    }

    #[test]
    fn desk_profile_is_valid_and_small() {
        let cfg = TrainConfig::desk();
        cfg.validate().unwrap();
        assert_eq!(cfg.model.d_model, 64);
        assert_eq!(cfg.model.n_text_layers, 2);
        assert_eq!(cfg.batch_size, 4);
        assert_eq!(cfg.aug.p, 0.4);
    }

    #[test]
    fn parse_applies_overrides_over_profile() {
        let cfg = TrainConfig::from_str(
            "# comment\nprofile = desk\nd_model = 32\nlearning_rate = 0.01\nseed = 99\n",
        )
        .unwrap();
        assert_eq!(cfg.model.d_model, 32);
        assert_eq!(cfg.learning_rate, 0.01);
        assert_eq!(cfg.seed, 99);
        // untouched fields keep profile values
        assert_eq!(cfg.model.grid_g, 8);

        let paper = TrainConfig::from_str("profile = paper\n").unwrap();
        assert_eq!(paper, TrainConfig::paper());
        // omitting kappa/lambda keeps the reference defaults
        assert_eq!(paper.weights, LossWeights::default());
    }

    #[test]
    fn parse_rejects_malformed_input() {
        assert!(TrainConfig::from_str("profile = nope\n").is_err());
        assert!(TrainConfig::from_str("d_model\n").is_err());
        assert!(TrainConfig::from_str("mystery_key = 5\n").is_err());
        assert!(TrainConfig::from_str("d_model = many\n").is_err());
        assert!(TrainConfig::from_str("aug_p = 1.5\n").is_err());
        assert!(TrainConfig::from_str("n_heads = 3\n").is_err());
        assert!(TrainConfig::from_str("world_h = 4\n").is_err());
        assert!(TrainConfig::from_str("n_mhca_layers = 2\n").is_err());
    }

    #[test]
    fn config_text_round_trips() {
        let mut cfg = TrainConfig::desk();
        cfg.model.d_model = 16;
        cfg.model.n_heads = 2;
        cfg.weights.kappa2 = 2.5;
        cfg.seed = 1234;
        let reparsed = TrainConfig::from_str(&cfg.to_config_text()).unwrap();
        assert_eq!(cfg, reparsed);
    }

    #[test]
    fn json_round_trips() {
        let cfg = TrainConfig::desk();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: TrainConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
    }
}
