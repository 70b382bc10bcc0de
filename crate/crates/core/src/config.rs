//! Run configuration: a TOML file with `[data]`, `[costs]`, `[signals]`,
//! `[rl]`, `[ensemble]` and `[run]` sections. Every key has a default and
//! unknown keys are rejected.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{KdjParams, RsiParams, StrategyKind};
use crate::coordinator::EngineParams;
use crate::ensemble::{RetrainSchedule, TrainingSettings};
use crate::metrics::{regime_preset, RegimeWindow, TRADING_DAYS};
use crate::portfolio::{CostModel, MarkModel};
use crate::rl::approximator::ArchDescriptor;
use crate::rl::{Hyperparams, LearnerKind};
use crate::signals::RegimeParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    /// Directory holding the four CSV feeds, relative to the config file.
    pub dir: PathBuf,
    pub bars: String,
    pub options: String,
    pub sentiment: String,
    pub vix: String,
    /// Reject the run when the sentiment or VIX feed is empty.
    pub require_signals: bool,
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("data"),
            bars: "bars.csv".into(),
            options: "options.csv".into(),
            sentiment: "sentiment.csv".into(),
            vix: "vix.csv".into(),
            require_signals: false,
            start: None,
            end: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostsSection {
    pub equity_rate: f64,
    pub option_fixed_per_contract: f64,
    pub option_prop_rate: f64,
    pub multiplier: u32,
}

impl Default for CostsSection {
    fn default() -> Self {
        let c = CostModel::default();
        Self {
            equity_rate: c.equity_rate,
            option_fixed_per_contract: c.option_fixed_per_contract,
            option_prop_rate: c.option_prop_rate,
            multiplier: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalsSection {
    pub w_f: f64,
    pub w_s: f64,
    pub tanh_scale: f64,
    pub use_vix: bool,
    pub w_v: f64,
    pub kdj_period: usize,
    pub kdj_k_smooth: usize,
    pub kdj_d_smooth: usize,
    pub rsi_period: usize,
    pub rsi_upper: f64,
    pub rsi_lower: f64,
}

impl Default for SignalsSection {
    fn default() -> Self {
        let r = RegimeParams::default();
        let k = KdjParams::default();
        let s = RsiParams::default();
        Self {
            w_f: r.w_f,
            w_s: r.w_s,
            tanh_scale: r.tanh_scale,
            use_vix: r.use_vix,
            w_v: r.w_v,
            kdj_period: k.period,
            kdj_k_smooth: k.k_smooth,
            kdj_d_smooth: k.d_smooth,
            rsi_period: s.period,
            rsi_upper: s.upper,
            rsi_lower: s.lower,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RlSection {
    /// Environment steps per training job.
    pub timesteps: usize,
    pub trader_learner: String,
    pub sharpe_window: usize,
    pub risk_free_annual: f64,
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub clip: f64,
    pub gae_lambda: f64,
    pub learning_rate: f64,
    pub rollout_len: usize,
    pub epochs: usize,
    pub batch: usize,
    pub n_steps: usize,
    pub replay: usize,
    pub tau: f64,
    pub exploration_sigma: f64,
    pub learning_starts: usize,
    pub vf_coef: f64,
    pub max_grad_norm: f64,
    pub init_log_std: f64,
}

impl Default for RlSection {
    fn default() -> Self {
        let h = Hyperparams::default();
        Self {
            timesteps: 20_000,
            trader_learner: LearnerKind::ClippedPg.as_str().into(),
            sharpe_window: 60,
            risk_free_annual: 0.0,
            hidden: h.hidden,
            gamma: h.gamma,
            clip: h.clip,
            gae_lambda: h.gae_lambda,
            learning_rate: h.learning_rate,
            rollout_len: h.rollout_len,
            epochs: h.epochs,
            batch: h.batch,
            n_steps: h.n_steps,
            replay: h.replay,
            tau: h.tau,
            exploration_sigma: h.exploration_sigma,
            learning_starts: h.learning_starts,
            vf_coef: h.vf_coef,
            max_grad_norm: h.max_grad_norm,
            init_log_std: h.init_log_std,
        }
    }
}

impl RlSection {
    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            hidden: self.hidden.clone(),
            gamma: self.gamma,
            clip: self.clip,
            gae_lambda: self.gae_lambda,
            learning_rate: self.learning_rate,
            rollout_len: self.rollout_len,
            epochs: self.epochs,
            batch: self.batch,
            n_steps: self.n_steps,
            replay: self.replay,
            tau: self.tau,
            exploration_sigma: self.exploration_sigma,
            learning_starts: self.learning_starts,
            vf_coef: self.vf_coef,
            max_grad_norm: self.max_grad_norm,
            init_log_std: self.init_log_std,
        }
    }

    pub fn rf_daily(&self) -> f64 {
        self.risk_free_annual / TRADING_DAYS
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSection {
    pub cycle: usize,
    pub lookback: usize,
    pub validation: usize,
    pub validation_costs: bool,
    pub candidates: Vec<String>,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        let s = RetrainSchedule::default();
        Self {
            cycle: s.cycle,
            lookback: s.lookback,
            validation: s.validation,
            validation_costs: true,
            candidates: LearnerKind::ALL.iter().map(|k| k.as_str().to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub strategy: String,
    pub seed: u64,
    pub initial_cash: f64,
    /// First decision date; defaults to the first day with a full
    /// lookback + validation history.
    pub test_start: Option<NaiveDate>,
    pub test_end: Option<NaiveDate>,
    /// Load the trading policy from here instead of retraining each cycle.
    pub checkpoint_dir: Option<PathBuf>,
    pub regimes: Vec<String>,
    pub plot: bool,
    pub bootstrap_resamples: usize,
    /// Reference strategy for `compare` p-values.
    pub reference: String,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            strategy: "deltahedge".into(),
            seed: 7,
            initial_cash: 100_000.0,
            test_start: None,
            test_end: None,
            checkpoint_dir: None,
            regimes: vec!["rising".into(), "falling".into(), "volatile".into()],
            plot: true,
            bootstrap_resamples: crate::metrics::DEFAULT_RESAMPLES,
            reference: "deltahedge".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataSection,
    pub costs: CostsSection,
    pub signals: SignalsSection,
    pub rl: RlSection,
    pub ensemble: EnsembleSection,
    pub run: RunSection,
    /// Directory relative paths resolve against; not part of the file.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text, &path.display().to_string())?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.strategy()?;
        self.trader_learner()?;
        self.candidates()?;
        self.regime_windows()?;
        let c = &self.costs;
        if [c.equity_rate, c.option_fixed_per_contract, c.option_prop_rate]
            .iter()
            .any(|x| !(x.is_finite() && *x >= 0.0))
        {
            return Err(invalid("costs must be finite and non-negative"));
        }
        if c.multiplier == 0 {
            return Err(invalid("costs.multiplier must be at least 1"));
        }
        let s = &self.signals;
        if s.tanh_scale.is_nan()
            || s.tanh_scale <= 0.0
            || s.kdj_period == 0
            || s.kdj_k_smooth == 0
            || s.kdj_d_smooth == 0
            || s.rsi_period == 0
        {
            return Err(invalid("signal periods and tanh_scale must be positive"));
        }
        let r = &self.rl;
        ArchDescriptor::new(1, &r.hidden, 1).map_err(|e| invalid(format!("rl.hidden: {e}")))?;
        if r.sharpe_window < 2 {
            return Err(invalid("rl.sharpe_window must be at least 2"));
        }
        if r.learning_rate.is_nan()
            || r.learning_rate <= 0.0
            || !(0.0..=1.0).contains(&r.gamma)
            || !(0.0..=1.0).contains(&r.gae_lambda)
        {
            return Err(invalid(
                "rl.learning_rate must be positive; gamma and gae_lambda in [0, 1]",
            ));
        }
        if r.rollout_len == 0 || r.batch == 0 || r.n_steps == 0 || r.replay == 0 || r.epochs == 0 {
            return Err(invalid(
                "rl rollout, batch, n_steps, replay and epochs must be positive",
            ));
        }
        let e = &self.ensemble;
        if e.cycle == 0 || e.lookback < 2 || e.validation < 2 {
            return Err(invalid(
                "ensemble.cycle must be positive, lookback and validation at least 2",
            ));
        }
        if !(self.run.initial_cash.is_finite() && self.run.initial_cash > 0.0) {
            return Err(invalid("run.initial_cash must be positive"));
        }
        if let (Some(a), Some(b)) = (self.run.test_start, self.run.test_end) {
            if a > b {
                return Err(invalid("run.test_start is after run.test_end"));
            }
        }
        if let (Some(a), Some(b)) = (self.data.start, self.data.end) {
            if a > b {
                return Err(invalid("data.start is after data.end"));
            }
        }
        if self.run.bootstrap_resamples < 1000 {
            return Err(invalid("run.bootstrap_resamples must be at least 1000"));
        }
        self.run
            .reference
            .parse::<StrategyKind>()
            .map_err(|e| invalid(format!("run.reference: {e}")))?;
        Ok(())
    }

    pub fn strategy(&self) -> Result<StrategyKind, ConfigError> {
        self.run
            .strategy
            .parse()
            .map_err(|e: String| invalid(format!("run.strategy: {e}")))
    }

    pub fn trader_learner(&self) -> Result<LearnerKind, ConfigError> {
        LearnerKind::parse(&self.rl.trader_learner).ok_or_else(|| {
            invalid(format!(
                "rl.trader_learner: unknown learner `{}`",
                self.rl.trader_learner
            ))
        })
    }

    /// Hedging candidates in learner order, without duplicates.
    pub fn candidates(&self) -> Result<Vec<LearnerKind>, ConfigError> {
        let mut kinds = self
            .ensemble
            .candidates
            .iter()
            .map(|c| {
                LearnerKind::parse(c).ok_or_else(|| invalid(format!("ensemble.candidates: unknown learner `{c}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        kinds.sort();
        kinds.dedup();
        if kinds.is_empty() {
            return Err(invalid("ensemble.candidates is empty"));
        }
        Ok(kinds)
    }

    pub fn regime_windows(&self) -> Result<Vec<RegimeWindow>, ConfigError> {
        self.run
            .regimes
            .iter()
            .map(|r| regime_preset(r).ok_or_else(|| invalid(format!("run.regimes: unknown preset `{r}`"))))
            .collect()
    }

    pub fn data_path(&self, file: &str) -> PathBuf {
        self.base_dir.join(&self.data.dir).join(file)
    }

    pub fn checkpoint_dir(&self) -> Option<PathBuf> {
        self.run.checkpoint_dir.as_ref().map(|d| self.base_dir.join(d))
    }

    pub fn engine_params(&self) -> EngineParams {
        EngineParams {
            costs: CostModel {
                equity_rate: self.costs.equity_rate,
                option_fixed_per_contract: self.costs.option_fixed_per_contract,
                option_prop_rate: self.costs.option_prop_rate,
            },
            marks: MarkModel {
                rate: self.rl.risk_free_annual,
            },
            multiplier: self.costs.multiplier,
            sharpe_window: self.rl.sharpe_window,
            rf_daily: self.rl.rf_daily(),
            target_dte: 30,
        }
    }

    pub fn regime_params(&self) -> RegimeParams {
        RegimeParams {
            w_f: self.signals.w_f,
            w_s: self.signals.w_s,
            tanh_scale: self.signals.tanh_scale,
            use_vix: self.signals.use_vix,
            w_v: self.signals.w_v,
        }
    }

    pub fn kdj_params(&self) -> KdjParams {
        KdjParams {
            period: self.signals.kdj_period,
            k_smooth: self.signals.kdj_k_smooth,
            d_smooth: self.signals.kdj_d_smooth,
        }
    }

    pub fn rsi_params(&self) -> RsiParams {
        RsiParams {
            period: self.signals.rsi_period,
            upper: self.signals.rsi_upper,
            lower: self.signals.rsi_lower,
        }
    }

    pub fn schedule(&self) -> RetrainSchedule {
        RetrainSchedule {
            cycle: self.ensemble.cycle,
            lookback: self.ensemble.lookback,
            validation: self.ensemble.validation,
        }
    }

    pub fn training_settings(&self) -> TrainingSettings {
        TrainingSettings {
            hp: self.rl.hyperparams(),
            timesteps: self.rl.timesteps,
            initial_cash: self.run.initial_cash,
            validation_costs: self.ensemble.validation_costs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::from_toml("", "inline").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.strategy().unwrap(), StrategyKind::DeltaHedge);
        assert_eq!(cfg.candidates().unwrap(), LearnerKind::ALL.to_vec());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            RunConfig::from_toml("[run]\nstrategy = \"kdj_rsi\"\nsede = 3\n", "inline"),
            Err(ConfigError::Parse { .. })
        ));
        assert!(matches!(
            RunConfig::from_toml("[extra]\n", "inline"),
            Err(ConfigError::Parse { .. })
        ));
    }

    #[test]
    fn semantic_validation() {
        assert!(matches!(
            RunConfig::from_toml("[run]\nstrategy = \"martingale\"\n", "inline"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(RunConfig::from_toml("[rl]\nhidden = [128]\n", "inline").is_err());
        assert!(RunConfig::from_toml("[costs]\nmultiplier = 0\n", "inline").is_err());
        assert!(RunConfig::from_toml("[run]\nregimes = [\"sideways\"]\n", "inline").is_err());
        let cfg = RunConfig::from_toml("[run]\nstrategy = \"single_hedger:a2c\"\n", "inline").unwrap();
        assert_eq!(
            cfg.strategy().unwrap(),
            StrategyKind::SingleHedger(LearnerKind::AdvantageAc)
        );
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml(), "inline").unwrap(), cfg);
    }
}
