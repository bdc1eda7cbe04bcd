//! TOML run configuration.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use coordmine_core::analysis::{default_rho_grid, default_sigma_grid, AblationMode};
use coordmine_core::ingest::{self, attr, FieldMapping, InputFormat, PartitionSpec, PreprocessConfig};
use coordmine_core::miner::{MiningParams, ThresholdSide};
use coordmine_core::model::{fraction_from_f64, parse_fraction, Fraction};
use coordmine_core::synth::SynthConfig;
use serde::Deserialize;

use crate::CliError;

/// A number or a fraction string such as `"3/2"`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Rational {
    Float(f64),
    Text(String),
}

impl Rational {
    pub fn to_fraction(&self) -> Result<Fraction, CliError> {
        match self {
            Rational::Float(x) => fraction_from_f64(*x),
            Rational::Text(s) => parse_fraction(s),
        }
        .map_err(CliError::from)
    }
}

/// Epoch seconds or a date/time string.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Instant {
    Seconds(i64),
    Text(String),
}

impl Instant {
    fn resolve(&self, name: &str) -> Result<i64, CliError> {
        match self {
            Instant::Seconds(s) => Ok(*s),
            Instant::Text(t) => ingest::parse_timestamp(t)
                .ok_or_else(|| CliError::Config(format!("partition.{name}: cannot parse `{t}`"))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    pub posts: PathBuf,
    #[serde(default)]
    pub format: InputFormat,
    #[serde(default = "default_separator")]
    pub list_separator: String,
    #[serde(default)]
    pub fields: FieldMapping,
}

fn default_separator() -> String {
    ";".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSection {
    pub t0: Instant,
    pub t1: Instant,
    pub t2: Instant,
    pub t3: Instant,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    pub slots_per_day: u32,
    pub timezone_offset_minutes: i32,
    pub hashtag_normalizer: String,
    pub attributes: Vec<String>,
    pub common_users: bool,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        Self {
            slots_per_day: 12,
            timezone_offset_minutes: 0,
            hashtag_normalizer: "lowercase".into(),
            attributes: attr::ALL.iter().map(|s| s.to_string()).collect(),
            common_users: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiningSection {
    pub sigma: u64,
    pub rho: Rational,
    pub threshold_side: ThresholdSide,
    pub sigma_delta: Option<Rational>,
    pub min_pattern_len: usize,
}

pub const DEFAULT_SIGMA: u64 = 10;
pub const DEFAULT_RHO: f64 = 1.5;

impl Default for MiningSection {
    fn default() -> Self {
        Self {
            sigma: DEFAULT_SIGMA,
            rho: Rational::Float(DEFAULT_RHO),
            threshold_side: ThresholdSide::Background,
            sigma_delta: None,
            min_pattern_len: 1,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub labels: Option<PathBuf>,
    /// Keep only the `n_c` most active coordinated users.
    pub n_c: Option<usize>,
    pub n_n: Option<usize>,
    pub suspect_language: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub sigmas: Option<Vec<u64>>,
    pub rhos: Option<Vec<Rational>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSection {
    pub modes: Option<Vec<AblationMode>>,
    pub sigmas: Option<Vec<u64>>,
    pub rhos: Option<Vec<Rational>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

/// The on-disk shape of a run config.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub input: Option<InputSection>,
    pub partition: Option<PartitionSection>,
    #[serde(default)]
    pub preprocess: PreprocessSection,
    #[serde(default)]
    pub mining: MiningSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub sweep: GridSection,
    #[serde(default)]
    pub ablation: AblationSection,
    #[serde(default)]
    pub synth: SynthConfig,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone)]
pub struct InputConfig {
    pub posts: PathBuf,
    pub format: InputFormat,
    pub list_separator: String,
    pub fields: FieldMapping,
}

/// Validated run configuration with paths resolved against the config file.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: Option<InputConfig>,
    pub partition: Option<PartitionSpec>,
    pub preprocess: PreprocessConfig,
    pub common_users: bool,
    pub mining: MiningParams,
    pub labels: Option<PathBuf>,
    pub n_c: Option<usize>,
    pub n_n: Option<usize>,
    pub suspect_language: Option<String>,
    pub sweep_sigmas: Vec<u64>,
    pub sweep_rhos: Vec<Fraction>,
    pub ablation_modes: Vec<AblationMode>,
    pub ablation_sigmas: Vec<u64>,
    pub ablation_rhos: Vec<Fraction>,
    pub synth: SynthConfig,
    pub output_dir: PathBuf,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub sigma: Option<u64>,
    pub rho: Option<String>,
    pub threshold_side: Option<ThresholdSide>,
}

fn rationals(v: &[Rational]) -> Result<Vec<Fraction>, CliError> {
    v.iter().map(Rational::to_fraction).collect()
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let raw: RawConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_raw(raw, &base, overrides)
    }

    /// Built-in defaults, used when no config file is given.
    pub fn defaults(overrides: &Overrides) -> Result<Self, CliError> {
        Self::from_raw(RawConfig::default(), Path::new(""), overrides)
    }

    pub fn from_raw(raw: RawConfig, base: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };

        let input = raw.input.map(|i| InputConfig {
            posts: resolve(&i.posts),
            format: i.format,
            list_separator: i.list_separator,
            fields: i.fields,
        });
        let partition = raw
            .partition
            .map(|p| -> Result<PartitionSpec, CliError> {
                let spec = PartitionSpec {
                    t0: p.t0.resolve("t0")?,
                    t1: p.t1.resolve("t1")?,
                    t2: p.t2.resolve("t2")?,
                    t3: p.t3.resolve("t3")?,
                };
                spec.validate()?;
                Ok(spec)
            })
            .transpose()?;

        let pre = raw.preprocess;
        let preprocess = PreprocessConfig {
            slots_per_day: pre.slots_per_day,
            timezone_offset_minutes: pre.timezone_offset_minutes,
            hashtag_normalizer: ingest::normalizer_by_name(&pre.hashtag_normalizer)?,
            enabled_attributes: pre.attributes.iter().cloned().collect::<BTreeSet<_>>(),
        };
        preprocess.validate()?;

        let m = raw.mining;
        let rho = match &overrides.rho {
            Some(text) => parse_fraction(text)?,
            None => m.rho.to_fraction()?,
        };
        let mining = MiningParams {
            sigma: overrides.sigma.unwrap_or(m.sigma),
            rho,
            threshold_side: overrides.threshold_side.unwrap_or(m.threshold_side),
            sigma_delta: m.sigma_delta.as_ref().map(Rational::to_fraction).transpose()?,
            min_pattern_len: m.min_pattern_len,
        };
        mining.validate()?;

        let sweep_sigmas = raw.sweep.sigmas.unwrap_or_else(default_sigma_grid);
        let sweep_rhos = match &raw.sweep.rhos {
            Some(r) => rationals(r)?,
            None => default_rho_grid(),
        };
        let ablation_sigmas = raw.ablation.sigmas.unwrap_or_else(|| sweep_sigmas.clone());
        let ablation_rhos = match &raw.ablation.rhos {
            Some(r) => rationals(r)?,
            None => sweep_rhos.clone(),
        };
        for (name, empty) in [
            ("sweep.sigmas", sweep_sigmas.is_empty()),
            ("sweep.rhos", sweep_rhos.is_empty()),
            ("ablation.sigmas", ablation_sigmas.is_empty()),
            ("ablation.rhos", ablation_rhos.is_empty()),
        ] {
            if empty {
                return Err(CliError::Config(format!("{name} must not be empty")));
            }
        }
        let ablation_modes = raw
            .ablation
            .modes
            .unwrap_or_else(|| vec![AblationMode::Subtractive, AblationMode::Additive]);

        let config = RunConfig {
            input,
            partition,
            preprocess,
            common_users: pre.common_users,
            mining,
            labels: raw.eval.labels.as_deref().map(resolve),
            n_c: raw.eval.n_c,
            n_n: raw.eval.n_n,
            suspect_language: raw.eval.suspect_language,
            sweep_sigmas,
            sweep_rhos,
            ablation_modes,
            ablation_sigmas,
            ablation_rhos,
            synth: raw.synth,
            output_dir: overrides.out.clone().unwrap_or_else(|| resolve(&raw.output.dir)),
        };
        config.check_paths()?;
        Ok(config)
    }

    fn check_paths(&self) -> Result<(), CliError> {
        if let Some(i) = &self.input {
            if !i.posts.is_file() {
                return Err(CliError::Config(format!("input file {} does not exist", i.posts.display())));
            }
        }
        if let Some(l) = &self.labels {
            if !l.is_file() {
                return Err(CliError::Config(format!("labels file {} does not exist", l.display())));
            }
        }
        if (self.n_c.is_some() || self.n_n.is_some()) && self.labels.is_none() {
            return Err(CliError::Config("eval.n_c / eval.n_n need eval.labels".into()));
        }
        Ok(())
    }

    pub fn require_input(&self) -> Result<(&InputConfig, PartitionSpec), CliError> {
        let input = self
            .input
            .as_ref()
            .ok_or_else(|| CliError::Config("config has no [input] section".into()))?;
        let partition = self
            .partition
            .ok_or_else(|| CliError::Config("config has no [partition] section".into()))?;
        Ok((input, partition))
    }

    pub fn require_labels(&self) -> Result<&Path, CliError> {
        self.labels
            .as_deref()
            .ok_or_else(|| CliError::Config("this command needs eval.labels".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        RunConfig::from_raw(raw, Path::new(""), &Overrides::default())
    }

    #[test]
    fn defaults_use_recommended_parameters() {
        let c = parse("").unwrap();
        assert_eq!(c.mining.sigma, 10);
        assert_eq!(c.mining.rho, Fraction::new(3, 2));
        assert_eq!(c.mining.threshold_side, ThresholdSide::Background);
        assert_eq!(c.sweep_sigmas, default_sigma_grid());
        assert!(c.common_users);
    }

    #[test]
    fn rho_accepts_floats_and_fractions() {
        assert_eq!(parse("[mining]\nrho = 1.1").unwrap().mining.rho, Fraction::new(11, 10));
        assert_eq!(parse("[mining]\nrho = \"3/2\"").unwrap().mining.rho, Fraction::new(3, 2));
        assert!(parse("[mining]\nrho = 1.0").is_err());
    }

    #[test]
    fn partition_accepts_dates() {
        let c = parse("[partition]\nt0 = \"2015-01-01\"\nt1 = \"2015-05-31\"\nt2 = 1467331200\nt3 = \"2016-11-30T00:00:00Z\"").unwrap();
        assert_eq!(c.partition.unwrap().t0, 1_420_070_400);
        assert!(parse("[partition]\nt0 = 5\nt1 = 4\nt2 = 6\nt3 = 7").is_err());
    }

    #[test]
    fn unknown_keys_and_missing_files_are_config_errors() {
        assert!(matches!(parse("[mining]\nsgima = 3"), Err(CliError::Config(_))));
        assert!(matches!(parse("[input]\nposts = \"/nonexistent/posts.csv\""), Err(CliError::Config(_))));
        assert!(matches!(parse("[eval]\nn_c = 4"), Err(CliError::Config(_))));
    }

    #[test]
    fn overrides_win() {
        let raw: RawConfig = toml::from_str("[mining]\nsigma = 3").unwrap();
        let o = Overrides {
            sigma: Some(7),
            rho: Some("2".into()),
            threshold_side: Some(ThresholdSide::Target),
            out: Some("elsewhere".into()),
        };
        let c = RunConfig::from_raw(raw, Path::new("base"), &o).unwrap();
        assert_eq!((c.mining.sigma, c.mining.rho), (7, Fraction::from_integer(2)));
        assert_eq!(c.mining.threshold_side, ThresholdSide::Target);
        assert_eq!(c.output_dir, PathBuf::from("elsewhere"));
    }
}
