//! TOML instance and experiment files.
//!
//! Instance file:
//!
//! ```toml
//! K = 3
//! L = 3
//! M = 3                       # first M subpopulations are constrained
//! q = [0.2, 0.3, 0.5]
//! mu = [[0.2, 0.6, 0.8], [0.4, 0.4, 0.3], [-0.2, 1.0, 1.5]]
//! sigma = 1.0                 # optional, default 1
//! thresholds = [0.0, 0.0, 0.0]  # optional, length M, default 0
//! ```
//!
//! An experiment file holds the run settings plus either an `[instance]` table
//! in the format above or `instance_file = "path"` (relative to the experiment
//! file). A bare instance file is also accepted and gets default settings.

use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::Spanned;

use crate::complexity::OptimizerParams;
use crate::error::{Error, Result};
use crate::harness::{ExperimentConfig, DEFAULT_INIT_DRAWS, DEFAULT_REPLICATIONS, DEFAULT_TAU_MAX};
use crate::matrix::Matrix;
use crate::model::BanditInstance;
use crate::stopping::StoppingRule;
use crate::strategies::StrategyKind;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    #[serde(rename = "K")]
    k: Spanned<usize>,
    #[serde(rename = "L")]
    l: Spanned<usize>,
    #[serde(rename = "M")]
    m: Spanned<usize>,
    q: Spanned<Vec<f64>>,
    mu: Spanned<Vec<Spanned<Vec<f64>>>>,
    sigma: Option<Spanned<f64>>,
    thresholds: Option<Spanned<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    strategies: Option<Spanned<Vec<Spanned<String>>>>,
    delta: Option<Spanned<f64>>,
    replications: Option<Spanned<usize>>,
    master_seed: Option<u64>,
    tau_max: Option<Spanned<u64>>,
    init_draws: Option<Spanned<usize>>,
    optimizer: Option<OptimizerParams>,
    stopping: Option<StoppingRule>,
    output_dir: Option<PathBuf>,
    instance: Option<Spanned<RawInstance>>,
    instance_file: Option<Spanned<String>>,
}

struct Source<'a> {
    path: &'a Path,
    text: &'a str,
}

impl Source<'_> {
    fn position(&self, offset: usize) -> (usize, usize) {
        let before = &self.text[..offset.min(self.text.len())];
        let line = before.matches('\n').count() + 1;
        let col = before.rfind('\n').map_or(before.len(), |nl| before.len() - nl - 1) + 1;
        (line, col)
    }

    fn error(&self, span: Option<Range<usize>>, message: impl std::fmt::Display) -> Error {
        let message = match span {
            Some(span) => {
                let (line, col) = self.position(span.start);
                format!("line {line}, column {col}: {message}")
            }
            None => message.to_string(),
        };
        Error::Config {
            path: self.path.to_path_buf(),
            message,
        }
    }

    fn field<T>(&self, value: &Spanned<T>, field: &str, message: impl std::fmt::Display) -> Error {
        self.error(Some(value.span()), format!("field `{field}`: {message}"))
    }

    fn parse<T: serde::de::DeserializeOwned>(&self) -> Result<T> {
        toml::from_str(self.text).map_err(|e| self.error(e.span(), e.message()))
    }
}

fn build_instance(raw: &RawInstance, src: &Source<'_>) -> Result<BanditInstance> {
    let (k, l, m) = (*raw.k.get_ref(), *raw.l.get_ref(), *raw.m.get_ref());
    if k < 1 {
        return Err(src.field(&raw.k, "K", "need at least one arm"));
    }
    if l < 1 {
        return Err(src.field(&raw.l, "L", "need at least one subpopulation"));
    }
    if m > l {
        return Err(src.field(&raw.m, "M", format!("M = {m} exceeds L = {l}")));
    }
    if raw.q.get_ref().len() != l {
        return Err(src.field(
            &raw.q,
            "q",
            format!("has {} entries, expected L = {l}", raw.q.get_ref().len()),
        ));
    }
    let rows = raw.mu.get_ref();
    if rows.len() != k {
        return Err(src.field(&raw.mu, "mu", format!("has {} rows, expected K = {k}", rows.len())));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.get_ref().len() != l {
            return Err(src.field(
                row,
                "mu",
                format!("row {} has {} entries, expected L = {l}", i + 1, row.get_ref().len()),
            ));
        }
    }
    let thresholds = match &raw.thresholds {
        Some(t) if t.get_ref().len() != m => {
            return Err(src.field(
                t,
                "thresholds",
                format!("has {} entries, expected M = {m}", t.get_ref().len()),
            ))
        }
        Some(t) => t.get_ref().clone(),
        None => vec![0.0; m],
    };
    let sigma = raw.sigma.as_ref().map_or(1.0, |s| *s.get_ref());
    let means = Matrix::from_rows(&rows.iter().map(|r| r.get_ref().clone()).collect::<Vec<_>>())?;
    BanditInstance::with_thresholds(means, raw.q.get_ref().clone(), m, thresholds, sigma)
        .map_err(|e| src.error(None, e))
}

/// Parse an instance file's contents; `path` is used in diagnostics only.
pub fn parse_instance(text: &str, path: &Path) -> Result<BanditInstance> {
    let src = Source { path, text };
    build_instance(&src.parse::<RawInstance>()?, &src)
}

pub fn load_instance(path: &Path) -> Result<BanditInstance> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_instance(&text, path)
}

fn looks_like_bare_instance(text: &str) -> bool {
    toml::from_str::<toml::Table>(text).is_ok_and(|t| t.contains_key("mu"))
}

/// Parse an experiment file's contents. `path` locates `instance_file` and labels diagnostics.
pub fn parse_experiment(text: &str, path: &Path) -> Result<ExperimentConfig> {
    if looks_like_bare_instance(text) {
        return Ok(ExperimentConfig::new(parse_instance(text, path)?));
    }
    let src = Source { path, text };
    let raw: RawExperiment = src.parse()?;
    let instance = match (&raw.instance, &raw.instance_file) {
        (Some(_), Some(file)) => {
            return Err(src.field(file, "instance_file", "give either [instance] or instance_file, not both"))
        }
        (Some(inline), None) => build_instance(inline.get_ref(), &src)?,
        (None, Some(file)) => {
            let base = path.parent().unwrap_or_else(|| Path::new("."));
            load_instance(&base.join(file.get_ref()))?
        }
        (None, None) => return Err(src.error(None, "missing [instance] table or instance_file")),
    };

    let mut config = ExperimentConfig::new(instance);
    if let Some(list) = &raw.strategies {
        if list.get_ref().is_empty() {
            return Err(src.field(list, "strategies", "list is empty"));
        }
        config.strategies = list
            .get_ref()
            .iter()
            .map(|s| s.get_ref().parse().map_err(|e| src.field(s, "strategies", e)))
            .collect::<Result<Vec<StrategyKind>>>()?;
    }
    if let Some(delta) = &raw.delta {
        let d = *delta.get_ref();
        if !(d > 0.0 && d < 1.0) {
            return Err(src.field(delta, "delta", format!("must lie in (0, 1), got {d}")));
        }
        config.delta = d;
    }
    config.replications = raw.replications.as_ref().map_or(DEFAULT_REPLICATIONS, |r| *r.get_ref());
    if let Some(r) = &raw.replications {
        if *r.get_ref() < 1 {
            return Err(src.field(r, "replications", "must be at least 1"));
        }
    }
    config.init_draws = raw.init_draws.as_ref().map_or(DEFAULT_INIT_DRAWS, |n| *n.get_ref());
    if let Some(n) = &raw.init_draws {
        if *n.get_ref() < 1 {
            return Err(src.field(n, "init_draws", "must be at least 1"));
        }
    }
    config.tau_max = raw.tau_max.as_ref().map_or(DEFAULT_TAU_MAX, |t| *t.get_ref());
    if let Some(t) = &raw.tau_max {
        let cells = config.instance.num_arms() * config.instance.num_subpops();
        let init_total = (cells * config.init_draws) as u64;
        if *t.get_ref() <= init_total {
            return Err(src.field(t, "tau_max", format!("must exceed K·L·init_draws = {init_total}")));
        }
    }
    if let Some(seed) = raw.master_seed {
        config.master_seed = seed;
    }
    if let Some(opt) = raw.optimizer {
        config.optimizer = opt;
    }
    if let Some(stopping) = raw.stopping {
        config.stopping = stopping;
    }
    config.output_dir = raw.output_dir;
    config.validate().map_err(|e| src.error(None, e))?;
    Ok(config)
}

pub fn load_experiment(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_experiment(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complexity::StepSchedule;
    use crate::presets::example_instance;
    use crate::stopping::ThresholdRule;

    const EXAMPLE_1: &str = r#"
K = 3
L = 3
M = 3
q = [0.2, 0.3, 0.5]
mu = [[0.2, 0.6, 0.8], [0.4, 0.4, 0.3], [-0.2, 1.0, 1.5]]
"#;

    fn message(err: Error) -> String {
        match err {
            Error::Config { message, .. } => message,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn instance_round_trip() {
        let inst = parse_instance(EXAMPLE_1, Path::new("ex1.toml")).unwrap();
        assert_eq!(inst, example_instance(1).unwrap());
        let with_extras = format!("{EXAMPLE_1}sigma = 2.0\nthresholds = [0.1, 0.0, -0.5]\n");
        let inst = parse_instance(&with_extras, Path::new("x.toml")).unwrap();
        assert_eq!(inst.noise_sd(), 2.0);
        assert_eq!(inst.thresholds(), &[0.1, 0.0, -0.5]);
    }

    #[test]
    fn dimension_errors_point_at_the_field() {
        let bad_row = EXAMPLE_1.replace("[0.4, 0.4, 0.3]", "[0.4, 0.4]");
        let msg = message(parse_instance(&bad_row, Path::new("x.toml")).unwrap_err());
        assert!(msg.starts_with("line 6,"), "{msg}");
        assert!(msg.contains("row 2 has 2 entries, expected L = 3"), "{msg}");

        let bad_q = EXAMPLE_1.replace("[0.2, 0.3, 0.5]", "[0.5, 0.5]");
        let msg = message(parse_instance(&bad_q, Path::new("x.toml")).unwrap_err());
        assert!(msg.starts_with("line 5, column 5: field `q`"), "{msg}");

        let bad_m = EXAMPLE_1.replace("M = 3", "M = 4");
        assert!(message(parse_instance(&bad_m, Path::new("x.toml")).unwrap_err()).contains("line 4"));

        let thresholds = format!("{EXAMPLE_1}thresholds = [0.0]\n");
        assert!(message(parse_instance(&thresholds, Path::new("x.toml")).unwrap_err())
            .contains("field `thresholds`"));
    }

    #[test]
    fn syntax_and_unknown_keys() {
        let msg = message(parse_instance("K = 3\nL = [", Path::new("x.toml")).unwrap_err());
        assert!(msg.starts_with("line 2"), "{msg}");
        let msg = message(parse_instance(&format!("{EXAMPLE_1}extra = 1\n"), Path::new("x.toml")).unwrap_err());
        assert!(msg.contains("extra"), "{msg}");
        let msg = message(parse_instance(&EXAMPLE_1.replace("K = 3\n", ""), Path::new("x.toml")).unwrap_err());
        assert!(msg.contains("K"), "{msg}");
    }

    #[test]
    fn experiment_with_inline_instance() {
        let text = format!(
            r#"
strategies = ["tascs", "uniform"]
delta = 0.05
replications = 20
master_seed = 11
tau_max = 5000
init_draws = 2
output_dir = "runs"

[optimizer]
max_iters = 100
schedule = "inverse_sqrt"

[stopping]
statistic_scale = 1.0
threshold = {{ kind = "conservative", loglog_weight = 1.0, offset = 0.5 }}

[instance]
{EXAMPLE_1}"#
        );
        let c = parse_experiment(&text, Path::new("exp.toml")).unwrap();
        assert_eq!(c.strategies, vec![StrategyKind::TaScs, StrategyKind::Uniform]);
        assert_eq!((c.delta, c.replications, c.master_seed, c.tau_max, c.init_draws), (0.05, 20, 11, 5000, 2));
        assert_eq!(c.optimizer.max_iters, 100);
        assert_eq!(c.optimizer.schedule, StepSchedule::InverseSqrt);
        assert_eq!(c.optimizer.alpha0, 1.0);
        assert_eq!(
            c.stopping.threshold,
            ThresholdRule::Conservative {
                loglog_weight: 1.0,
                offset: 0.5
            }
        );
        assert_eq!(c.output_dir, Some(PathBuf::from("runs")));
    }

    #[test]
    fn experiment_errors() {
        let base = format!("[instance]\n{EXAMPLE_1}");
        let msg = message(parse_experiment(&format!("delta = 1.5\n{base}"), Path::new("e.toml")).unwrap_err());
        assert!(msg.starts_with("line 1, column 9: field `delta`"), "{msg}");
        let msg =
            message(parse_experiment(&format!("strategies = [\"tascs\", \"ts\"]\n{base}"), Path::new("e.toml")).unwrap_err());
        assert!(msg.contains("unknown strategy `ts`"), "{msg}");
        let msg = message(parse_experiment(&format!("tau_max = 45\n{base}"), Path::new("e.toml")).unwrap_err());
        assert!(msg.contains("tau_max"), "{msg}");
        let msg = message(parse_experiment("delta = 0.1\n", Path::new("e.toml")).unwrap_err());
        assert!(msg.contains("missing [instance]"), "{msg}");
        let tie = "K = 2\nL = 1\nM = 0\nq = [1.0]\nmu = [[1.0], [1.0]]\n";
        assert!(matches!(
            parse_experiment(&format!("[instance]\n{tie}"), Path::new("e.toml")),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn bare_instance_and_instance_file() {
        let c = parse_experiment(EXAMPLE_1, Path::new("ex1.toml")).unwrap();
        assert_eq!(c.replications, DEFAULT_REPLICATIONS);

        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("inst.toml"), EXAMPLE_1).unwrap();
        let exp = dir.path().join("exp.toml");
        std::fs::write(&exp, "instance_file = \"inst.toml\"\nreplications = 3\n").unwrap();
        let c = load_experiment(&exp).unwrap();
        assert_eq!(c.instance, example_instance(1).unwrap());
        assert_eq!(c.replications, 3);
    }
}
