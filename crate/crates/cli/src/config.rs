//! Experiment configuration files.
//!
//! A config is a TOML document with the sections `[model]`, `[lattice]`,
//! `[observable]`, `[perturbation]`, `[coupling]`, `[run]` and `[output]`:
//!
//! ```toml
//! [model]
//! rule = "ad_diffusion"        # ising_ad | ad_diffusion | zgb | evans_co
//! beta = 0.1                   # remaining keys are model parameters
//! J = 1.0
//! h = 0.0
//! c_a = 1.0
//! c_d = 1.0
//! c_diff = 1.0
//!
//! [lattice]
//! sides = [100]                # [N] or [rows, cols]
//! initial = 0                  # fill value, or one value per site
//!
//! [observable]
//! kind = "coverage"            # default
//! partition = ["(-inf,0)", "[0,0]", "(0,inf)"]   # default
//!
//! [perturbation]
//! param = "beta"
//! step = 1e-3
//!
//! [coupling]
//! schemes = ["uncoupled", "micro_opt", "macro"]
//! q = [0, 1, 2, 4, 5, 10, 20, 25, 50, 100]      # used by sweep-q and bench
//!
//! [run]
//! horizon = 10.0
//! grid = { start = 0.0, stop = 10.0, count = 41 }   # or an explicit list
//! samples = 2000
//! seed = 1
//! workers = 4                  # optional; default from CKMC_WORKERS
//! repeats = 5                  # bench only
//!
//! [output]
//! dir = "out"
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use ckmc::coupling::Scheme;
use ckmc::engine::TimeGrid;
use ckmc::ensemble::Execution;
use ckmc::lattice::{Configuration, Lattice};
use ckmc::models::{ModelSpec, Param, ParameterVector, PerturbationDirection, RateRule};
use ckmc::observables::{ObservableKind, Partition};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub lattice: LatticeSection,
    #[serde(default)]
    pub observable: ObservableSection,
    pub perturbation: PerturbationSection,
    #[serde(default)]
    pub coupling: CouplingSection,
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSection {
    pub rule: String,
    #[serde(flatten)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub sides: Vec<usize>,
    #[serde(default)]
    pub initial: Initial,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Initial {
    Fill(i8),
    Sites(Vec<i8>),
}

impl Default for Initial {
    fn default() -> Self {
        Initial::Fill(0)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSection {
    #[serde(default = "default_observable")]
    pub kind: String,
    #[serde(default)]
    pub partition: Option<Vec<String>>,
}

fn default_observable() -> String {
    "coverage".into()
}

impl Default for ObservableSection {
    fn default() -> Self {
        Self {
            kind: default_observable(),
            partition: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSection {
    pub param: String,
    pub step: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    #[serde(default)]
    pub schemes: Vec<String>,
    #[serde(default)]
    pub q: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub horizon: f64,
    pub grid: GridSpec,
    pub samples: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
}

fn default_repeats() -> usize {
    5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Uniform { start: f64, stop: f64, count: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub spec: ModelSpec,
    pub direction: PerturbationDirection,
    pub observable: ObservableKind,
    pub partition: Partition,
    pub schemes: Vec<Scheme>,
    pub qs: Vec<usize>,
    pub grid: TimeGrid,
    pub sigma0: Configuration,
    pub samples: u64,
    pub seed: u64,
    pub exec: Execution,
    pub repeats: usize,
    pub out_dir: PathBuf,
}

fn field(path: &str) -> impl Fn(ckmc::Error) -> CliError + '_ {
    move |e| CliError::Config(format!("{path}: {e}"))
}

fn invalid(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {msg}"))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(self) -> Result<Experiment, CliError> {
        let rule: RateRule = self.model.rule.parse().map_err(field("[model] rule"))?;
        let mut params = ParameterVector::new();
        for (name, &v) in &self.model.params {
            let p: Param = name.parse().map_err(field(&format!("[model] {name}")))?;
            params.set(p, v);
        }
        let lattice = Lattice::new(&self.lattice.sides).map_err(field("[lattice] sides"))?;
        let spec = ModelSpec::new(rule, lattice, params);
        spec.validate().map_err(field("[model]"))?;
        let n = spec.lattice.n_sites();

        let sigma0 = match &self.lattice.initial {
            Initial::Fill(v) => Configuration::filled(n, *v),
            Initial::Sites(v) if v.len() == n => Configuration::from_vec(v.clone()),
            Initial::Sites(v) => {
                return Err(invalid(
                    "[lattice] initial",
                    format!("{} values for {n} sites", v.len()),
                ))
            }
        };
        sigma0
            .validate(&spec.species())
            .map_err(field("[lattice] initial"))?;

        let observable: ObservableKind = self
            .observable
            .kind
            .parse()
            .map_err(field("[observable] kind"))?;
        let partition = match &self.observable.partition {
            None => Partition::default(),
            Some(sets) => {
                let sets: Vec<&str> = sets.iter().map(String::as_str).collect();
                Partition::parse(&sets).map_err(field("[observable] partition"))?
            }
        };

        let direction =
            PerturbationDirection::named(&self.perturbation.param, self.perturbation.step)
                .map_err(field("[perturbation]"))?;
        if !rule.required_params().contains(&direction.param) {
            return Err(invalid(
                "[perturbation] param",
                format!(
                    "`{}` is not a parameter of {}",
                    direction.param,
                    rule.name()
                ),
            ));
        }

        let schemes = self
            .coupling
            .schemes
            .iter()
            .map(|s| {
                let scheme: Scheme = s.parse().map_err(field("[coupling] schemes"))?;
                scheme.validate(n).map_err(field("[coupling] schemes"))?;
                Ok(scheme)
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        for &q in &self.coupling.q {
            Scheme::from_q(q, n).map_err(field("[coupling] q"))?;
        }

        let run = &self.run;
        if !(run.horizon.is_finite() && run.horizon > 0.0) {
            return Err(invalid("[run] horizon", "must be positive and finite"));
        }
        let grid = match &run.grid {
            GridSpec::List(t) => TimeGrid::new(t.clone(), run.horizon),
            GridSpec::Uniform { start, stop, count } => TimeGrid::uniform(*start, *stop, *count)
                .and_then(|g| TimeGrid::new(g.times().to_vec(), run.horizon)),
        }
        .map_err(field("[run] grid"))?;
        if run.samples < 2 {
            return Err(invalid(
                "[run] samples",
                format!("need at least 2, got {}", run.samples),
            ));
        }
        if run.repeats == 0 {
            return Err(invalid("[run] repeats", "must be positive"));
        }
        let exec = match run.workers {
            Some(0) => return Err(invalid("[run] workers", "must be positive")),
            Some(w) => Execution::Workers(w),
            None => Execution::from_env().map_err(field("environment"))?,
        };

        Ok(Experiment {
            spec,
            direction,
            observable,
            partition,
            schemes,
            qs: self.coupling.q.clone(),
            grid,
            sigma0,
            samples: run.samples,
            seed: run.seed,
            exec,
            repeats: run.repeats,
            out_dir: self.output.dir.clone(),
            config: self,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[model]
rule = "ising_ad"
beta = 1.0
J = 1.0
h = 1.0
c_a = 1.0
c_d = 1.0

[lattice]
sides = [100]

[perturbation]
param = "beta"
step = 0.1

[coupling]
schemes = ["crn", "micro_opt", "coarse(4)"]
q = [0, 1, 100]

[run]
horizon = 40.0
grid = { start = 0.0, stop = 40.0, count = 81 }
samples = 100
seed = 3
"#;

    #[test]
    fn base_config_validates() {
        let e = ExperimentConfig::parse(BASE).unwrap().validate().unwrap();
        assert_eq!(
            e.schemes,
            vec![Scheme::Crn, Scheme::MicroOpt, Scheme::Coarse(4)]
        );
        assert_eq!(e.grid.len(), 81);
        assert_eq!(e.sigma0.len(), 100);
        assert_eq!(e.repeats, 5);
        assert_eq!(e.spec.params.get(Param::H), Some(1.0));
    }

    #[test]
    fn explicit_grid_and_initial_state() {
        let text = BASE
            .replace(
                "grid = { start = 0.0, stop = 40.0, count = 81 }",
                "grid = [1.0, 2.0, 40.0]",
            )
            .replace("sides = [100]", "sides = [4]\ninitial = [0, 1, 1, 0]")
            .replace("\"coarse(4)\"", "\"macro\"")
            .replace("q = [0, 1, 100]", "q = [0, 2, 4]");
        let e = ExperimentConfig::parse(&text).unwrap().validate().unwrap();
        assert_eq!(e.grid.times(), &[1.0, 2.0, 40.0]);
        assert_eq!(e.sigma0.as_slice(), &[0, 1, 1, 0]);
    }

    fn err(text: &str) -> String {
        match ExperimentConfig::parse(text).and_then(ExperimentConfig::validate) {
            Err(CliError::Config(m)) => m,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn diagnostics_name_the_field() {
        assert!(err(&BASE.replace("samples = 100", "samples = 0")).contains("[run] samples"));
        assert!(err(&BASE.replace("samples = 100\n", "")).contains("samples"));
        assert!(err(&BASE.replace("q = [0, 1, 100]", "q = [3]")).contains("[coupling] q"));
        assert!(err(&BASE.replace("\"coarse(4)\"", "\"coarse(7)\"")).contains("[coupling] schemes"));
        assert!(
            err(&BASE.replace("rule = \"ising_ad\"", "rule = \"potts\"")).contains("[model] rule")
        );
        assert!(err(&BASE.replace("beta = 1.0", "gamma = 1.0")).contains("gamma"));
        assert!(
            err(&BASE.replace("param = \"beta\"", "param = \"c_diff\"")).contains("[perturbation]")
        );
        assert!(err(&BASE.replace("count = 81 }", "count = 81 }\nextra = 1")).contains("extra"));
        assert!(err(&BASE.replace("stop = 40.0", "stop = 50.0")).contains("[run] grid"));
        assert!(
            err(&BASE.replace("sides = [100]", "sides = [100]\ninitial = 2"))
                .contains("[lattice] initial")
        );
    }

    #[test]
    fn toml_errors_carry_line_numbers() {
        let m = err(&BASE.replace("step = 0.1", "step = \"x\""));
        assert!(m.contains("line"), "{m}");
    }
}
