//! Experiment configuration: an INI-style file of flat `key = value` pairs
//! grouped in sections, overridable from the command line.
//!
//! ```text
//! [graph]
//! ; fig1 | cycle:N | complete:N | random:N:EXTRA:SEED | path
//! source = fig1
//!
//! [run]
//! algorithms = addopt, dextra, gp
//! ; rounds per run
//! iters = 500
//! ; rounds per step-size study point
//! horizon = 200
//!
//! [step]
//! ; constant step
//! alpha = 0.1
//! ; gp uses scale/sqrt(k) when present
//! diminishing = 1.0
//! ; lo:hi:points, for the step-size study
//! sweep = 0.02:0.4:20
//!
//! ; exactly one of [logistic] / [quadratic]
//! [logistic]
//! seed = 1
//! agents_samples = 10
//! features = 3
//! beta = 1
//! ; optional, overrides generation
//! data = path.csv
//!
//! [sparsity]
//! nodes = 10
//! ; generated nested chain, one per seed
//! edges = 15, 30, 90
//! seeds = 5
//! ; optional explicit chain instead
//! graphs = a.txt, b.txt
//! strict = true
//!
//! [output]
//! dir = out
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, ensure, Context, Result};
use ini::Ini;

use dirgraph_opt::algorithms::{Algorithm, StepSize};

#[derive(Debug, Clone, PartialEq)]
pub enum GraphSource {
    Fig1,
    Cycle(usize),
    Complete(usize),
    Random { n: usize, extra: usize, seed: u64 },
    File(PathBuf),
}

impl FromStr for GraphSource {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |i: usize| -> Result<u64> {
            parts[i]
                .parse()
                .with_context(|| format!("bad number {:?} in graph source {s:?}", parts[i]))
        };
        Ok(match (parts[0], parts.len()) {
            ("fig1", 1) => GraphSource::Fig1,
            ("cycle", 2) => GraphSource::Cycle(num(1)? as usize),
            ("complete", 2) => GraphSource::Complete(num(1)? as usize),
            ("random", 4) => GraphSource::Random {
                n: num(1)? as usize,
                extra: num(2)? as usize,
                seed: num(3)?,
            },
            _ => GraphSource::File(PathBuf::from(s.trim())),
        })
    }
}

/// Inclusive linear grid `lo, ..., hi` with `points` entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Sweep {
    pub fn grid(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.lo];
        }
        let h = (self.hi - self.lo) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.lo + h * i as f64).collect()
    }
}

impl FromStr for Sweep {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        ensure!(parts.len() == 3, "sweep must look like lo:hi:points, got {s:?}");
        let sweep = Sweep {
            lo: parts[0].parse().context("sweep lo")?,
            hi: parts[1].parse().context("sweep hi")?,
            points: parts[2].parse().context("sweep points")?,
        };
        ensure!(sweep.points >= 1, "sweep needs at least one point");
        ensure!(
            sweep.lo > 0.0 && sweep.hi >= sweep.lo && sweep.hi.is_finite(),
            "sweep range must satisfy 0 < lo <= hi"
        );
        ensure!(sweep.points == 1 || sweep.hi > sweep.lo, "sweep with several points needs hi > lo");
        Ok(sweep)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveSpec {
    Logistic {
        seed: u64,
        samples: usize,
        features: usize,
        beta: f64,
        data: Option<PathBuf>,
    },
    Quadratic {
        seed: u64,
        dim: usize,
    },
}

impl Default for ObjectiveSpec {
    fn default() -> Self {
        ObjectiveSpec::Logistic {
            seed: 1,
            samples: 10,
            features: 3,
            beta: 1.0,
            data: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsitySpec {
    pub nodes: usize,
    pub edges: Vec<usize>,
    pub seeds: u64,
    pub graphs: Vec<GraphSource>,
    pub strict: bool,
}

impl Default for SparsitySpec {
    fn default() -> Self {
        Self {
            nodes: 10,
            edges: vec![15, 30, 90],
            seeds: 5,
            graphs: Vec::new(),
            strict: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub graph: GraphSource,
    pub algorithms: Vec<Algorithm>,
    pub alpha: f64,
    pub diminishing: Option<f64>,
    pub sweep: Option<Sweep>,
    pub objective: ObjectiveSpec,
    pub iters: usize,
    pub horizon: usize,
    pub sparsity: SparsitySpec,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            graph: GraphSource::Fig1,
            algorithms: vec![Algorithm::AddOpt, Algorithm::Dextra { theta: Algorithm::DEFAULT_THETA }, Algorithm::GradientPush],
            alpha: 0.1,
            diminishing: None,
            sweep: None,
            objective: ObjectiveSpec::default(),
            iters: 500,
            horizon: 200,
            sparsity: SparsitySpec::default(),
            out: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// The schedule an algorithm runs with: gradient-push takes the
    /// diminishing schedule when one is configured.
    pub fn step_for(&self, alg: Algorithm) -> StepSize {
        match (alg, self.diminishing) {
            (Algorithm::GradientPush, Some(scale)) => StepSize::InvSqrt(scale),
            _ => StepSize::Constant(self.alpha),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base).with_context(|| format!("in config {}", path.display()))
    }

    /// Parses config text; relative file paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| anyhow!("{e}"))?;
        let mut cfg = ExperimentConfig::default();
        let known = ["graph", "run", "step", "logistic", "quadratic", "sparsity", "output"];
        for (section, _) in ini.iter() {
            match section {
                Some(s) if known.contains(&s) => {}
                Some(s) => bail!("unknown section [{s}]"),
                None => {}
            }
        }
        if let Some(props) = ini.general_section().iter().next() {
            bail!("key {:?} appears outside any section", props.0);
        }
        let get = |sec: &str, key: &str| ini.section(Some(sec)).and_then(|p| p.get(key));

        if let Some(src) = get("graph", "source") {
            cfg.graph = match src.parse()? {
                GraphSource::File(p) => GraphSource::File(base.join(p)),
                other => other,
            };
        }
        if let Some(list) = get("run", "algorithms") {
            cfg.algorithms = parse_algorithms(list)?;
        }
        if let Some(v) = get("run", "iters") {
            cfg.iters = v.parse().context("run.iters")?;
        }
        if let Some(v) = get("run", "horizon") {
            cfg.horizon = v.parse().context("run.horizon")?;
        }
        if let Some(v) = get("step", "alpha") {
            cfg.alpha = v.parse().context("step.alpha")?;
        }
        if let Some(v) = get("step", "diminishing") {
            cfg.diminishing = Some(v.parse().context("step.diminishing")?);
        }
        if let Some(v) = get("step", "sweep") {
            cfg.sweep = Some(v.parse()?);
        }

        match (ini.section(Some("logistic")), ini.section(Some("quadratic"))) {
            (Some(_), Some(_)) => bail!("give exactly one of [logistic] and [quadratic]"),
            (Some(_), None) => {
                let mut spec = ObjectiveSpec::default();
                if let ObjectiveSpec::Logistic { seed, samples, features, beta, data } = &mut spec {
                    if let Some(v) = get("logistic", "seed") {
                        *seed = v.parse().context("logistic.seed")?;
                    }
                    if let Some(v) = get("logistic", "agents_samples") {
                        *samples = v.parse().context("logistic.agents_samples")?;
                    }
                    if let Some(v) = get("logistic", "features") {
                        *features = v.parse().context("logistic.features")?;
                    }
                    if let Some(v) = get("logistic", "beta") {
                        *beta = v.parse().context("logistic.beta")?;
                    }
                    *data = get("logistic", "data").map(|p| base.join(p));
                }
                cfg.objective = spec;
            }
            (None, Some(_)) => {
                cfg.objective = ObjectiveSpec::Quadratic {
                    seed: get("quadratic", "seed").map_or(Ok(1), str::parse).context("quadratic.seed")?,
                    dim: get("quadratic", "dim").map_or(Ok(3), str::parse).context("quadratic.dim")?,
                };
            }
            (None, None) => {}
        }

        if let Some(v) = get("sparsity", "nodes") {
            cfg.sparsity.nodes = v.parse().context("sparsity.nodes")?;
        }
        if let Some(v) = get("sparsity", "graphs") {
            cfg.sparsity.graphs = v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    Ok(match s.parse()? {
                        GraphSource::File(p) => GraphSource::File(base.join(p)),
                        other => other,
                    })
                })
                .collect::<Result<_>>()?;
        }
        if let Some(v) = get("sparsity", "edges") {
            cfg.sparsity.edges = parse_list(v).context("sparsity.edges")?;
        }
        if let Some(v) = get("sparsity", "seeds") {
            cfg.sparsity.seeds = v.parse().context("sparsity.seeds")?;
        }
        if let Some(v) = get("sparsity", "strict") {
            cfg.sparsity.strict = v.parse().context("sparsity.strict")?;
        }
        if let Some(v) = get("output", "dir") {
            cfg.out = base.join(v);
        }
        Ok(cfg)
    }

    /// Checks the invariants that do not depend on which study runs.
    pub fn validate(&self) -> Result<()> {
        ensure!(!self.algorithms.is_empty(), "no algorithms requested");
        let mut names: Vec<&str> = self.algorithms.iter().map(|a| a.name()).collect();
        names.sort_unstable();
        names.dedup();
        ensure!(names.len() == self.algorithms.len(), "an algorithm is listed twice");
        ensure!(self.alpha.is_finite() && self.alpha >= 0.0, "alpha must be >= 0");
        if let Some(d) = self.diminishing {
            ensure!(d.is_finite() && d > 0.0, "diminishing scale must be positive");
        }
        for src in std::iter::once(&self.graph).chain(&self.sparsity.graphs) {
            if let GraphSource::File(p) = src {
                ensure!(p.exists(), "graph file {} does not exist", p.display());
            }
        }
        if let ObjectiveSpec::Logistic { data: Some(p), .. } = &self.objective {
            ensure!(p.exists(), "data file {} does not exist", p.display());
        }
        ensure!(!self.sparsity.edges.is_empty(), "sparsity edge list is empty");
        ensure!(self.sparsity.graphs.len() != 1, "a sparsity chain needs at least two graphs");
        ensure!(self.sparsity.seeds >= 1, "sparsity needs at least one seed");
        Ok(())
    }
}

pub fn parse_algorithms(list: &str) -> Result<Vec<Algorithm>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<Algorithm>().map_err(|e| anyhow!("{e}")))
        .collect()
}

pub fn parse_list<T: FromStr>(list: &str) -> Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().with_context(|| format!("bad list entry {s:?}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_sources() {
        assert_eq!("fig1".parse::<GraphSource>().unwrap(), GraphSource::Fig1);
        assert_eq!("cycle:5".parse::<GraphSource>().unwrap(), GraphSource::Cycle(5));
        assert_eq!(
            "random:10:4:7".parse::<GraphSource>().unwrap(),
            GraphSource::Random { n: 10, extra: 4, seed: 7 }
        );
        assert_eq!(
            "nets/a.txt".parse::<GraphSource>().unwrap(),
            GraphSource::File("nets/a.txt".into())
        );
        assert!("cycle:x".parse::<GraphSource>().is_err());
    }

    #[test]
    fn sweep_grid() {
        let s: Sweep = "0.1:0.5:5".parse().unwrap();
        let g = s.grid();
        assert_eq!(g.len(), 5);
        assert!((g[4] - 0.5).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert_eq!("0.2:0.2:1".parse::<Sweep>().unwrap().grid(), vec![0.2]);
        for bad in ["0.1:0.5", "0:1:3", "0.5:0.1:3", "0.1:0.5:0", "0.1:0.1:3"] {
            assert!(bad.parse::<Sweep>().is_err(), "{bad}");
        }
    }

    #[test]
    fn full_config() {
        let text = "[graph]\nsource = cycle:6\n[run]\nalgorithms = addopt, gp\niters = 40\n\
                    [step]\nalpha = 0.05\ndiminishing = 2\nsweep = 0.01:0.1:10\n\
                    [quadratic]\nseed = 4\ndim = 2\n[sparsity]\nnodes = 6\nedges = 6, 12\nseeds = 2\nstrict = false\n\
                    [output]\ndir = res\n";
        let cfg = ExperimentConfig::parse(text, Path::new("/tmp/x")).unwrap();
        assert_eq!(cfg.graph, GraphSource::Cycle(6));
        assert_eq!(cfg.algorithms, vec![Algorithm::AddOpt, Algorithm::GradientPush]);
        assert_eq!(cfg.iters, 40);
        assert_eq!(cfg.step_for(Algorithm::GradientPush), StepSize::InvSqrt(2.0));
        assert_eq!(cfg.step_for(Algorithm::AddOpt), StepSize::Constant(0.05));
        assert_eq!(cfg.objective, ObjectiveSpec::Quadratic { seed: 4, dim: 2 });
        assert_eq!(
            cfg.sparsity,
            SparsitySpec { nodes: 6, edges: vec![6, 12], seeds: 2, graphs: vec![], strict: false }
        );
        assert_eq!(cfg.out, PathBuf::from("/tmp/x/res"));
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn config_errors() {
        let base = Path::new(".");
        assert!(ExperimentConfig::parse("[logistic]\n[quadratic]\n", base).is_err());
        assert!(ExperimentConfig::parse("[bogus]\na = 1\n", base).is_err());
        assert!(ExperimentConfig::parse("a = 1\n", base).is_err());
        assert!(ExperimentConfig::parse("[run]\niters = many\n", base).is_err());
        let cfg = ExperimentConfig::parse("[graph]\nsource = /no/such/file\n", base).unwrap();
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig::parse("[run]\nalgorithms = addopt, addopt\n", base).unwrap();
        assert!(cfg.validate().is_err());
    }
}
