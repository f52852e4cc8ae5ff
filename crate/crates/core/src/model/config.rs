use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aggregation::AggregationKind;
use crate::error::{Error, Result};
use crate::layers::KeepSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Node,
    Graph,
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "node" => Ok(Task::Node),
            "graph" => Ok(Task::Graph),
            other => Err(Error::Config(format!("unknown task `{other}`"))),
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Node => "node",
            Task::Graph => "graph",
        })
    }
}

/// Keep counts used by the deep node models, outermost first.
pub const DEEP_KEEP_SCHEDULE: [usize; 4] = [200, 150, 100, 50];

/// Complete description of an architecture.
///
/// Node task: `num_gpconv` convolutions, the last one mapping to
/// `num_classes`. With DropNode, the `k`-th entry of `dropnode` is a
/// downsampling layer after convolution `k`, mirrored by an upsampling layer
/// after convolution `num_gpconv - 2 - k`.
///
/// Graph task: `num_gpconv` convolutions of width `hidden_dim` (the first
/// `dropnode.len()` of them followed by a downsampling layer), mean pooling,
/// `num_fc` hidden fully-connected layers of width `fc_dim`, and a final
/// linear classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub task: Task,
    pub aggregation: AggregationKind,
    pub input_dim: usize,
    pub num_gpconv: usize,
    pub hidden_dim: usize,
    pub dropnode: Vec<KeepSpec>,
    pub paired_upsample: bool,
    pub dropout_rate: f64,
    pub num_fc: usize,
    pub fc_dim: usize,
    pub num_classes: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// Two convolutions, hidden width 64, dropout 0.7.
    pub fn node_default(input_dim: usize, num_classes: usize) -> Self {
        Self {
            task: Task::Node,
            aggregation: AggregationKind::GpconvColStochastic,
            input_dim,
            num_gpconv: 2,
            hidden_dim: 64,
            dropnode: Vec::new(),
            paired_upsample: false,
            dropout_rate: 0.7,
            num_fc: 0,
            fc_dim: 0,
            num_classes,
            seed: 0,
        }
    }

    /// Three convolutions with one down/up pair keeping 200 nodes.
    pub fn node_dropnode(input_dim: usize, num_classes: usize) -> Self {
        Self::deep_node(input_dim, num_classes, 3, true)
    }

    /// `layers` convolutions; with DropNode the pairs follow
    /// [`DEEP_KEEP_SCHEDULE`], one pair per two extra layers.
    pub fn deep_node(input_dim: usize, num_classes: usize, layers: usize, dropnode: bool) -> Self {
        let mut config = Self {
            num_gpconv: layers,
            ..Self::node_default(input_dim, num_classes)
        };
        if dropnode {
            let pairs = (layers.saturating_sub(1) / 2).min(DEEP_KEEP_SCHEDULE.len());
            config.dropnode = DEEP_KEEP_SCHEDULE[..pairs].iter().map(|&c| KeepSpec::Count(c)).collect();
            config.paired_upsample = true;
            config.dropout_rate = 0.0;
        }
        config
    }

    /// One convolution, two hidden FC layers of 512 units, dropout 0.5.
    pub fn graph_default(input_dim: usize, num_classes: usize) -> Self {
        Self {
            task: Task::Graph,
            aggregation: AggregationKind::GpconvColStochastic,
            input_dim,
            num_gpconv: 1,
            hidden_dim: 512,
            dropnode: Vec::new(),
            paired_upsample: false,
            dropout_rate: 0.5,
            num_fc: 2,
            fc_dim: 512,
            num_classes,
            seed: 0,
        }
    }

    /// One convolution + downsampling block with keep ratio 0.75, no dropout.
    pub fn graph_dropnode(input_dim: usize, num_classes: usize) -> Self {
        Self {
            dropnode: vec![KeepSpec::Ratio(0.75)],
            dropout_rate: 0.0,
            ..Self::graph_default(input_dim, num_classes)
        }
    }

    pub fn has_dropnode(&self) -> bool {
        !self.dropnode.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.input_dim == 0 || self.hidden_dim == 0 || self.num_classes == 0 {
            return fail("input_dim, hidden_dim and num_classes must be positive".into());
        }
        if self.num_gpconv == 0 {
            return fail("num_gpconv must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        if self.has_dropnode() && self.dropout_rate > 0.0 {
            return fail("DropNode and dropout are mutually exclusive".into());
        }
        for spec in &self.dropnode {
            spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        let k = self.dropnode.len();
        match self.task {
            Task::Node => {
                if self.num_fc != 0 {
                    return fail("node models have no FC layers (num_fc must be 0)".into());
                }
                if k > 0 && !self.paired_upsample {
                    return fail("node-task DropNode needs paired upsampling layers".into());
                }
                if k > 0 && self.num_gpconv < 2 * k + 1 {
                    return fail(format!(
                        "{k} down/up pair(s) need at least {} convolutions, got {}",
                        2 * k + 1,
                        self.num_gpconv
                    ));
                }
            }
            Task::Graph => {
                if self.paired_upsample {
                    return fail("graph-task DropNode does not use upsampling".into());
                }
                if k > self.num_gpconv {
                    return fail(format!(
                        "{k} downsampling layer(s) but only {} convolution(s)",
                        self.num_gpconv
                    ));
                }
                if self.num_fc > 0 && self.fc_dim == 0 {
                    return fail("fc_dim must be positive".into());
                }
                if self.dropnode.iter().any(|s| matches!(s, KeepSpec::Count(_))) {
                    return fail("graph-task DropNode needs keep ratios".into());
                }
            }
        }
        Ok(())
    }

    /// Applies `key = value` pairs from a flat config text. `#` starts a comment.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (lineno, key, value) in parse_kv(text)? {
            self.set(&key, &value)
                .map_err(|e| Error::Config(format!("line {lineno}: {e}")))?;
        }
        Ok(())
    }

    /// Sets one field by name. Returns an error for unknown keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
        }
        match key {
            "task" => self.task = value.parse()?,
            "aggregation" => self.aggregation = value.parse()?,
            "input_dim" => self.input_dim = num(key, value)?,
            "num_gpconv" => self.num_gpconv = num(key, value)?,
            "hidden_dim" => self.hidden_dim = num(key, value)?,
            "dropnode" => self.dropnode = parse_schedule(value)?,
            "paired_upsample" => self.paired_upsample = num(key, value)?,
            "dropout_rate" => self.dropout_rate = num(key, value)?,
            "num_fc" => self.num_fc = num(key, value)?,
            "fc_dim" => self.fc_dim = num(key, value)?,
            "num_classes" => self.num_classes = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let schedule = format_schedule(&self.dropnode);
        let _ = writeln!(out, "task = {}", self.task);
        let _ = writeln!(out, "aggregation = {}", self.aggregation);
        let _ = writeln!(out, "input_dim = {}", self.input_dim);
        let _ = writeln!(out, "num_gpconv = {}", self.num_gpconv);
        let _ = writeln!(out, "hidden_dim = {}", self.hidden_dim);
        let _ = writeln!(out, "dropnode = {schedule}");
        let _ = writeln!(out, "paired_upsample = {}", self.paired_upsample);
        let _ = writeln!(out, "dropout_rate = {}", self.dropout_rate);
        let _ = writeln!(out, "num_fc = {}", self.num_fc);
        let _ = writeln!(out, "fc_dim = {}", self.fc_dim);
        let _ = writeln!(out, "num_classes = {}", self.num_classes);
        let _ = writeln!(out, "seed = {}", self.seed);
        out
    }

    pub fn load(path: &Path, base: ModelConfig) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = base;
        config.apply_kv(&text)?;
        Ok(config)
    }
}

/// Splits a flat config text into `(line number, key, value)` triples.
/// Blank lines and `#` comments are skipped.
pub fn parse_kv(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
        out.push((lineno + 1, key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// `200,150` keeps counts, `0.75` a ratio; `none` or empty disables DropNode.
pub fn parse_schedule(value: &str) -> Result<Vec<KeepSpec>> {
    let value = value.trim();
    if value.is_empty() || value.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|item| {
            let item = item.trim();
            let spec = if item.contains('.') {
                item.parse().map(KeepSpec::Ratio).ok()
            } else {
                item.parse().map(KeepSpec::Count).ok()
            };
            let spec = spec.ok_or_else(|| Error::Config(format!("bad DropNode entry `{item}`")))?;
            spec.validate().map_err(|e| Error::Config(e.to_string()))?;
            Ok(spec)
        })
        .collect()
}

pub fn format_schedule(schedule: &[KeepSpec]) -> String {
    if schedule.is_empty() {
        return "none".into();
    }
    schedule
        .iter()
        .map(|s| match s {
            KeepSpec::Count(c) => c.to_string(),
            KeepSpec::Ratio(p) => format!("{p:?}"),
        })
        .collect::<Vec<_>>()
        .join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for c in [
            ModelConfig::node_default(10, 3),
            ModelConfig::node_dropnode(10, 3),
            ModelConfig::graph_default(10, 2),
            ModelConfig::graph_dropnode(10, 2),
        ] {
            c.validate().unwrap();
        }
        for layers in [3, 5, 7, 9] {
            let c = ModelConfig::deep_node(10, 3, layers, true);
            c.validate().unwrap();
            assert_eq!(c.dropnode.len(), (layers - 1) / 2);
        }
    }

    #[test]
    fn reference_hyperparameters() {
        let n = ModelConfig::node_default(1433, 7);
        assert_eq!((n.num_gpconv, n.hidden_dim, n.dropout_rate), (2, 64, 0.7));
        let d = ModelConfig::node_dropnode(1433, 7);
        assert_eq!((d.num_gpconv, d.hidden_dim, d.dropout_rate), (3, 64, 0.0));
        assert_eq!(d.dropnode, vec![KeepSpec::Count(200)]);
        let g = ModelConfig::graph_dropnode(8, 2);
        assert_eq!((g.num_gpconv, g.num_fc, g.fc_dim, g.hidden_dim), (1, 2, 512, 512));
        assert_eq!(g.dropnode, vec![KeepSpec::Ratio(0.75)]);
        assert_eq!(ModelConfig::deep_node(5, 2, 9, true).dropnode.len(), 4);
    }

    #[test]
    fn invariants_rejected() {
        let mut c = ModelConfig::node_dropnode(10, 3);
        c.paired_upsample = false;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::node_dropnode(10, 3);
        c.dropout_rate = 0.5;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::graph_dropnode(10, 2);
        c.paired_upsample = true;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::node_dropnode(10, 3);
        c.num_gpconv = 2;
        assert!(c.validate().is_err());
    }

    #[test]
    fn kv_round_trip() {
        let c = ModelConfig::deep_node(1433, 7, 7, true);
        let mut back = ModelConfig::graph_default(1, 1);
        back.apply_kv(&c.to_kv()).unwrap();
        assert_eq!(back, c);
        let g = ModelConfig::graph_dropnode(9, 2);
        let mut back = ModelConfig::node_default(1, 1);
        back.apply_kv(&g.to_kv()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn kv_errors_name_the_line() {
        let mut c = ModelConfig::node_default(4, 2);
        let err = c.apply_kv("hidden_dim = 16\n\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert_eq!(c.hidden_dim, 16);
        assert!(c.apply_kv("dropnode = 0.5,abc").is_err());
    }
}
