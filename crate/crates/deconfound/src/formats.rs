//! Text and CSV formats: network checkpoints, policies, scenarios, demonstrations and the
//! per-experiment tables.
//!
//! Every real number is written with 17 significant digits so that reading a file back
//! reproduces the in-memory value bit for bit.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};
use std::path::Path;

use deconfound_core::dagger::CurvePoint;
use deconfound_core::discovery::variational::ElboLog;
use deconfound_core::discovery::VariationalModel;
use deconfound_core::env::{Action, CoreState, Observation, Rotation, Scenario, ScenarioKind};
use deconfound_core::expert::{DemoSet, Transition};
use deconfound_core::intervention::TraceRow;
use deconfound_core::nn::{Activation, Network, OutputHead};
use deconfound_core::policy::{BcPolicy, GraphPolicy, Normalizer, TrainingLog};
use deconfound_core::CausalGraph;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unexpected end of input, expected {0}")]
    Eof(&'static str),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, FormatError>;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn reals(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 24);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{v:.16e}");
    }
    s
}

/// Line reader that tracks positions for error messages and skips blank lines.
pub struct Lines<R> {
    inner: R,
    line: usize,
    peeked: Option<String>,
}

impl<R: BufRead> Lines<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            line: 0,
            peeked: None,
        }
    }

    pub fn line(&self) -> usize {
        self.line
    }

    fn fetch(&mut self) -> Result<Option<String>> {
        if let Some(p) = self.peeked.take() {
            return Ok(Some(p));
        }
        loop {
            let mut buf = String::new();
            if self.inner.read_line(&mut buf)? == 0 {
                return Ok(None);
            }
            self.line += 1;
            let trimmed = buf.trim_end_matches(['\n', '\r']);
            if !trimmed.trim().is_empty() {
                return Ok(Some(trimmed.to_string()));
            }
        }
    }

    pub fn next_line(&mut self, what: &'static str) -> Result<String> {
        self.fetch()?.ok_or(FormatError::Eof(what))
    }

    pub fn peek(&mut self) -> Result<Option<&str>> {
        if self.peeked.is_none() {
            self.peeked = self.fetch()?;
        }
        Ok(self.peeked.as_deref())
    }

    pub fn error(&self, message: impl Into<String>) -> FormatError {
        FormatError::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    /// Reads `key value...` and returns the values.
    pub fn keyed(&mut self, key: &'static str) -> Result<Vec<String>> {
        let line = self.next_line(key)?;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some(k) if k == key => Ok(parts.map(str::to_string).collect()),
            other => Err(self.error(format!("expected `{key}`, found `{}`", other.unwrap_or("")))),
        }
    }

    pub fn keyed_one(&mut self, key: &'static str) -> Result<String> {
        let mut v = self.keyed(key)?;
        if v.len() != 1 {
            return Err(self.error(format!("`{key}` takes exactly one value")));
        }
        Ok(v.remove(0))
    }

    pub fn parse<T: std::str::FromStr>(&self, s: &str, what: &str) -> Result<T> {
        s.parse().map_err(|_| self.error(format!("invalid {what} `{s}`")))
    }

    pub fn parse_all<T: std::str::FromStr>(&self, values: &[String], what: &str) -> Result<Vec<T>> {
        values.iter().map(|v| self.parse(v, what)).collect()
    }

    pub fn expect_header(&mut self, header: &str) -> Result<()> {
        let line = self.next_line("header")?;
        if line.trim() != header {
            return Err(self.error(format!("expected `{header}`, found `{line}`")));
        }
        Ok(())
    }
}

pub fn write_network(out: &mut impl Write, net: &Network) -> io::Result<()> {
    writeln!(out, "network v1")?;
    let sizes: Vec<String> = net.layer_sizes().iter().map(usize::to_string).collect();
    writeln!(out, "layer_sizes {}", sizes.join(" "))?;
    writeln!(out, "hidden {}", net.hidden_activation().name())?;
    writeln!(out, "head {}", net.output_head().name())?;
    for (i, layer) in net.layers().iter().enumerate() {
        writeln!(out, "weights {i} {}", reals(layer.weights()))?;
        writeln!(out, "biases {i} {}", reals(layer.biases()))?;
    }
    writeln!(out, "end network")
}

pub fn read_network<R: BufRead>(lines: &mut Lines<R>) -> Result<Network> {
    lines.expect_header("network v1")?;
    let sizes: Vec<usize> = {
        let v = lines.keyed("layer_sizes")?;
        lines.parse_all(&v, "layer size")?
    };
    let hidden = lines.keyed_one("hidden")?;
    let hidden = Activation::from_name(&hidden).ok_or_else(|| lines.error(format!("unknown activation `{hidden}`")))?;
    let head = lines.keyed_one("head")?;
    let head = OutputHead::from_name(&head).ok_or_else(|| lines.error(format!("unknown output head `{head}`")))?;
    let mut params = Vec::new();
    for i in 0..sizes.len().saturating_sub(1) {
        let mut row = |key: &'static str| -> Result<Vec<f64>> {
            let v = lines.keyed(key)?;
            if v.first().map(String::as_str) != Some(i.to_string().as_str()) {
                return Err(lines.error(format!("expected {key} for layer {i}")));
            }
            lines.parse_all(&v[1..], "real")
        };
        let w = row("weights")?;
        let b = row("biases")?;
        params.push((w, b));
    }
    lines.expect_header("end network")?;
    Network::from_parts(&sizes, hidden, head, params).map_err(|e| lines.error(e.to_string()))
}

fn write_normalizer(out: &mut impl Write, n: &Normalizer) -> io::Result<()> {
    writeln!(out, "normalizer_mean {}", reals(&n.mean))?;
    writeln!(out, "normalizer_scale {}", reals(&n.scale))
}

fn read_normalizer<R: BufRead>(lines: &mut Lines<R>) -> Result<Normalizer> {
    let mean = lines.keyed("normalizer_mean")?;
    let mean = lines.parse_all(&mean, "real")?;
    let scale = lines.keyed("normalizer_scale")?;
    let scale = lines.parse_all(&scale, "real")?;
    Ok(Normalizer { mean, scale })
}

pub fn write_graph_policy(out: &mut impl Write, policy: &GraphPolicy) -> io::Result<()> {
    writeln!(out, "graph-policy v1")?;
    writeln!(out, "mask_dim {}", policy.n)?;
    write_normalizer(out, &policy.normalizer)?;
    write_network(out, &policy.net)
}

pub fn read_graph_policy<R: BufRead>(lines: &mut Lines<R>) -> Result<GraphPolicy> {
    lines.expect_header("graph-policy v1")?;
    let n = lines.keyed_one("mask_dim")?;
    let n: usize = lines.parse(&n, "mask dimension")?;
    let normalizer = read_normalizer(lines)?;
    let net = read_network(lines)?;
    if net.input_dim() != 2 * n {
        return Err(lines.error(format!("network input {} does not match mask_dim {n}", net.input_dim())));
    }
    Ok(GraphPolicy { net, n, normalizer })
}

pub fn write_bc_policy(out: &mut impl Write, policy: &BcPolicy) -> io::Result<()> {
    writeln!(out, "bc-policy v1")?;
    write_normalizer(out, &policy.normalizer)?;
    write_network(out, &policy.net)
}

pub fn read_bc_policy<R: BufRead>(lines: &mut Lines<R>) -> Result<BcPolicy> {
    lines.expect_header("bc-policy v1")?;
    let normalizer = read_normalizer(lines)?;
    let net = read_network(lines)?;
    Ok(BcPolicy { net, normalizer })
}

pub fn scenario_record(s: &Scenario) -> String {
    let perm: Vec<String> = s.permutation.iter().map(usize::to_string).collect();
    let rotation = match &s.rotation {
        None => "none".to_string(),
        Some(r) => {
            let flat: Vec<String> = r.0.iter().flatten().map(|v| real(*v)).collect();
            flat.join(",")
        }
    };
    format!(
        "scenario kind={} permutation={} rotation={} noise_seed={}",
        s.kind.name(),
        perm.join(","),
        rotation,
        s.noise_seed
    )
}

pub fn parse_scenario(line: &str) -> std::result::Result<Scenario, String> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some("scenario") {
        return Err("expected a scenario record".into());
    }
    let (mut kind, mut permutation, mut rotation, mut noise_seed) = (None, None, None, None);
    for part in parts {
        let (key, value) = part.split_once('=').ok_or_else(|| format!("malformed field `{part}`"))?;
        match key {
            "kind" => kind = Some(ScenarioKind::from_name(value).ok_or_else(|| format!("unknown scenario kind `{value}`"))?),
            "permutation" => {
                let v: Vec<usize> = value
                    .split(',')
                    .map(|p| p.parse().map_err(|_| format!("invalid permutation `{value}`")))
                    .collect::<std::result::Result<_, _>>()?;
                let arr: [usize; 3] = v.try_into().map_err(|_| "permutation needs 3 entries".to_string())?;
                permutation = Some(arr);
            }
            "rotation" => {
                rotation = Some(if value == "none" {
                    None
                } else {
                    let v: Vec<f64> = value
                        .split(',')
                        .map(|p| p.parse().map_err(|_| format!("invalid rotation entry `{p}`")))
                        .collect::<std::result::Result<_, _>>()?;
                    if v.len() != 9 {
                        return Err("rotation needs 9 entries".into());
                    }
                    Some(Rotation([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]]))
                })
            }
            "noise_seed" => noise_seed = Some(value.parse().map_err(|_| format!("invalid noise seed `{value}`"))?),
            other => return Err(format!("unknown scenario field `{other}`")),
        }
    }
    let scenario = Scenario {
        kind: kind.ok_or("missing kind")?,
        permutation: permutation.ok_or("missing permutation")?,
        rotation: rotation.ok_or("missing rotation")?,
        noise_seed: noise_seed.ok_or("missing noise_seed")?,
    };
    if !scenario.is_valid() {
        return Err("scenario record is inconsistent".into());
    }
    Ok(scenario)
}

pub const DEMO_HEADER: &str = "demo-file v1";
pub const DEMO_COLUMNS: &str = "episode_id,t,x0,x1,x2,action,position,velocity";

/// Header block, then one transition per line. The hidden physical state is appended so the
/// expert can be queried again on loaded demonstrations.
pub fn write_demos(out: &mut impl Write, demos: &DemoSet) -> io::Result<()> {
    writeln!(out, "{DEMO_HEADER}")?;
    writeln!(out, "{}", scenario_record(&demos.scenario))?;
    writeln!(out, "seed {}", demos.seed)?;
    writeln!(out, "expert_name {}", demos.expert_name)?;
    writeln!(out, "transitions {}", demos.len())?;
    writeln!(out, "{DEMO_COLUMNS}")?;
    for t in &demos.transitions {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            t.episode_id,
            t.t,
            real(t.observation.x[0]),
            real(t.observation.x[1]),
            real(t.observation.x[2]),
            t.action.index(),
            real(t.state.position),
            real(t.state.velocity)
        )?;
    }
    Ok(())
}

pub fn read_demos<R: BufRead>(lines: &mut Lines<R>) -> Result<DemoSet> {
    lines.expect_header(DEMO_HEADER)?;
    let record = lines.next_line("scenario record")?;
    let scenario = parse_scenario(&record).map_err(|e| lines.error(e))?;
    let seed = lines.keyed_one("seed")?;
    let seed = lines.parse(&seed, "seed")?;
    let name = lines.keyed("expert_name")?.join(" ");
    let count = lines.keyed_one("transitions")?;
    let count: usize = lines.parse(&count, "transition count")?;
    lines.expect_header(DEMO_COLUMNS)?;
    let mask = scenario.true_cause_mask();
    let mut transitions = Vec::with_capacity(count);
    for _ in 0..count {
        let line = lines.next_line("transition")?;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(lines.error(format!("expected 8 fields, found {}", f.len())));
        }
        let action: usize = lines.parse(f[5], "action")?;
        let action = Action::try_from(action).map_err(|_| lines.error(format!("action {action} out of range")))?;
        let t: u32 = lines.parse(f[1], "time index")?;
        transitions.push(Transition {
            observation: Observation {
                x: [lines.parse(f[2], "real")?, lines.parse(f[3], "real")?, lines.parse(f[4], "real")?],
                true_cause_mask: mask,
            },
            state: CoreState {
                position: lines.parse(f[6], "real")?,
                velocity: lines.parse(f[7], "real")?,
                step_count: t,
            },
            action,
            episode_id: lines.parse(f[0], "episode id")?,
            t,
        });
    }
    if lines.peek()?.is_some() {
        return Err(lines.error("trailing lines after the declared transitions"));
    }
    let demos = DemoSet {
        transitions,
        scenario,
        expert_name: name,
        seed,
    };
    demos.validate().map_err(|e| lines.error(e.to_string()))?;
    Ok(demos)
}

pub fn write_variational(out: &mut impl Write, model: &VariationalModel) -> io::Result<()> {
    writeln!(out, "variational v1")?;
    writeln!(out, "latent_dim {}", model.latent_dim)?;
    writeln!(out, "prior_strength {}", real(model.prior_strength))?;
    writeln!(out, "gumbel_tau {}", real(model.gumbel_tau))?;
    write_network(out, &model.infer_net)?;
    write_graph_policy(out, &model.policy)?;
    write_network(out, &model.recon_net)
}

pub fn read_variational<R: BufRead>(lines: &mut Lines<R>) -> Result<VariationalModel> {
    lines.expect_header("variational v1")?;
    let latent_dim = lines.keyed_one("latent_dim")?;
    let latent_dim = lines.parse(&latent_dim, "latent dimension")?;
    let prior_strength = lines.keyed_one("prior_strength")?;
    let prior_strength = lines.parse(&prior_strength, "real")?;
    let gumbel_tau = lines.keyed_one("gumbel_tau")?;
    let gumbel_tau = lines.parse(&gumbel_tau, "real")?;
    Ok(VariationalModel {
        latent_dim,
        infer_net: read_network(lines)?,
        policy: read_graph_policy(lines)?,
        recon_net: read_network(lines)?,
        prior_strength,
        gumbel_tau,
    })
}

pub fn save(path: &Path, write: impl FnOnce(&mut io::BufWriter<std::fs::File>) -> io::Result<()>) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = io::BufWriter::new(std::fs::File::create(path)?);
    write(&mut out)?;
    out.flush()
}

pub fn load<T>(path: &Path, read: impl FnOnce(&mut Lines<io::BufReader<std::fs::File>>) -> Result<T>) -> Result<T> {
    let file = std::fs::File::open(path)?;
    read(&mut Lines::new(io::BufReader::new(file)))
}

fn csv_writer(out: impl Write) -> csv::Writer<impl Write> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

pub fn write_training_log(out: impl Write, log: &TrainingLog) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["epoch", "train_loss", "val_loss"])?;
    for e in &log.epochs {
        w.write_record([e.epoch.to_string(), real(e.train_loss), real(e.val_loss)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(out: impl Write, n: usize, trace: &[TraceRow]) -> Result<()> {
    let mut w = csv_writer(out);
    let mut header = vec!["episode_index".to_string(), "graph_bits".into(), "raw_score".into(), "standardized_score".into()];
    header.extend((1..=n).map(|i| format!("w_{i}")));
    header.extend(["b".to_string(), "mode_bits".into(), "mode_return_estimate".into()]);
    w.write_record(&header)?;
    for r in trace {
        let mut row = vec![r.episode_index.to_string(), r.graph.to_string(), real(r.raw_score), real(r.standardized_score)];
        row.extend(r.w.iter().map(|v| real(*v)));
        row.extend([real(r.b), r.mode.to_string(), real(r.mode_return_estimate)]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back the `(graph, raw_score, episode_index)` triples of a trace file.
pub fn read_trace_records(input: impl io::Read) -> Result<Vec<deconfound_core::intervention::InterventionRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row?;
        let bad = |m: &str| FormatError::Parse {
            line: i + 2,
            message: m.to_string(),
        };
        let episode_index = row.get(0).and_then(|v| v.parse().ok()).ok_or_else(|| bad("episode_index"))?;
        let graph: CausalGraph = row.get(1).and_then(|v| v.parse().ok()).ok_or_else(|| bad("graph_bits"))?;
        let score = row.get(2).and_then(|v| v.parse().ok()).ok_or_else(|| bad("raw_score"))?;
        out.push(deconfound_core::intervention::InterventionRecord {
            graph,
            score,
            episode_index,
        });
    }
    Ok(out)
}

pub fn write_mi(out: impl Write, rows: &[(usize, f64, f64)]) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["dim", "marginal_mi_bits", "conditional_mi_bits"])?;
    for (d, m, c) in rows {
        w.write_record([d.to_string(), real(*m), real(*c)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_curve(out: impl Write, curve: &[CurvePoint]) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["iteration", "cumulative_queries", "mean_return", "std_return"])?;
    for p in curve {
        w.write_record([p.iteration.to_string(), p.cumulative_queries.to_string(), real(p.mean_return), real(p.std_return)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_elbo_log(out: impl Write, log: &ElboLog) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["epoch", "elbo", "log_likelihood", "entropy", "log_b"])?;
    for e in &log.epochs {
        w.write_record([e.epoch.to_string(), real(e.elbo), real(e.log_likelihood), real(e.entropy), real(e.log_b)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use deconfound_core::expert::collect_demos;
    use deconfound_core::rng::rng_from_seed;

    fn roundtrip_network(net: &Network) -> Network {
        let mut buf = Vec::new();
        write_network(&mut buf, net).unwrap();
        read_network(&mut Lines::new(buf.as_slice())).unwrap()
    }

    #[test]
    fn network_roundtrips_bitwise() {
        let net = Network::init(&[6, 5, 3], Activation::Relu, OutputHead::Softmax, &mut rng_from_seed(1)).unwrap();
        let back = roundtrip_network(&net);
        assert!(net.parameters().zip(back.parameters()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(back, net);
    }

    #[test]
    fn awkward_reals_roundtrip() {
        for v in [f64::MIN_POSITIVE, 5e-324, -0.0, 1.0 / 3.0, f64::MAX, 0.1 + 0.2] {
            let back: f64 = real(v).parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn corrupted_network_reports_the_line() {
        let net = Network::zeros(&[2, 1], Activation::Tanh, OutputHead::Linear).unwrap();
        let mut buf = Vec::new();
        write_network(&mut buf, &net).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("head linear", "head cubic");
        match read_network(&mut Lines::new(text.as_bytes())) {
            Err(FormatError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scenario_records_roundtrip() {
        for kind in [ScenarioKind::Original, ScenarioKind::Confounded, ScenarioKind::ConfoundedEntangled] {
            let s = Scenario::new(kind, 17);
            assert_eq!(parse_scenario(&scenario_record(&s)).unwrap(), s);
        }
        assert!(parse_scenario("scenario kind=original permutation=0,0,1 rotation=none noise_seed=1").is_err());
    }

    #[test]
    fn demos_roundtrip() {
        let scenario = Scenario::new(ScenarioKind::Confounded, 3);
        let demos = collect_demos(&scenario, 2, 4).unwrap();
        let mut buf = Vec::new();
        write_demos(&mut buf, &demos).unwrap();
        let back = read_demos(&mut Lines::new(buf.as_slice())).unwrap();
        assert_eq!(back.transitions.len(), demos.transitions.len());
        for (a, b) in back.transitions.iter().zip(&demos.transitions) {
            assert_eq!(a.observation, b.observation);
            assert_eq!(a.action, b.action);
            assert_eq!((a.state.position, a.state.velocity), (b.state.position, b.state.velocity));
        }
        assert_eq!(back.scenario, demos.scenario);
    }

    #[test]
    fn truncated_demo_file_is_rejected() {
        let demos = collect_demos(&Scenario::new(ScenarioKind::Original, 1), 1, 1).unwrap();
        let mut buf = Vec::new();
        write_demos(&mut buf, &demos).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(matches!(read_demos(&mut Lines::new(cut.as_bytes())), Err(FormatError::Eof(_))));
    }
}
