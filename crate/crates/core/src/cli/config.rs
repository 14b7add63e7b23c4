//! INI experiment files.
//!
//! ```ini
//! [model]
//! kind = iid            ; free | iid | rotation | periodic
//! l = 2
//! seed = 7
//! potential_width = 1.0
//! hop_mean = 1.0
//! hop_spread = 0.2
//!
//! [run]
//! command = lyapunov
//! z_re = 0.0
//! z_im = 1.0
//! x_start = -1.5        ; optional energy grid
//! x_stop = 1.5
//! x_count = 7
//!
//! [output]
//! format = csv
//! ```
//!
//! Periodic models list `period` blocks as `d0`, `v0`, `d1`, … with row-major
//! entries separated by spaces or commas.

use std::fmt;
use std::str::FromStr;

use ini::Ini;

use super::CliError;
use crate::ergodic::{ErgodicModel, HopSymbol, ModelKind};
use crate::linalg::RMat;
use crate::spectral::DEFAULT_Y_LADDER;
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Lyapunov,
    Ids,
    Thouless,
    Weyl,
    Kotani,
    AcScan,
    Verify,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Lyapunov,
        Command::Ids,
        Command::Thouless,
        Command::Weyl,
        Command::Kotani,
        Command::AcScan,
        Command::Verify,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Lyapunov => "lyapunov",
            Command::Ids => "ids",
            Command::Thouless => "thouless",
            Command::Weyl => "weyl",
            Command::Kotani => "kotani",
            Command::AcScan => "ac-scan",
            Command::Verify => "verify",
        }
    }

    /// Commands whose analyses live in the open upper half-plane.
    pub fn needs_upper_half_plane(self) -> bool {
        matches!(self, Command::Weyl | Command::Kotani | Command::Verify)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| CliError::validation("unknown_command", format!("'{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(CliError::validation(
                "invalid_format",
                format!("'{s}' (expected csv or json)"),
            )),
        }
    }
}

impl Format {
    pub fn as_str(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Uniform grid `start, …, stop` with `count` points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.start + step * i as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub z: C64,
    pub grid: Option<Grid>,
    pub y_ladder: Vec<f64>,
    /// Truncation size `N` for the IDS.
    pub sites: usize,
    pub steps: usize,
    pub depth: usize,
    pub orbit: usize,
    pub n_max: usize,
    pub reorth: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            z: C64::new(0.0, 1.0),
            grid: None,
            y_ladder: DEFAULT_Y_LADDER.to_vec(),
            sites: 1000,
            steps: 100_000,
            depth: 200,
            orbit: 10_000,
            n_max: 200,
            reorth: 5,
        }
    }
}

impl RunConfig {
    /// Energies to evaluate: the grid at height `Im z`, or `z` alone.
    pub fn points(&self) -> Vec<C64> {
        match &self.grid {
            Some(g) => g.points().into_iter().map(|x| C64::new(x, self.z.im)).collect(),
            None => vec![self.z],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct OutputConfig {
    pub path: Option<String>,
    pub format: Format,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub model: ErgodicModel,
    pub run: RunConfig,
    pub output: OutputConfig,
}

const MODEL: &str = "model";
const RUN: &str = "run";
const OUTPUT: &str = "output";

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(" ")
}

fn fmt_matrix(m: &RMat) -> String {
    let entries: Vec<f64> = (0..m.nrows())
        .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
        .map(|ij| m[ij])
        .collect();
    fmt_list(&entries)
}

/// Section reader that tracks which keys were consumed.
struct Section<'a> {
    name: &'static str,
    props: Option<&'a ini::Properties>,
    used: Vec<String>,
}

impl<'a> Section<'a> {
    fn new(doc: &'a Ini, name: &'static str) -> Self {
        Section {
            name,
            props: doc.section(Some(name)),
            used: Vec::new(),
        }
    }

    fn raw(&mut self, key: &str) -> Option<&'a str> {
        self.used.push(key.to_string());
        self.props.and_then(|p| p.get(key)).map(str::trim)
    }

    fn opt<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError> {
        let name = self.name;
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::validation("invalid_value", format!("{name}.{key} = '{v}'"))),
        }
    }

    fn get<T: FromStr>(&mut self, key: &str) -> Result<T, CliError> {
        let name = self.name;
        self.opt(key)?
            .ok_or_else(|| CliError::validation("missing_key", format!("{name}.{key}")))
    }

    fn or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.opt(key)?.unwrap_or(default))
    }

    fn list(&mut self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        let name = self.name;
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|_| CliError::validation("invalid_value", format!("{name}.{key} = '{v}'"))),
        }
    }

    fn finish(self) -> Result<(), CliError> {
        if let Some(p) = self.props {
            for (k, _) in p.iter() {
                if !self.used.iter().any(|u| u == k) {
                    return Err(CliError::validation("unknown_key", format!("{}.{k}", self.name)));
                }
            }
        }
        Ok(())
    }
}

fn model_from(doc: &Ini) -> Result<ErgodicModel, CliError> {
    let mut s = Section::new(doc, MODEL);
    if s.props.is_none() {
        return Err(CliError::validation("missing_section", "[model]"));
    }
    let kind: String = s.get("kind")?;
    let l: usize = s.or("l", 1)?;
    let kind = match kind.as_str() {
        "free" => ModelKind::Free {
            hop: s.or("hop", 1.0)?,
            shift: s.or("shift", 0.0)?,
        },
        "iid" => ModelKind::Iid {
            seed: s.get("seed")?,
            potential_width: s.or("potential_width", 1.0)?,
            hop_mean: s.or("hop_mean", 1.0)?,
            hop_spread: s.or("hop_spread", 0.0)?,
        },
        "rotation" => ModelKind::Rotation {
            alpha: s.get("alpha")?,
            theta0: s.or("theta0", 0.0)?,
            lambda: s.get("lambda")?,
            hop: match s.raw("hop") {
                None => HopSymbol::Constant(1.0),
                Some("cosine") => HopSymbol::Cosine,
                Some(v) => HopSymbol::Constant(
                    v.parse()
                        .map_err(|_| CliError::validation("invalid_value", format!("model.hop = '{v}'")))?,
                ),
            },
        },
        "periodic" => {
            let period: usize = s.get("period")?;
            if period == 0 {
                return Err(CliError::validation("count_nonpositive", "model.period"));
            }
            let mut blocks = Vec::with_capacity(period);
            for k in 0..period {
                let mut block = |name: String| -> Result<RMat, CliError> {
                    let v = s
                        .list(&name)?
                        .ok_or_else(|| CliError::validation("missing_key", format!("model.{name}")))?;
                    if v.len() != l * l {
                        return Err(CliError::validation(
                            "invalid_value",
                            format!("model.{name} needs {} entries, got {}", l * l, v.len()),
                        ));
                    }
                    Ok(RMat::from_row_slice(l, l, &v))
                };
                let d = block(format!("d{k}"))?;
                let v = block(format!("v{k}"))?;
                blocks.push((d, v));
            }
            ModelKind::Periodic { blocks }
        }
        other => return Err(CliError::validation("unknown_model_kind", format!("'{other}'"))),
    };
    s.finish()?;
    ErgodicModel::new(l, kind).map_err(|e| CliError::validation("invalid_model", e.to_string()))
}

fn run_from(doc: &Ini) -> Result<(Option<Command>, RunConfig), CliError> {
    let mut s = Section::new(doc, RUN);
    let d = RunConfig::default();
    let command = s.opt::<String>("command")?.map(|c| c.parse()).transpose()?;
    let z = C64::new(s.or("z_re", d.z.re)?, s.or("z_im", d.z.im)?);
    let grid = match (s.opt("x_start")?, s.opt("x_stop")?, s.opt("x_count")?) {
        (None, None, None) => None,
        (Some(start), Some(stop), Some(count)) => Some(Grid { start, stop, count }),
        _ => {
            return Err(CliError::validation(
                "grid_invalid",
                "x_start, x_stop and x_count must be given together",
            ))
        }
    };
    let run = RunConfig {
        z,
        grid,
        y_ladder: s.list("y_ladder")?.unwrap_or(d.y_ladder),
        sites: s.or("sites", d.sites)?,
        steps: s.or("steps", d.steps)?,
        depth: s.or("depth", d.depth)?,
        orbit: s.or("orbit", d.orbit)?,
        n_max: s.or("n_max", d.n_max)?,
        reorth: s.or("reorth", d.reorth)?,
    };
    s.finish()?;
    Ok((command, run))
}

fn output_from(doc: &Ini) -> Result<OutputConfig, CliError> {
    let mut s = Section::new(doc, OUTPUT);
    let out = OutputConfig {
        path: s.raw("path").map(str::to_string),
        format: s.or("format", Format::Csv)?,
    };
    s.finish()?;
    Ok(out)
}

impl ExperimentConfig {
    /// Parse, apply `section.key=value` overrides (bare keys go to `[run]`),
    /// then validate. `command` overrides the file's `run.command` when given.
    pub fn parse(text: &str, command: Option<Command>, overrides: &[String]) -> Result<Self, CliError> {
        let mut doc = Ini::load_from_str(text).map_err(|e| CliError::validation("config_malformed", e.to_string()))?;
        if doc.general_section().iter().next().is_some() {
            return Err(CliError::validation("config_malformed", "keys outside a section"));
        }
        for sec in doc.sections().flatten() {
            if ![MODEL, RUN, OUTPUT].contains(&sec) {
                return Err(CliError::validation("unknown_section", format!("[{sec}]")));
            }
        }
        for o in overrides {
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| CliError::validation("override_malformed", format!("'{o}' (expected key=value)")))?;
            let (section, key) = key.trim().split_once('.').unwrap_or((RUN, key.trim()));
            if ![MODEL, RUN, OUTPUT].contains(&section) {
                return Err(CliError::validation("unknown_section", format!("[{section}]")));
            }
            doc.with_section(Some(section)).set(key, value.trim());
        }
        let model = model_from(&doc)?;
        let (file_command, run) = run_from(&doc)?;
        let output = output_from(&doc)?;
        let command = command
            .or(file_command)
            .ok_or_else(|| CliError::validation("missing_key", "run.command"))?;
        let config = ExperimentConfig {
            command,
            model,
            run,
            output,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let r = &self.run;
        if !(r.z.re.is_finite() && r.z.im.is_finite()) {
            return Err(CliError::validation("invalid_value", "z must be finite"));
        }
        if self.command.needs_upper_half_plane() && r.z.im <= 0.0 {
            return Err(CliError::validation(
                "im_z_nonpositive",
                format!("{} requires Im z > 0 (got {})", self.command, r.z.im),
            ));
        }
        for (name, v) in [
            ("sites", r.sites),
            ("steps", r.steps),
            ("depth", r.depth),
            ("orbit", r.orbit),
            ("n_max", r.n_max),
            ("reorth", r.reorth),
        ] {
            if v == 0 {
                return Err(CliError::validation("count_nonpositive", format!("run.{name}")));
            }
        }
        if let Some(g) = &r.grid {
            if g.count == 0 {
                return Err(CliError::validation("count_nonpositive", "run.x_count"));
            }
            if !(g.start < g.stop) && g.count > 1 {
                return Err(CliError::validation("grid_invalid", "x_start must be below x_stop"));
            }
        }
        if r.y_ladder.is_empty()
            || r.y_ladder.iter().any(|&y| !(y > 0.0))
            || r.y_ladder.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(CliError::validation(
                "grid_invalid",
                "y_ladder must be positive and strictly decreasing",
            ));
        }
        Ok(())
    }

    /// Canonical INI text; `parse(emit(c)) == c`.
    pub fn emit(&self) -> String {
        let mut doc = Ini::new();
        {
            let l = self.model.l().to_string();
            let mut m = doc.with_section(Some(MODEL));
            match self.model.kind() {
                ModelKind::Free { hop, shift } => {
                    m.set("kind", "free")
                        .set("l", l)
                        .set("hop", fmt_f64(*hop))
                        .set("shift", fmt_f64(*shift));
                }
                ModelKind::Iid {
                    seed,
                    potential_width,
                    hop_mean,
                    hop_spread,
                } => {
                    m.set("kind", "iid")
                        .set("l", l)
                        .set("seed", seed.to_string())
                        .set("potential_width", fmt_f64(*potential_width))
                        .set("hop_mean", fmt_f64(*hop_mean))
                        .set("hop_spread", fmt_f64(*hop_spread));
                }
                ModelKind::Rotation {
                    alpha,
                    theta0,
                    lambda,
                    hop,
                } => {
                    let hop = match hop {
                        HopSymbol::Constant(c) => fmt_f64(*c),
                        HopSymbol::Cosine => "cosine".into(),
                    };
                    m.set("kind", "rotation")
                        .set("l", l)
                        .set("alpha", fmt_f64(*alpha))
                        .set("theta0", fmt_f64(*theta0))
                        .set("lambda", fmt_f64(*lambda))
                        .set("hop", hop);
                }
                ModelKind::Periodic { blocks } => {
                    m.set("kind", "periodic")
                        .set("l", l)
                        .set("period", blocks.len().to_string());
                    for (k, (d, v)) in blocks.iter().enumerate() {
                        m.set(format!("d{k}"), fmt_matrix(d))
                            .set(format!("v{k}"), fmt_matrix(v));
                    }
                }
            }
        }
        {
            let r = &self.run;
            let mut s = doc.with_section(Some(RUN));
            s.set("command", self.command.as_str())
                .set("z_re", fmt_f64(r.z.re))
                .set("z_im", fmt_f64(r.z.im));
            if let Some(g) = &r.grid {
                s.set("x_start", fmt_f64(g.start))
                    .set("x_stop", fmt_f64(g.stop))
                    .set("x_count", g.count.to_string());
            }
            s.set("y_ladder", fmt_list(&r.y_ladder))
                .set("sites", r.sites.to_string())
                .set("steps", r.steps.to_string())
                .set("depth", r.depth.to_string())
                .set("orbit", r.orbit.to_string())
                .set("n_max", r.n_max.to_string())
                .set("reorth", r.reorth.to_string());
        }
        {
            let mut o = doc.with_section(Some(OUTPUT));
            o.set("format", self.output.format.as_str());
            if let Some(p) = &self.output.path {
                o.set("path", p.clone());
            }
        }
        let mut buf = Vec::new();
        doc.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("INI output is UTF-8")
    }

    /// SHA-256 of the canonical text, excluding the output section so the
    /// hash does not depend on where results are written.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut c = self.clone();
        c.output = OutputConfig::default();
        let digest = Sha256::digest(c.emit().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const IID: &str =
        "[model]\nkind = iid\nl = 2\nseed = 7\nhop_spread = 0.2\n\n[run]\ncommand = lyapunov\nz_im = 0.5\n";

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::parse(IID, None, &[]).unwrap();
        assert_eq!(c.command, Command::Lyapunov);
        assert_eq!(c.model, ErgodicModel::iid(2, 7, 1.0, 1.0, 0.2).unwrap());
        assert_eq!(c.run.z, C64::new(0.0, 0.5));
        assert_eq!(c.run.steps, 100_000);
        assert_eq!(c.output.format, Format::Csv);
    }

    #[test]
    fn overrides_and_positional_command() {
        let c =
            ExperimentConfig::parse(IID, Some(Command::Ids), &["sites=300".into(), "model.seed = 9".into()]).unwrap();
        assert_eq!(c.command, Command::Ids);
        assert_eq!(c.run.sites, 300);
        assert_eq!(c.model, ErgodicModel::iid(2, 9, 1.0, 1.0, 0.2).unwrap());
    }

    #[test]
    fn round_trip_every_kind() {
        let periodic = "[model]\nkind = periodic\nl = 2\nperiod = 2\nd0 = 1 0.1 0.1 1\nv0 = 0 0 0 0\nd1 = 2, 0, 0, 2\nv1 = 0.5 0 0 -0.5\n[run]\ncommand = verify\nx_start = -1\nx_stop = 1\nx_count = 5\n[output]\nformat = json\npath = out.json\n";
        let rotation = "[model]\nkind = rotation\nalpha = 0.6180339887498949\nlambda = 0.7\nhop = cosine\n[run]\ncommand = ac-scan\ny_ladder = 0.3 0.1 1e-2\n";
        let free = "[model]\nkind = free\nl = 3\nhop = 2\nshift = -0.25\n[run]\ncommand = thouless\nz_re = 0.1\nz_im = 1e-300\n";
        for text in [IID, periodic, rotation, free] {
            let c = ExperimentConfig::parse(text, None, &[]).unwrap();
            let again = ExperimentConfig::parse(&c.emit(), None, &[]).unwrap();
            assert_eq!(c, again);
            assert_eq!(c.emit(), again.emit());
        }
    }

    #[test]
    fn inline_comments() {
        let c = ExperimentConfig::parse(
            "[model]\nkind = free ; or iid\n[run]\ncommand = ids # positional wins\nsites = 10\n",
            None,
            &[],
        )
        .unwrap();
        assert_eq!(c.command, Command::Ids);
        assert_eq!(c.run.sites, 10);
    }

    #[test]
    fn hash_ignores_output_and_formatting() {
        let a = ExperimentConfig::parse(IID, None, &[]).unwrap();
        let b = ExperimentConfig::parse(
            &IID.replace("z_im = 0.5", "z_im=0.50"),
            None,
            &["output.path=x.csv".into()],
        )
        .unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig::parse(IID, None, &["steps=1000".into()]).unwrap();
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    fn reason(text: &str, cmd: Option<Command>, o: &[&str]) -> &'static str {
        let o: Vec<String> = o.iter().map(|s| s.to_string()).collect();
        ExperimentConfig::parse(text, cmd, &o).unwrap_err().reason
    }

    #[test]
    fn validation_reasons() {
        assert_eq!(reason(IID, Some(Command::Weyl), &["z_im=0"]), "im_z_nonpositive");
        assert!(ExperimentConfig::parse(IID, Some(Command::Thouless), &["z_im=0".into()]).is_ok());
        assert_eq!(reason(IID, None, &["steps=0"]), "count_nonpositive");
        assert_eq!(
            reason(IID, None, &["x_start=1", "x_stop=0", "x_count=3"]),
            "grid_invalid"
        );
        assert_eq!(reason(IID, None, &["x_start=1"]), "grid_invalid");
        assert_eq!(reason(IID, None, &["y_ladder=0.1 0.2"]), "grid_invalid");
        assert_eq!(reason(IID, None, &["stepz=10"]), "unknown_key");
        assert_eq!(reason(IID, None, &["steps=ten"]), "invalid_value");
        assert_eq!(reason(IID, None, &["model.kind=lattice"]), "unknown_model_kind");
        assert_eq!(reason(IID, None, &["model.seed"]), "override_malformed");
        assert_eq!(reason(IID, None, &["plot.x=1"]), "unknown_section");
        assert_eq!(
            reason(&IID.replace("command = lyapunov\n", ""), None, &[]),
            "missing_key"
        );
        assert_eq!(reason("[run]\ncommand = ids\n", None, &[]), "missing_section");
        assert_eq!(reason(IID, None, &["output.format=xml"]), "invalid_value");
        assert_eq!("xml".parse::<Format>().unwrap_err().reason, "invalid_format");
        assert_eq!(
            reason("[model]\nkind = free\nhop = 0\n[run]\ncommand = ids\n", None, &[]),
            "invalid_model"
        );
        assert_eq!("fit".parse::<Command>().unwrap_err().reason, "unknown_command");
    }
}
