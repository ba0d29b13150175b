//! Self-describing text checkpoints for trained CLRNets.
//!
//! ```text
//! isac-clrnet-checkpoint
//! format_version = 1
//! arch.num_vehicles = 8
//! ...
//! norm.input_mean = 0
//! ...
//! meta.seed = 1
//! ...
//! tensor conv_w 4 4
//! <one line of space-separated values per row>
//! ...
//! end
//! ```
//!
//! Floats are written in shortest round-trip form, so loading and saving
//! again reproduces the file byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use isac_core::nn::{ClrnetArch, ClrnetParams, Normalization, TENSOR_NAMES};

pub const MAGIC: &str = "isac-clrnet-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("unsupported checkpoint format version {found} (expected {FORMAT_VERSION})")]
    VersionMismatch { found: String },
    #[error("corrupt checkpoint at line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("checkpoint does not match its architecture: {0}")]
    Shape(#[from] isac_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Where a network came from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingMetadata {
    pub seed: u64,
    /// NMSE values of the training set.
    pub nmse: Vec<f64>,
    pub iterations: usize,
    pub best_iteration: usize,
    /// Free-form `key = value` pairs; keys must not contain whitespace or `=`.
    pub extra: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub arch: ClrnetArch,
    pub params: ClrnetParams<f64>,
    pub meta: TrainingMetadata,
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let a = &self.arch;
        let n = &self.params.norm;
        let m = &self.meta;
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC}");
        let _ = writeln!(s, "format_version = {FORMAT_VERSION}");
        let _ = writeln!(s, "arch.num_vehicles = {}", a.num_vehicles);
        let _ = writeln!(s, "arch.window = {}", a.window);
        let _ = writeln!(s, "arch.conv_filters = {}", a.conv_filters);
        let _ = writeln!(s, "arch.lstm_hidden = {}", a.lstm_hidden);
        let _ = writeln!(s, "norm.input_mean = {}", n.input_mean);
        let _ = writeln!(s, "norm.input_scale = {}", n.input_scale);
        let _ = writeln!(s, "norm.output_mean = {}", n.output_mean);
        let _ = writeln!(s, "norm.output_scale = {}", n.output_scale);
        let _ = writeln!(s, "meta.seed = {}", m.seed);
        let _ = writeln!(s, "meta.nmse = {}", join(&m.nmse));
        let _ = writeln!(s, "meta.iterations = {}", m.iterations);
        let _ = writeln!(s, "meta.best_iteration = {}", m.best_iteration);
        for (k, v) in &m.extra {
            let _ = writeln!(s, "meta.extra.{k} = {v}");
        }
        let shapes = ClrnetParams::<f64>::shapes(a);
        for ((name, tensor), (rows, cols)) in TENSOR_NAMES.iter().zip(self.params.tensors()).zip(shapes) {
            let _ = writeln!(s, "tensor {name} {rows} {cols}");
            for r in 0..rows {
                let line: Vec<String> = tensor[r * cols..(r + 1) * cols].iter().map(|v| v.to_string()).collect();
                let _ = writeln!(s, "{}", line.join(" "));
            }
        }
        let _ = writeln!(s, "end");
        s
    }

    pub fn from_text(text: &str) -> Result<Self, CheckpointError> {
        Parser::new(text).parse()
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

struct Parser<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate(),
            line: 0,
        }
    }

    fn corrupt(&self, reason: impl Into<String>) -> CheckpointError {
        CheckpointError::Corrupt {
            line: self.line,
            reason: reason.into(),
        }
    }

    fn next_line(&mut self) -> Result<&'a str, CheckpointError> {
        match self.lines.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l)
            }
            None => {
                self.line += 1;
                Err(self.corrupt("unexpected end of file"))
            }
        }
    }

    fn field(&mut self, key: &str) -> Result<&'a str, CheckpointError> {
        let line = self.next_line()?;
        match line.split_once(" = ") {
            Some((k, v)) if k == key => Ok(v),
            _ => Err(self.corrupt(format!("expected `{key} = ...`"))),
        }
    }

    fn num<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, CheckpointError> {
        let v = self.field(key)?;
        v.parse().map_err(|_| self.corrupt(format!("bad value `{v}` for {key}")))
    }

    fn parse(mut self) -> Result<Checkpoint, CheckpointError> {
        if self.next_line()? != MAGIC {
            return Err(self.corrupt("missing checkpoint header"));
        }
        let version = self.field("format_version")?;
        if version != FORMAT_VERSION.to_string() {
            return Err(CheckpointError::VersionMismatch {
                found: version.to_owned(),
            });
        }
        let arch = ClrnetArch {
            num_vehicles: self.num("arch.num_vehicles")?,
            window: self.num("arch.window")?,
            conv_filters: self.num("arch.conv_filters")?,
            lstm_hidden: self.num("arch.lstm_hidden")?,
        };
        arch.validate()?;
        let norm = Normalization {
            input_mean: self.num("norm.input_mean")?,
            input_scale: self.num("norm.input_scale")?,
            output_mean: self.num("norm.output_mean")?,
            output_scale: self.num("norm.output_scale")?,
        };
        let mut meta = TrainingMetadata {
            seed: self.num("meta.seed")?,
            ..Default::default()
        };
        let nmse = self.field("meta.nmse")?;
        meta.nmse = nmse
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| self.corrupt(format!("bad NMSE `{s}`"))))
            .collect::<Result<_, _>>()?;
        meta.iterations = self.num("meta.iterations")?;
        meta.best_iteration = self.num("meta.best_iteration")?;

        let mut params = ClrnetParams::<f64>::zeros(&arch);
        params.norm = norm;
        let shapes = ClrnetParams::<f64>::shapes(&arch);
        let mut line = self.next_line()?;
        while let Some(rest) = line.strip_prefix("meta.extra.") {
            let (k, v) = rest.split_once(" = ").ok_or_else(|| self.corrupt("bad metadata entry"))?;
            meta.extra.insert(k.to_owned(), v.to_owned());
            line = self.next_line()?;
        }
        for (t, name) in TENSOR_NAMES.iter().enumerate() {
            let (rows, cols) = shapes[t];
            let header: Vec<&str> = line.split(' ').collect();
            if header.len() != 4 || header[0] != "tensor" || header[1] != *name {
                return Err(self.corrupt(format!("expected `tensor {name} <rows> <cols>`")));
            }
            let declared: (usize, usize) = (
                header[2].parse().map_err(|_| self.corrupt("bad row count"))?,
                header[3].parse().map_err(|_| self.corrupt("bad column count"))?,
            );
            if declared != (rows, cols) {
                return Err(CheckpointError::Shape(isac_core::Error::ShapeMismatch {
                    what: name,
                    expected: rows * cols,
                    got: declared.0 * declared.1,
                }));
            }
            let mut values = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let row = self.next_line()?;
                let before = values.len();
                for tok in row.split(' ') {
                    let v: f64 = tok.parse().map_err(|_| self.corrupt(format!("bad number `{tok}`")))?;
                    if !v.is_finite() {
                        return Err(self.corrupt("non-finite parameter"));
                    }
                    values.push(v);
                }
                if values.len() - before != cols {
                    return Err(self.corrupt(format!("{name}: expected {cols} values per row")));
                }
            }
            *params.tensors_mut()[t] = values;
            line = self.next_line()?;
        }
        if line != "end" {
            return Err(self.corrupt("expected `end`"));
        }
        if self.lines.next().is_some() {
            self.line += 1;
            return Err(self.corrupt("trailing data after `end`"));
        }
        params.norm.validate()?;
        params.check(&arch)?;
        Ok(Checkpoint { arch, params, meta })
    }
}
