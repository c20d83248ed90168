//! Plain-text parameter dump.
//!
//! ```text
//! newsrank-checkpoint 1
//! shape <input_dim> <hidden> <blocks>
//! tensor <name> <rows> <cols>
//! <rows * cols values, row-major, space separated>
//! ...                                  (every tensor in canonical order)
//! running <layer> <width>
//! <mean values>
//! <variance values>
//! ...                                  (every batch-norm layer)
//! end
//! ```
//!
//! Values use the shortest decimal form that parses back to the same
//! `f64`, so save/load is bit-exact.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use ndarray::Array1;

use super::net::{NetShape, PreferenceNet, RunningStats};
use super::ModelError;

const MAGIC: &str = "newsrank-checkpoint";
const VERSION: u32 = 1;

fn join(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 20);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{v}").expect("write to String");
    }
    s
}

pub fn write_checkpoint<W: Write>(net: &PreferenceNet, mut out: W) -> Result<(), ModelError> {
    let shape = net.shape();
    writeln!(out, "{MAGIC} {VERSION}")?;
    writeln!(
        out,
        "shape {} {} {}",
        shape.input_dim, shape.hidden, shape.blocks
    )?;
    for t in net.params().tensors() {
        writeln!(out, "tensor {} {} {}", t.name, t.shape.0, t.shape.1)?;
        writeln!(out, "{}", join(t.values))?;
    }
    for (i, s) in net.running_stats().iter().enumerate() {
        writeln!(out, "running {i} {}", s.mean.len())?;
        writeln!(out, "{}", join(s.mean.as_slice().expect("contiguous")))?;
        writeln!(out, "{}", join(s.var.as_slice().expect("contiguous")))?;
    }
    writeln!(out, "end")?;
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<String, ModelError> {
        self.line_no += 1;
        match self.inner.next() {
            Some(line) => Ok(line?),
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn err(&self, msg: impl std::fmt::Display) -> ModelError {
        ModelError::Checkpoint(format!("line {}: {msg}", self.line_no))
    }

    fn values(&mut self, expected: usize) -> Result<Vec<f64>, ModelError> {
        let line = self.next()?;
        let values: Vec<f64> = line
            .split_ascii_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| self.err(e))?;
        if values.len() != expected {
            return Err(self.err(format!(
                "expected {expected} values, found {}",
                values.len()
            )));
        }
        Ok(values)
    }

    fn header(&mut self, keyword: &str, fields: usize) -> Result<Vec<String>, ModelError> {
        let line = self.next()?;
        let parts: Vec<String> = line.split_ascii_whitespace().map(String::from).collect();
        if parts.first().map(String::as_str) != Some(keyword) || parts.len() != fields + 1 {
            return Err(self.err(format!(
                "expected `{keyword}` with {fields} fields, found {line:?}"
            )));
        }
        Ok(parts[1..].to_vec())
    }
}

fn parse_usize(lines: &Lines<impl BufRead>, s: &str) -> Result<usize, ModelError> {
    s.parse().map_err(|e| lines.err(e))
}

pub fn read_checkpoint<R: BufRead>(input: R) -> Result<PreferenceNet, ModelError> {
    let mut lines = Lines {
        inner: input.lines(),
        line_no: 0,
    };
    let magic = lines.header(MAGIC, 1)?;
    if magic[0] != VERSION.to_string() {
        return Err(lines.err(format!("unsupported version {}", magic[0])));
    }
    let dims = lines.header("shape", 3)?;
    let shape = NetShape {
        input_dim: parse_usize(&lines, &dims[0])?,
        hidden: parse_usize(&lines, &dims[1])?,
        blocks: parse_usize(&lines, &dims[2])?,
    };
    let mut params = PreferenceNet::zeroed(shape).params().clone();
    for t in params.tensors_mut() {
        let head = lines.header("tensor", 3)?;
        let (rows, cols) = (
            parse_usize(&lines, &head[1])?,
            parse_usize(&lines, &head[2])?,
        );
        if head[0] != t.name || (rows, cols) != t.shape {
            return Err(lines.err(format!(
                "expected tensor {} {:?}, found {} {:?}",
                t.name,
                t.shape,
                head[0],
                (rows, cols)
            )));
        }
        let values = lines.values(rows * cols)?;
        t.values.copy_from_slice(&values);
    }
    let mut running = Vec::with_capacity(2 * shape.blocks);
    for i in 0..2 * shape.blocks {
        let head = lines.header("running", 2)?;
        if parse_usize(&lines, &head[0])? != i || parse_usize(&lines, &head[1])? != shape.hidden {
            return Err(lines.err(format!("bad running-stats header for layer {i}")));
        }
        let mean = Array1::from(lines.values(shape.hidden)?);
        let var = Array1::from(lines.values(shape.hidden)?);
        running.push(RunningStats { mean, var });
    }
    lines.header("end", 0)?;
    Ok(PreferenceNet::from_parts(shape, params, running))
}
