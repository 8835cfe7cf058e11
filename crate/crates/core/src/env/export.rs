//! Flat text export of environment ground truth.
//!
//! ```text
//! clumb-instance 1
//! kind linear
//! users 4
//! ...
//! [thetas]
//! <one vector per line>
//! [assignments]
//! ...
//! ```
//!
//! Floats are written with 17 significant digits so a read-back is exact.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::{MatrixFeedbackEnv, ProblemInstance};
use crate::error::{Error, Result};

const MAGIC: &str = "clumb-instance 1";

fn row(out: &mut dyn Write, values: impl IntoIterator<Item = f64>) -> Result<()> {
    let mut first = true;
    for v in values {
        if !first {
            out.write_all(b" ")?;
        }
        write!(out, "{v:.16e}")?;
        first = false;
    }
    out.write_all(b"\n")?;
    Ok(())
}

fn vectors(out: &mut dyn Write, name: &str, vs: &[DVector<f64>]) -> Result<()> {
    writeln!(out, "[{name}]")?;
    for v in vs {
        row(out, v.iter().copied())?;
    }
    Ok(())
}

fn matrix(out: &mut dyn Write, name: &str, m: &DMatrix<f64>) -> Result<()> {
    writeln!(out, "[{name}]")?;
    for r in 0..m.nrows() {
        row(out, m.row(r).iter().copied())?;
    }
    Ok(())
}

pub fn write_linear(inst: &ProblemInstance, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "kind linear")?;
    writeln!(out, "users {}", inst.user_cluster.len())?;
    writeln!(out, "clusters {}", inst.cluster_thetas.len())?;
    writeln!(out, "pool {}", inst.arm_pool.len())?;
    writeln!(out, "per_round_arms {}", inst.per_round_arms)?;
    writeln!(out, "noise_std {:.16e}", inst.noise_std)?;
    match inst.tilde_lambda {
        Some(t) => writeln!(out, "tilde_lambda {t:.16e}")?,
        None => writeln!(out, "tilde_lambda none")?,
    }
    vectors(out, "thetas", &inst.cluster_thetas)?;
    writeln!(out, "[assignments]")?;
    for j in &inst.user_cluster {
        writeln!(out, "{j}")?;
    }
    vectors(out, "pool", &inst.arm_pool)?;
    matrix(out, "deviation", &inst.deviation)
}

pub fn write_matrix(env: &MatrixFeedbackEnv, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "kind matrix")?;
    writeln!(out, "users {}", env.feedback.nrows())?;
    writeln!(out, "pool {}", env.features.len())?;
    writeln!(out, "per_round_arms {}", env.per_round_arms)?;
    vectors(out, "pool", &env.features)?;
    matrix(out, "feedback", &env.feedback)
}

/// A parsed export.
#[derive(Debug, Clone, PartialEq)]
pub enum Exported {
    Linear(ProblemInstance),
    Matrix(MatrixFeedbackEnv),
}

struct Cursor<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn fail(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    fn next(&mut self) -> Result<(usize, &'a str)> {
        match self.lines.next() {
            Some((k, l)) => Ok((k + 1, l.trim())),
            None => Err(self.fail(0, "unexpected end of file")),
        }
    }

    fn header(&mut self, key: &str) -> Result<&'a str> {
        let (n, line) = self.next()?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.trim()),
            _ => Err(self.fail(n, format!("expected `{key} <value>`"))),
        }
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let (n, v) = (self.lines.peek().map_or(0, |(k, _)| k + 1), self.header(key)?);
        v.parse().map_err(|e| self.fail(n, format!("{key}: {e}")))
    }

    fn float(&mut self, key: &str) -> Result<f64> {
        let (n, v) = (self.lines.peek().map_or(0, |(k, _)| k + 1), self.header(key)?);
        v.parse().map_err(|e| self.fail(n, format!("{key}: {e}")))
    }

    fn section(&mut self, name: &str) -> Result<()> {
        let (n, line) = self.next()?;
        if line != format!("[{name}]") {
            return Err(self.fail(n, format!("expected section [{name}]")));
        }
        Ok(())
    }

    fn rows(&mut self, count: usize, width: Option<usize>) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(count);
        let mut expected = width;
        for _ in 0..count {
            let (n, line) = self.next()?;
            let values = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| self.fail(n, e.to_string()))?;
            match expected {
                Some(w) if w != values.len() => {
                    return Err(self.fail(n, format!("expected {w} values, found {}", values.len())))
                }
                _ => expected = Some(values.len()),
            }
            out.push(values);
        }
        Ok(out)
    }
}

fn to_vectors(rows: Vec<Vec<f64>>) -> Vec<DVector<f64>> {
    rows.into_iter().map(DVector::from_vec).collect()
}

fn to_matrix(rows: Vec<Vec<f64>>, cols: usize) -> DMatrix<f64> {
    let n = rows.len();
    DMatrix::from_row_iterator(n, cols, rows.into_iter().flatten())
}

pub fn read_export(text: &str, path: &Path) -> Result<Exported> {
    let mut c = Cursor {
        lines: text.lines().enumerate().peekable(),
        path,
    };
    let (n, magic) = c.next()?;
    if magic != MAGIC {
        return Err(c.fail(n, "not an instance export"));
    }
    match c.header("kind")? {
        "linear" => {
            let users = c.count("users")?;
            let clusters = c.count("clusters")?;
            let pool = c.count("pool")?;
            let per_round_arms = c.count("per_round_arms")?;
            let noise_std = c.float("noise_std")?;
            let tilde_lambda = match c.header("tilde_lambda")? {
                "none" => None,
                v => Some(v.parse().map_err(|e| c.fail(0, format!("tilde_lambda: {e}")))?),
            };
            c.section("thetas")?;
            let thetas = to_vectors(c.rows(clusters, None)?);
            c.section("assignments")?;
            let mut user_cluster = Vec::with_capacity(users);
            for _ in 0..users {
                let (n, line) = c.next()?;
                let j: usize = line.parse().map_err(|e| c.fail(n, format!("assignment: {e}")))?;
                if j >= clusters {
                    return Err(c.fail(n, format!("cluster {j} out of range")));
                }
                user_cluster.push(j);
            }
            c.section("pool")?;
            let arm_pool = to_vectors(c.rows(pool, None)?);
            c.section("deviation")?;
            let deviation = to_matrix(c.rows(users, Some(pool))?, pool);
            Ok(Exported::Linear(ProblemInstance {
                cluster_thetas: thetas,
                user_cluster,
                arm_pool,
                deviation,
                noise_std,
                per_round_arms,
                tilde_lambda,
            }))
        }
        "matrix" => {
            let users = c.count("users")?;
            let pool = c.count("pool")?;
            let per_round_arms = c.count("per_round_arms")?;
            c.section("pool")?;
            let features = to_vectors(c.rows(pool, None)?);
            c.section("feedback")?;
            let feedback = to_matrix(c.rows(users, Some(pool))?, pool);
            Ok(Exported::Matrix(MatrixFeedbackEnv::new(features, feedback, per_round_arms)?))
        }
        other => Err(c.fail(2, format!("unknown kind `{other}`"))),
    }
}

pub fn load_export(path: impl AsRef<Path>) -> Result<Exported> {
    let path = path.as_ref();
    read_export(&std::fs::read_to_string(path)?, path)
}
