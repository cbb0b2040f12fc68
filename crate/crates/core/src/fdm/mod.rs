//! Deterministic grid-based reference solvers.
//!
//! Discrete-ordinates transport with first-order upwinding in space, the
//! elliptic diffusion limits, and the nonlinear radiation system. These are
//! the references the trained solutions are measured against.

mod diffusion;
mod linalg;
mod nonlinear;
mod rte1d;
mod rte2d;

pub use diffusion::{diffusion_limit_solve_1d, diffusion_limit_solve_2d};
pub use nonlinear::{fdm_nonlinear_1d, nonlinear_limit_solve, NonlinearFdmOptions};
pub use rte1d::{fdm_rte_1d, FdmOptions, FdmSolver, Mesh1D};
pub use rte2d::{fdm_rte_2d, Mesh2D};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use std::io::Write;
use std::path::Path;

/// One mesh axis with nodes and integration weights.
#[derive(Debug, Clone)]
pub struct Axis<T> {
    pub label: &'static str,
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

/// Values sampled on a tensor mesh, row-major over `axes` (last axis
/// fastest).
#[derive(Debug, Clone)]
pub struct Field<T> {
    pub axes: Vec<Axis<T>>,
    pub values: Vec<T>,
}

impl<T: Scalar> Field<T> {
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.nodes.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Product integration weight of a flat index.
    pub fn weight_at(&self, flat: usize) -> T {
        let mut rem = flat;
        let mut w = T::one();
        for (dim, ax) in self.axes.iter().enumerate() {
            let stride: usize = self.axes[dim + 1..]
                .iter()
                .map(|a| a.nodes.len())
                .product();
            let i = rem / stride;
            rem %= stride;
            w *= ax.weights[i];
        }
        w
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.axes.len());
        let mut flat = 0;
        for (dim, &i) in index.iter().enumerate() {
            let stride: usize = self.axes[dim + 1..]
                .iter()
                .map(|a| a.nodes.len())
                .product();
            flat += i * stride;
        }
        flat
    }

    /// Average over the last axis (normalized by its measure) -> field on
    /// the remaining axes.
    pub fn average_last_axis(&self) -> Field<T> {
        let last = self.axes.last().expect("at least one axis");
        let block = last.nodes.len();
        let total_w = last.weights.iter().fold(T::zero(), |a, &w| a + w);
        let n_out = self.len() / block;
        let mut values = Vec::with_capacity(n_out);
        for i in 0..n_out {
            let mut acc = T::zero();
            for j in 0..block {
                acc += last.weights[j] * self.values[i * block + j];
            }
            values.push(acc / total_w);
        }
        Field {
            axes: self.axes[..self.axes.len() - 1].to_vec(),
            values,
        }
    }

    /// Write as CSV, coordinates first then the value, 17 significant
    /// digits.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for ax in &self.axes {
            write!(f, "{},", ax.label)?;
        }
        writeln!(f, "value")?;
        let sizes: Vec<usize> = self.axes.iter().map(|a| a.nodes.len()).collect();
        for (flat, v) in self.values.iter().enumerate() {
            let mut rem = flat;
            for (dim, ax) in self.axes.iter().enumerate() {
                let stride: usize = sizes[dim + 1..].iter().product();
                let i = rem / stride;
                rem %= stride;
                write!(f, "{:.16e},", ax.nodes[i])?;
            }
            writeln!(f, "{v:.16e}")?;
        }
        Ok(())
    }

    /// Compact binary format: `u32` axis count, then per axis `u32` length
    /// and `f64` nodes + weights, then `f64` values (little endian).
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(b"RTEFLD1\0")?;
        f.write_all(&(self.axes.len() as u32).to_le_bytes())?;
        for ax in &self.axes {
            f.write_all(&(ax.nodes.len() as u32).to_le_bytes())?;
            for &x in &ax.nodes {
                f.write_all(&x.to_f64().unwrap().to_le_bytes())?;
            }
            for &w in &ax.weights {
                f.write_all(&w.to_f64().unwrap().to_le_bytes())?;
            }
        }
        for &v in &self.values {
            f.write_all(&v.to_f64().unwrap().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Field<f64>> {
        let bytes = std::fs::read(path)?;
        let mut off = 0usize;
        let take = |off: &mut usize, n: usize| -> Result<&[u8]> {
            if *off + n > bytes.len() {
                return Err(invalid("truncated binary field"));
            }
            let s = &bytes[*off..*off + n];
            *off += n;
            Ok(s)
        };
        if take(&mut off, 8)? != b"RTEFLD1\0" {
            return Err(invalid("not a binary field file"));
        }
        let n_axes = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap()) as usize;
        let mut axes = Vec::with_capacity(n_axes);
        let labels = ["x", "y", "v"];
        for d in 0..n_axes {
            let len = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap()) as usize;
            let mut nodes = Vec::with_capacity(len);
            for _ in 0..len {
                nodes.push(f64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap()));
            }
            let mut weights = Vec::with_capacity(len);
            for _ in 0..len {
                weights.push(f64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap()));
            }
            axes.push(Axis {
                label: labels.get(d).copied().unwrap_or("axis"),
                nodes,
                weights,
            });
        }
        let total: usize = axes.iter().map(|a| a.nodes.len()).product();
        let mut values = Vec::with_capacity(total);
        for _ in 0..total {
            values.push(f64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap()));
        }
        Ok(Field { axes, values })
    }

    /// Read the CSV written by [`Field::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Field<f64>> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| invalid("empty field CSV"))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 2 || cols.last() != Some(&"value") {
            return Err(invalid("bad field CSV header"));
        }
        let n_axes = cols.len() - 1;
        let mut coords: Vec<Vec<f64>> = vec![Vec::new(); n_axes];
        let mut values = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != n_axes + 1 {
                return Err(invalid("ragged field CSV row"));
            }
            for (d, p) in parts[..n_axes].iter().enumerate() {
                coords[d].push(
                    p.parse()
                        .map_err(|_| invalid("bad coordinate in field CSV"))?,
                );
            }
            values.push(
                parts[n_axes]
                    .parse()
                    .map_err(|_| invalid("bad value in field CSV"))?,
            );
        }
        // Recover the axis structure from the coordinate patterns.
        let mut axes = Vec::with_capacity(n_axes);
        let labels = ["x", "y", "v"];
        for d in 0..n_axes {
            let mut nodes: Vec<f64> = Vec::new();
            for &c in &coords[d] {
                if !nodes.iter().any(|&x| x == c) {
                    nodes.push(c);
                }
            }
            let weights = vec![1.0 / nodes.len() as f64; nodes.len()];
            axes.push(Axis {
                label: labels.get(d).copied().unwrap_or("axis"),
                nodes,
                weights,
            });
        }
        let total: usize = axes.iter().map(|a| a.nodes.len()).product();
        if total != values.len() {
            return Err(invalid("field CSV is not a full tensor grid"));
        }
        Ok(Field { axes, values })
    }
}
