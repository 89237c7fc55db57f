//! Legged maps between copies and the generalized trace that wires the output
//! of one copy into the input of another.
//!
//! A [`LeggedMap`] takes operators on its input copies to operators on its
//! output copies. Each copy carries a row and a column leg of size `d`. For a
//! space of `m` copies the Liouville index of `|r><c|` is `r + c d^m`, and
//! `r = sum_i r_i d^(m - i)` with the first listed copy most significant.

use crate::error::{Error, Result};
use crate::propagator::PropagatorMatrix;
use crate::state::DensityMatrix;
use crate::{Matrix, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Debug, PartialEq)]
pub struct LeggedMap {
    local_dim: usize,
    outputs: Vec<usize>,
    inputs: Vec<usize>,
    matrix: Matrix,
}

/// Inserts `digit` at position `pos` of an `m`-digit base-`d` number.
#[inline]
fn insert_digit(x: usize, pos: usize, m: usize, digit: usize, d: usize) -> usize {
    let low_mod = d.pow((m - pos) as u32);
    let (high, low) = (x / low_mod, x % low_mod);
    (high * d + digit) * low_mod + low
}

fn distinct(labels: &[usize]) -> bool {
    labels.iter().enumerate().all(|(i, a)| !labels[..i].contains(a))
}

impl LeggedMap {
    pub fn new(local_dim: usize, outputs: Vec<usize>, inputs: Vec<usize>, matrix: Matrix) -> Result<Self> {
        if local_dim == 0 {
            return Err(Error::InvalidParameter("local dimension must be positive".into()));
        }
        if !distinct(&outputs) || !distinct(&inputs) {
            return Err(Error::InvalidParameter("copy labels on one side must be distinct".into()));
        }
        let rows = local_dim.pow(2 * outputs.len() as u32);
        let cols = local_dim.pow(2 * inputs.len() as u32);
        if matrix.nrows() != rows {
            return Err(Error::DimensionMismatch {
                context: "legged map rows vs output legs",
                expected: rows,
                found: matrix.nrows(),
            });
        }
        if matrix.ncols() != cols {
            return Err(Error::DimensionMismatch {
                context: "legged map columns vs input legs",
                expected: cols,
                found: matrix.ncols(),
            });
        }
        Ok(Self {
            local_dim,
            outputs,
            inputs,
            matrix,
        })
    }

    /// Copies `1..=k` on both sides.
    pub fn from_propagator(e: &PropagatorMatrix) -> Self {
        let labels: Vec<usize> = (1..=e.copies()).collect();
        Self {
            local_dim: e.local_dim(),
            outputs: labels.clone(),
            inputs: labels,
            matrix: e.matrix().clone(),
        }
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    pub fn inputs(&self) -> &[usize] {
        &self.inputs
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    fn vec_index(&self, legs: &[(usize, usize)]) -> usize {
        let d = self.local_dim;
        let (mut r, mut c) = (0, 0);
        for &(ri, ci) in legs {
            r = r * d + ri;
            c = c * d + ci;
        }
        r + c * d.pow(legs.len() as u32)
    }

    /// Tensor element with one `(row, col)` pair per output and per input copy,
    /// in label order.
    pub fn element(&self, out: &[(usize, usize)], inp: &[(usize, usize)]) -> Result<C64> {
        if out.len() != self.outputs.len() || inp.len() != self.inputs.len() {
            return Err(Error::DimensionMismatch {
                context: "element: leg count",
                expected: self.outputs.len() + self.inputs.len(),
                found: out.len() + inp.len(),
            });
        }
        let d = self.local_dim;
        if out.iter().chain(inp).any(|&(r, c)| r >= d || c >= d) {
            return Err(Error::InvalidParameter(format!("leg index out of range for d = {d}")));
        }
        Ok(self.matrix[(self.vec_index(out), self.vec_index(inp))])
    }

    fn position(labels: &[usize], copy: usize, side_len: usize) -> Result<usize> {
        labels
            .iter()
            .position(|&c| c == copy)
            .ok_or(Error::CopyIndex { index: copy, copies: side_len })
    }

    /// Feeds `rho` into the input legs of `copy`.
    pub fn apply_input(&self, copy: usize, rho: &Matrix) -> Result<Self> {
        let d = self.local_dim;
        if rho.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                context: "apply_input: state vs local dimension",
                expected: d,
                found: rho.nrows(),
            });
        }
        let pos = Self::position(&self.inputs, copy, self.inputs.len())?;
        let m = self.inputs.len() - 1;
        let dm = d.pow(m as u32);
        let dm_full = dm * d;
        let mut out = Matrix::zeros(self.matrix.nrows(), dm * dm);
        for cc in 0..dm {
            for rr in 0..dm {
                let col_out = rr + cc * dm;
                for j in 0..d {
                    let c_full = insert_digit(cc, pos, m, j, d);
                    for i in 0..d {
                        let w = rho[(i, j)];
                        if w == ZERO {
                            continue;
                        }
                        let col_in = insert_digit(rr, pos, m, i, d) + c_full * dm_full;
                        let src = self.matrix.column(col_in);
                        let mut dst = out.column_mut(col_out);
                        dst.iter_mut().zip(src.iter()).for_each(|(y, x)| *y += w * x);
                    }
                }
            }
        }
        let mut inputs = self.inputs.clone();
        inputs.remove(pos);
        Ok(Self {
            local_dim: d,
            outputs: self.outputs.clone(),
            inputs,
            matrix: out,
        })
    }

    /// `Gtr_(dst, src)`: sums the output legs of copy `src` against the input
    /// legs of copy `dst`, removing both. With `src == dst` this is the
    /// ordinary partial trace of a superoperator over that copy.
    pub fn gen_trace(&self, src: usize, dst: usize) -> Result<Self> {
        let d = self.local_dim;
        let po = Self::position(&self.outputs, src, self.outputs.len())?;
        let pi = Self::position(&self.inputs, dst, self.inputs.len())?;
        let (mo, mi) = (self.outputs.len() - 1, self.inputs.len() - 1);
        let (dmo, dmi) = (d.pow(mo as u32), d.pow(mi as u32));
        let (dmo_full, dmi_full) = (dmo * d, dmi * d);
        let mut out = Matrix::zeros(dmo * dmo, dmi * dmi);
        for ci in 0..dmi {
            for ri in 0..dmi {
                let col = ri + ci * dmi;
                for j in 0..d {
                    let ci_full = insert_digit(ci, pi, mi, j, d);
                    for i in 0..d {
                        let col_in = insert_digit(ri, pi, mi, i, d) + ci_full * dmi_full;
                        let src_col = self.matrix.column(col_in);
                        for co in 0..dmo {
                            let co_full = insert_digit(co, po, mo, j, d);
                            for ro in 0..dmo {
                                let row_in = insert_digit(ro, po, mo, i, d) + co_full * dmo_full;
                                out[(ro + co * dmo, col)] += src_col[row_in];
                            }
                        }
                    }
                }
            }
        }
        let mut outputs = self.outputs.clone();
        outputs.remove(po);
        let mut inputs = self.inputs.clone();
        inputs.remove(pi);
        Ok(Self {
            local_dim: d,
            outputs,
            inputs,
            matrix: out,
        })
    }

    /// The single-copy operator left once every input is fed and one output
    /// copy remains.
    pub fn into_operator(self) -> Result<Matrix> {
        if !self.inputs.is_empty() || self.outputs.len() != 1 {
            return Err(Error::InvalidParameter(format!(
                "expected one open output and no inputs, found {} and {}",
                self.outputs.len(),
                self.inputs.len()
            )));
        }
        let d = self.local_dim;
        Ok(crate::superop::unvec(self.matrix.as_slice(), d))
    }
}

/// Free-function form of [`LeggedMap::gen_trace`].
pub fn gen_trace(a: &LeggedMap, src: usize, dst: usize) -> Result<LeggedMap> {
    a.gen_trace(src, dst)
}

/// Order of the generalized traces in [`contract_chain`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ContractionOrder {
    /// Feed `rho0` into copy 1 first, then wire `l -> l + 1` for `l = 1..k-1`.
    #[default]
    Forward,
    /// Wire `l -> l + 1` for `l = k-1..1`, then feed `rho0`.
    Reverse,
}

/// Reduced state on the last copy:
/// `Gtr_(k, k-1) ... Gtr_(2, 1) E_tau(t) rho0`.
pub fn contract_chain(e_tau: &PropagatorMatrix, rho0: &DensityMatrix, order: ContractionOrder) -> Result<Matrix> {
    let d = e_tau.local_dim();
    if rho0.dim() != d {
        return Err(Error::DimensionMismatch {
            context: "contract_chain: initial state vs local dimension",
            expected: d,
            found: rho0.dim(),
        });
    }
    let k = e_tau.copies();
    let mut map = LeggedMap::from_propagator(e_tau);
    match order {
        ContractionOrder::Forward => {
            map = map.apply_input(1, rho0.matrix())?;
            for l in 1..k {
                map = map.gen_trace(l, l + 1)?;
            }
        }
        ContractionOrder::Reverse => {
            for l in (1..k).rev() {
                map = map.gen_trace(l, l + 1)?;
            }
            map = map.apply_input(1, rho0.matrix())?;
        }
    }
    map.into_operator()
}
