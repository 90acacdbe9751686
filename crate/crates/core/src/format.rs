//! JSON interchange format for programs.
//!
//! ```json
//! {
//!   "layout": [1, 1],
//!   "objective": { "H": [[2, 0], [0, 2]], "h": [-2, -2], "c0": 2 },
//!   "constraint": {
//!     "param_dim": 1,
//!     "rows": [
//!       { "pairs": [{ "a": 0, "b": 1, "Q": [[1]] }], "linear": [], "S": [-1], "t": 0 }
//!     ]
//!   },
//!   "sets": [
//!     { "kind": "box", "lower": [0], "upper": [2] },
//!     { "kind": "box", "lower": [0], "upper": [2] }
//!   ]
//! }
//! ```
//!
//! Pair and linear coefficients are stored dense per block; duplicate sparse
//! entries of a [`ConstraintRow`] are summed on export.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::BlockLayout;
use crate::program::{BilinearConstraint, ConstraintRow, MultiConvexProgram, QuadraticObjective};
use crate::sets::ConvexSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgramDocument {
    pub layout: BlockLayout,
    pub objective: ObjectiveDocument,
    pub constraint: ConstraintDocument,
    pub sets: Vec<ConvexSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveDocument {
    #[serde(rename = "H")]
    pub hessian: Vec<Vec<f64>>,
    pub h: Vec<f64>,
    pub c0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintDocument {
    pub param_dim: usize,
    pub rows: Vec<RowDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowDocument {
    #[serde(default)]
    pub pairs: Vec<PairDocument>,
    #[serde(default)]
    pub linear: Vec<LinearDocument>,
    #[serde(rename = "S")]
    pub s: Vec<f64>,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairDocument {
    pub a: usize,
    pub b: usize,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearDocument {
    pub block: usize,
    pub coeffs: Vec<f64>,
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrows {
        return Err(Error::dim(format!("{what} rows"), nrows, rows.len()));
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        return Err(Error::dim(format!("{what} columns"), ncols, bad.len()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |r, c| rows[r][c]))
}

impl From<&MultiConvexProgram> for ProgramDocument {
    fn from(prog: &MultiConvexProgram) -> Self {
        let layout = prog.layout();
        let obj = prog.objective();
        let rows = prog
            .constraint()
            .rows()
            .iter()
            .map(|row| {
                let mut pairs: Vec<PairDocument> = Vec::new();
                for p in &row.pairs {
                    let mut q = DMatrix::zeros(layout.size(p.a), layout.size(p.b));
                    for &(r, c, v) in &p.entries {
                        q[(r, c)] += v;
                    }
                    match pairs.iter_mut().find(|d| d.a == p.a && d.b == p.b) {
                        Some(d) => {
                            let sum = from_rows(&d.q, q.nrows(), q.ncols(), "Q").expect("own shape") + q;
                            d.q = to_rows(&sum);
                        }
                        None => pairs.push(PairDocument {
                            a: p.a,
                            b: p.b,
                            q: to_rows(&q),
                        }),
                    }
                }
                let mut linear: Vec<LinearDocument> = Vec::new();
                for l in &row.linear {
                    let idx = match linear.iter().position(|d| d.block == l.block) {
                        Some(k) => k,
                        None => {
                            linear.push(LinearDocument {
                                block: l.block,
                                coeffs: vec![0.0; layout.size(l.block)],
                            });
                            linear.len() - 1
                        }
                    };
                    for &(k, v) in &l.entries {
                        linear[idx].coeffs[k] += v;
                    }
                }
                RowDocument {
                    pairs,
                    linear,
                    s: row.param.clone(),
                    t: row.offset,
                }
            })
            .collect();
        ProgramDocument {
            layout: layout.clone(),
            objective: ObjectiveDocument {
                hessian: to_rows(&obj.hessian),
                h: obj.linear.iter().copied().collect(),
                c0: obj.constant,
            },
            constraint: ConstraintDocument {
                param_dim: prog.param_dim(),
                rows,
            },
            sets: prog.sets().to_vec(),
        }
    }
}

impl TryFrom<&ProgramDocument> for MultiConvexProgram {
    type Error = Error;

    fn try_from(doc: &ProgramDocument) -> Result<Self> {
        let layout = doc.layout.clone();
        let n = layout.total();
        let hessian = from_rows(&doc.objective.hessian, n, n, "H")?;
        if doc.objective.h.len() != n {
            return Err(Error::dim("h", n, doc.objective.h.len()));
        }
        let objective = QuadraticObjective::new(hessian, DVector::from_column_slice(&doc.objective.h), doc.objective.c0);

        let p = doc.constraint.param_dim;
        let mut rows = Vec::with_capacity(doc.constraint.rows.len());
        for (j, rd) in doc.constraint.rows.iter().enumerate() {
            if rd.s.len() != p {
                return Err(Error::dim(format!("S of row {j}"), p, rd.s.len()));
            }
            let mut row = ConstraintRow::new(p);
            for pd in &rd.pairs {
                layout.check_block(pd.a)?;
                layout.check_block(pd.b)?;
                if pd.a == pd.b {
                    return Err(Error::InvalidArgument(format!("row {j}: pair term couples block {} with itself", pd.a)));
                }
                let q = from_rows(&pd.q, layout.size(pd.a), layout.size(pd.b), &format!("Q of row {j}"))?;
                for r in 0..q.nrows() {
                    for c in 0..q.ncols() {
                        if q[(r, c)] != 0.0 {
                            row.add_pair(pd.a, r, pd.b, c, q[(r, c)]);
                        }
                    }
                }
            }
            for ld in &rd.linear {
                layout.check_block(ld.block)?;
                if ld.coeffs.len() != layout.size(ld.block) {
                    return Err(Error::dim(format!("linear coefficients of row {j}"), layout.size(ld.block), ld.coeffs.len()));
                }
                for (k, &v) in ld.coeffs.iter().enumerate() {
                    if v != 0.0 {
                        row.add_linear(ld.block, k, v);
                    }
                }
            }
            for (k, &v) in rd.s.iter().enumerate() {
                row.set_param(k, v);
            }
            row.set_offset(rd.t);
            rows.push(row);
        }
        MultiConvexProgram::new(layout, objective, BilinearConstraint::new(rows, p), doc.sets.clone())
    }
}

pub fn to_json(prog: &MultiConvexProgram) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ProgramDocument::from(prog))?)
}

pub fn from_json(text: &str) -> Result<MultiConvexProgram> {
    let doc: ProgramDocument = serde_json::from_str(text)?;
    MultiConvexProgram::try_from(&doc)
}

pub fn read_program(path: &Path) -> Result<MultiConvexProgram> {
    from_json(&fs::read_to_string(path)?)
}
