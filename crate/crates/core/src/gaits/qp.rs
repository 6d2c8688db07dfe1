//! Small dense equality-constrained least squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Linear equality rows `a x = b` with a name used in error reports.
#[derive(Debug, Clone)]
pub struct ConstraintBlock {
    pub name: String,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl ConstraintBlock {
    pub fn new(name: impl Into<String>, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        assert_eq!(a.nrows(), b.len(), "constraint rows and right-hand side differ");
        Self { name: name.into(), a, b }
    }
}

fn stack(blocks: &[ConstraintBlock], n: usize) -> (DMatrix<f64>, DVector<f64>) {
    let rows: usize = blocks.iter().map(|b| b.a.nrows()).sum();
    let mut a = DMatrix::zeros(rows, n);
    let mut b = DVector::zeros(rows);
    let mut r = 0;
    for blk in blocks {
        a.rows_mut(r, blk.a.nrows()).copy_from(&blk.a);
        b.rows_mut(r, blk.b.len()).copy_from(&blk.b);
        r += blk.a.nrows();
    }
    (a, b)
}

fn tolerance(a: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    1e-8 * (1.0 + a.amax()) * (1.0 + b.amax())
}

/// Minimises `|objective x|^2` subject to every block, via the KKT system.
/// A singular KKT matrix (objective flat along the feasible set) falls back
/// to the minimum-norm solution.
pub fn solve_equality_qp(objective: &DMatrix<f64>, blocks: &[ConstraintBlock]) -> Result<DVector<f64>> {
    let n = objective.ncols();
    let (a, b) = stack(blocks, n);
    let m = a.nrows();
    let hess = objective.transpose() * objective;
    let mut kkt = DMatrix::zeros(n + m, n + m);
    kkt.view_mut((0, 0), (n, n)).copy_from(&(&hess * 2.0));
    kkt.view_mut((0, n), (n, m)).copy_from(&a.transpose());
    kkt.view_mut((n, 0), (m, n)).copy_from(&a);
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(n, m).copy_from(&b);

    let tol = tolerance(&a, &b);
    let direct = kkt.clone().lu().solve(&rhs).filter(|z| {
        z.iter().all(|v| v.is_finite()) && (&kkt * z - &rhs).amax() <= 1e-9 * (1.0 + kkt.amax()) * (1.0 + z.amax())
    });
    let z = match direct {
        Some(z) => z,
        None => {
            let eps = 1e-12 * kkt.amax();
            let pinv = kkt.pseudo_inverse(eps).map_err(|e| Error::Singular(e.to_string()))?;
            pinv * &rhs
        }
    };
    let x = z.rows(0, n).into_owned();
    let residual = (&a * &x - &b).amax();
    if residual > tol {
        return Err(first_infeasible(blocks, n).unwrap_or(Error::Infeasible { block: "constraints".into(), residual }));
    }
    Ok(x)
}

/// Names the first block whose addition makes the stacked rows inconsistent.
fn first_infeasible(blocks: &[ConstraintBlock], n: usize) -> Option<Error> {
    for k in 1..=blocks.len() {
        let (a, b) = stack(&blocks[..k], n);
        let svd = a.clone().svd(true, true);
        let x = svd.solve(&b, 1e-12 * a.amax().max(f64::MIN_POSITIVE)).ok()?;
        let residual = (&a * &x - &b).amax();
        if residual > tolerance(&a, &b) {
            return Some(Error::Infeasible { block: blocks[k - 1].name.clone(), residual });
        }
    }
    None
}
