//! Mirror-symmetry conditions of a stride and their singular structure.

use nalgebra::{DMatrix, SMatrix};

use crate::error::{Error, Result};
use crate::model::{idx, BodyParams, StrideTiming, STATE_DIM};
use crate::selection::{s_xdot2, s_xp};
use crate::transition::StrideMap;

/// Relative vectors `[X1 - X2, X1 - P, X1dot]` from `[X2, X1, X1dot, P]`.
pub fn relative_vectors() -> SMatrix<f64, 6, 8> {
    let mut m = SMatrix::<f64, 6, 8>::zeros();
    for axis in 0..2 {
        m[(axis, axis)] = -1.0;
        m[(axis, 2 + axis)] = 1.0;
        m[(2 + axis, 2 + axis)] = 1.0;
        m[(2 + axis, 6 + axis)] = -1.0;
        m[(4 + axis, 4 + axis)] = 1.0;
    }
    m
}

/// Lateral components change sign from one stride to the next.
pub fn mirror_signs() -> SMatrix<f64, 6, 6> {
    SMatrix::<f64, 6, 6>::from_diagonal(&nalgebra::SVector::<f64, 6>::from_fn(|i, _| if i % 2 == 0 { 1.0 } else { -1.0 }))
}

/// Swaps the swing foot and the stance point in `[X2, X1, X1dot, P]`.
pub fn foot_exchange() -> SMatrix<f64, 8, 8> {
    let mut t = SMatrix::<f64, 8, 8>::zeros();
    for (r, c) in [(0, 6), (1, 7), (2, 2), (3, 3), (4, 4), (5, 5), (6, 0), (7, 1)] {
        t[(r, c)] = 1.0;
    }
    t
}

/// Which reduced system to analyse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduced {
    /// States, all torques and the support side.
    WithTorques,
    /// States and the support side only.
    Passive,
}

impl Reduced {
    /// Entries of the augmented state kept as unknowns.
    pub fn columns(self) -> Vec<usize> {
        let drop_torques = self == Reduced::Passive;
        (0..STATE_DIM)
            .filter(|&j| {
                !(idx::P.contains(&j)
                    || idx::W.contains(&j)
                    || j == idx::V2X
                    || j == idx::V2Y
                    || (drop_torques && (idx::U.contains(&j) || idx::RU.contains(&j))))
            })
            .collect()
    }
}

/// Linear conditions on the initial augmented state for a mirror-symmetric stride.
#[derive(Debug, Clone)]
pub struct PeriodicitySystem {
    pub timing: StrideTiming,
    /// 8x23: six symmetry rows and two rows stopping the swing foot at the end
    /// of the stride with the hip torques carried in the state itself.
    /// (`S_Xd2 H'` is identically zero and cannot serve as those two rows.)
    pub r_full: DMatrix<f64>,
    /// 8x15: columns of initial swing velocity, stance point and push removed.
    pub r0: DMatrix<f64>,
    /// 8x7: torque columns removed as well.
    pub r1: DMatrix<f64>,
}

pub fn build_periodicity(params: &BodyParams, timing: &StrideTiming) -> Result<PeriodicitySystem> {
    let map = StrideMap::cached(params, timing)?;
    let sxp = s_xp().matrix();
    let m = DMatrix::from_column_slice(6, 8, relative_vectors().as_slice());
    let o = DMatrix::from_column_slice(6, 6, mirror_signs().as_slice());
    let t = DMatrix::from_column_slice(8, 8, foot_exchange().as_slice());
    let h = DMatrix::from_column_slice(STATE_DIM, STATE_DIM, map.h().as_slice());

    // With the stop rows in place, H' v = H v for every admissible v, so the
    // symmetry rows use H and avoid the pole of the hip-torque elimination.
    let symmetry = -(&m * &sxp) + &o * &m * &t * &sxp * &h;
    let stop = s_xdot2().matrix() * &h;
    let mut r_full = DMatrix::zeros(8, STATE_DIM);
    r_full.rows_mut(0, 6).copy_from(&symmetry);
    r_full.rows_mut(6, 2).copy_from(&stop);

    let r0 = r_full.select_columns(Reduced::WithTorques.columns().iter());
    let r1 = r_full.select_columns(Reduced::Passive.columns().iter());
    Ok(PeriodicitySystem { timing: *timing, r_full, r0, r1 })
}

impl PeriodicitySystem {
    pub fn reduced(&self, which: Reduced) -> &DMatrix<f64> {
        match which {
            Reduced::WithTorques => &self.r0,
            Reduced::Passive => &self.r1,
        }
    }
}

/// SVD of `r` zero-padded to a square with as many rows as columns, so that
/// every column has a singular value and right singular vector.
fn padded_svd(r: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = r.ncols().max(r.nrows());
    let mut sq = DMatrix::zeros(n, r.ncols());
    sq.rows_mut(0, r.nrows()).copy_from(r);
    let svd = sq.svd(false, true);
    let v_t = svd.v_t.expect("requested right vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v = DMatrix::zeros(r.ncols(), order.len());
    for (k, &i) in order.iter().enumerate() {
        v.set_column(k, &v_t.row(i).transpose());
    }
    (values, v)
}

/// Square roots of the eigenvalues of `R^T R`, descending; one per column.
pub fn singular_spectrum(system: &PeriodicitySystem, which: Reduced) -> Vec<f64> {
    padded_svd(system.reduced(which)).0
}

/// Relative threshold below which a singular value counts as zero.
pub const NULL_THRESHOLD: f64 = 1e-9;

/// Orthonormal basis of the numerical null space of the chosen reduced system.
pub fn null_basis(system: &PeriodicitySystem, which: Reduced, expected: Option<usize>) -> Result<DMatrix<f64>> {
    let (values, v) = padded_svd(system.reduced(which));
    let cutoff = NULL_THRESHOLD * values[0];
    let found = values.iter().filter(|&&s| s <= cutoff).count();
    if let Some(expected) = expected {
        if found != expected {
            return Err(Error::NullSpaceDimension { found, expected });
        }
    }
    let first = values.len() - found;
    Ok(v.columns(first, found).into_owned())
}

/// Zero-fills a reduced vector back to the 23-entry layout.
pub fn lift(which: Reduced, reduced: &nalgebra::DVector<f64>) -> crate::model::Vec23 {
    let mut q = crate::model::Vec23::zeros();
    for (k, &j) in which.columns().iter().enumerate() {
        q[j] = reduced[k];
    }
    q
}

/// Second-smallest over largest singular value of the passive system.
///
/// The lateral block always has one null vector (stepping in place); forward
/// progression needs a second, sagittal one.
pub fn passive_gap(params: &BodyParams, t_ds: f64, t_stride: f64) -> Result<f64> {
    let timing = StrideTiming::new(t_ds, t_stride - t_ds)?;
    let spectrum = singular_spectrum(&build_periodicity(params, &timing)?, Reduced::Passive);
    Ok(spectrum[spectrum.len() - 2] / spectrum[0])
}

/// Stride time at which the passive system gains a sagittal null vector
/// (pseudo-passive forward walking exists).
///
/// The bracket is scanned, every local minimum of the scan is refined by
/// golden-section search, and the deepest one is returned. The dip is narrow
/// (about 1 ms wide at the 1e-3 level), hence the dense scan.
pub fn find_relax_time(params: &BodyParams, t_ds: f64, bracket: (f64, f64)) -> Result<f64> {
    let (lo, hi) = (bracket.0.max(t_ds * (1.0 + 1e-9)), bracket.1);
    if !(hi > lo) {
        return Err(Error::InvalidTiming(format!("empty bracket [{}, {}] for T_ds = {t_ds}", bracket.0, bracket.1)));
    }
    let gap = |t: f64| passive_gap(params, t_ds, t);
    let scan = ((hi - lo) / 2.5e-3).ceil().max(8.0) as usize;
    let step = (hi - lo) / scan as f64;
    let samples: Vec<f64> = (0..=scan).map(|k| gap(lo + step * k as f64)).collect::<Result<_>>()?;

    let mut best = (f64::INFINITY, lo);
    for k in 0..=scan {
        let left = if k == 0 { f64::INFINITY } else { samples[k - 1] };
        let right = if k == scan { f64::INFINITY } else { samples[k + 1] };
        if samples[k] > left || samples[k] > right {
            continue;
        }
        let a = lo + step * k.saturating_sub(1) as f64;
        let b = lo + step * (k + 1).min(scan) as f64;
        let (t, g) = golden_min(&gap, a, b)?;
        if g < best.0 {
            best = (g, t);
        }
    }
    let (g, t) = best;
    if g > NULL_THRESHOLD {
        return Err(Error::NoRoot { lo, hi, best: g, at: t });
    }
    Ok(t)
}

fn golden_min(f: &impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > 1e-13 * b.abs().max(1.0) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}
