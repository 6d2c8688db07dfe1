//! Row selectors over the augmented state.

use nalgebra::DMatrix;

use crate::model::{idx, STATE_DIM};

/// A 0/1 matrix picking the listed entries of the augmented state, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Selector {
    rows: Vec<usize>,
}

impl Selector {
    pub fn new(rows: &[usize]) -> Self {
        assert!(rows.iter().all(|&r| r < STATE_DIM));
        Self { rows: rows.to_vec() }
    }

    pub fn indices(&self) -> &[usize] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.rows.len(), STATE_DIM);
        for (r, &c) in self.rows.iter().enumerate() {
            s[(r, c)] = 1.0;
        }
        s
    }

    /// `S · m`, i.e. the selected rows of `m`.
    pub fn rows_of(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        m.select_rows(self.rows.iter())
    }

    /// `m · Sᵀ`, i.e. the selected columns of `m`.
    pub fn cols_of(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        m.select_columns(self.rows.iter())
    }
}

/// Swing foot, pelvis, pelvis velocity and stance contact.
pub fn s_xp() -> Selector {
    Selector::new(&[idx::X2X, idx::X2Y, idx::X1X, idx::X1Y, idx::V1X, idx::V1Y, idx::PX, idx::PY])
}

pub fn s_xdot2() -> Selector {
    Selector::new(&[idx::V2X, idx::V2Y])
}

pub fn s_x2x() -> Selector {
    Selector::new(&[idx::X2X])
}

/// All eight input torques.
pub fn s_u() -> Selector {
    Selector::new(&(idx::MHY..=idx::RMAX).collect::<Vec<_>>())
}

pub fn s_mh() -> Selector {
    Selector::new(&[idx::MHY, idx::MHX])
}

pub fn s_ma() -> Selector {
    Selector::new(&[idx::MAY, idx::MAX])
}

pub fn s_rma() -> Selector {
    Selector::new(&[idx::RMAY, idx::RMAX])
}

pub fn s_d() -> Selector {
    Selector::new(&[idx::D])
}

/// The full set of selectors with their dimensions.
#[derive(Debug, Clone)]
pub struct SelectionMatrices {
    pub s_xp: Selector,
    pub s_xdot2: Selector,
    pub s_x2x: Selector,
    pub s_u: Selector,
    pub s_mh: Selector,
    pub s_ma: Selector,
    pub s_rma: Selector,
    pub s_d: Selector,
}

impl Default for SelectionMatrices {
    fn default() -> Self {
        Self {
            s_xp: s_xp(),
            s_xdot2: s_xdot2(),
            s_x2x: s_x2x(),
            s_u: s_u(),
            s_mh: s_mh(),
            s_ma: s_ma(),
            s_rma: s_rma(),
            s_d: s_d(),
        }
    }
}

impl SelectionMatrices {
    pub fn all(&self) -> [(&'static str, &Selector); 8] {
        [
            ("S_XP", &self.s_xp),
            ("S_Xdot2", &self.s_xdot2),
            ("S_X2x", &self.s_x2x),
            ("S_U", &self.s_u),
            ("S_Mh", &self.s_mh),
            ("S_Ma", &self.s_ma),
            ("S_rMa", &self.s_rma),
            ("S_d", &self.s_d),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        let s = SelectionMatrices::default();
        let dims: Vec<_> = s.all().iter().map(|(_, m)| m.matrix().shape()).collect();
        assert_eq!(
            dims,
            vec![(8, 23), (2, 23), (1, 23), (8, 23), (2, 23), (2, 23), (2, 23), (1, 23)]
        );
    }

    #[test]
    fn selectors_are_orthonormal_rows() {
        for (name, sel) in SelectionMatrices::default().all() {
            let m = sel.matrix();
            for r in 0..m.nrows() {
                assert_eq!(m.row(r).sum(), 1.0, "{name}");
            }
            assert_eq!(&m * m.transpose(), DMatrix::identity(sel.len(), sel.len()), "{name}");
        }
    }

    #[test]
    fn overlaps() {
        let s = SelectionMatrices::default();
        assert!(s.s_xp.indices().contains(&s.s_x2x.indices()[0]));
        for a in [&s.s_mh, &s.s_ma, &s.s_rma] {
            assert!(a.indices().iter().all(|i| s.s_u.indices().contains(i)));
        }
        assert!(s.s_xp.indices().iter().all(|i| !s.s_xdot2.indices().contains(i)));
        assert!(s.s_mh.indices().iter().all(|i| !s.s_ma.indices().contains(i)));
    }

    #[test]
    fn selection_matches_layout() {
        let mut q = DMatrix::zeros(23, 1);
        for i in 0..23 {
            q[(i, 0)] = i as f64;
        }
        let xp = s_xp().matrix() * &q;
        assert_eq!(xp.as_slice(), &[0.0, 1.0, 2.0, 3.0, 6.0, 7.0, 8.0, 9.0]);
        assert_eq!((s_rma().matrix() * &q).as_slice(), &[16.0, 17.0]);
    }
}
