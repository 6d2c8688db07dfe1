//! Exact phase and stride transition matrices.
//!
//! Within a phase the state obeys `Qdot = F Q + t K Q_c`, where `Q_c` are the
//! entries constant in that phase. Appending `zeta = t Q_c` (with
//! `zetadot = Q_c`) gives a constant 46x46 generator whose exponential is the
//! exact transition from any start time to any later time in the phase.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::{DMatrix, Matrix2};
use serde::Serialize;

use crate::dynamics::{assemble, Phase, PhaseOde};
use crate::error::{Error, Result};
use crate::model::{idx, BodyParams, Mat23, StrideTiming, Vec23, STATE_DIM};
use crate::selection::{s_mh, s_xdot2};

const AUG: usize = 2 * STATE_DIM;

/// Exact transition of one phase, `t -> H(t)`.
#[derive(Debug, Clone)]
pub struct PhaseMap {
    ode: PhaseOde,
    generator: DMatrix<f64>,
}

impl PhaseMap {
    pub fn new(ode: PhaseOde) -> Self {
        let mut gen = DMatrix::zeros(AUG, AUG);
        let phase = ode.phase;
        for i in idx::X {
            if !phase.is_constant(i) {
                gen[(i, i + 4)] = 1.0;
            }
        }
        for r in 0..4 {
            let row = idx::XDOT.start + r;
            for j in 0..STATE_DIM {
                gen[(row, j)] = ode.k0()[(r, j)];
                gen[(row, STATE_DIM + j)] = ode.k1()[(r, j)];
            }
        }
        for j in 0..STATE_DIM {
            if phase.is_constant(j) {
                gen[(STATE_DIM + j, j)] = 1.0;
            }
        }
        Self { ode, generator: gen }
    }

    pub fn phase(&self) -> Phase {
        self.ode.phase
    }

    pub fn duration(&self) -> f64 {
        self.ode.duration
    }

    pub fn ode(&self) -> &PhaseOde {
        &self.ode
    }

    /// The augmented 46x46 generator over `[Q; t Q_c]`.
    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    fn check(&self, t: f64) -> Result<()> {
        // tolerate round-off when callers add up sub-intervals
        let slack = 1e-12 * self.duration();
        if t < -slack || t > self.duration() + slack {
            return Err(Error::TimeOutOfRange { t, duration: self.duration() });
        }
        Ok(())
    }

    /// `Q(t) = H(t) Q(0)`.
    pub fn at(&self, t: f64) -> Result<Mat23> {
        self.between(0.0, t)
    }

    /// `Q(t1) = H(t0 -> t1) Q(t0)` for `0 <= t0 <= t1 <= duration`.
    pub fn between(&self, t0: f64, t1: f64) -> Result<Mat23> {
        self.check(t0)?;
        self.check(t1)?;
        if t1 < t0 {
            return Err(Error::TimeOutOfRange { t: t1, duration: self.duration() });
        }
        let e = (&self.generator * (t1 - t0)).exp();
        let mut h = Mat23::zeros();
        for i in 0..STATE_DIM {
            if self.phase().is_constant(i) {
                // held entries: exactly unit rows rather than exp round-off
                h[(i, i)] = 1.0;
                continue;
            }
            for j in 0..STATE_DIM {
                h[(i, j)] = e[(i, j)] + t0 * e[(i, STATE_DIM + j)];
            }
        }
        Ok(h)
    }
}

/// Transition of a whole stride (double support then single support) with the
/// swing-foot velocity constraint eliminated through the constant hip torques.
#[derive(Debug, Clone)]
pub struct StrideMap {
    timing: StrideTiming,
    double: PhaseMap,
    single: PhaseMap,
    h_ds: Mat23,
    h_ss: Mat23,
    h: Mat23,
    correction: Mat23,
    h_prime: Mat23,
}

type CacheKey = ([u64; 8], [u64; 2]);

fn cache() -> &'static RwLock<HashMap<CacheKey, Arc<StrideMap>>> {
    static CACHE: OnceLock<RwLock<HashMap<CacheKey, Arc<StrideMap>>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

impl StrideMap {
    pub fn new(params: &BodyParams, timing: &StrideTiming) -> Result<Self> {
        let double = PhaseMap::new(assemble(params, timing, Phase::Double)?);
        let single = PhaseMap::new(assemble(params, timing, Phase::Single)?);
        let h_ds = double.at(timing.t_ds())?;
        let h_ss = single.at(timing.t_ss())?;
        let h = h_ss * h_ds;

        // Hip torque correction: C = I - S_Mh^T (S_Xd2 H S_Mh^T)^-1 S_Xd2 H
        let xd2 = s_xdot2();
        let mh = s_mh();
        let mut gain = Matrix2::zeros();
        for (r, &i) in xd2.indices().iter().enumerate() {
            for (c, &j) in mh.indices().iter().enumerate() {
                gain[(r, c)] = h[(i, j)];
            }
        }
        let scale = gain.amax();
        let inv = gain
            .try_inverse()
            .filter(|_| gain.determinant().abs() > 1e-12 * scale * scale && scale > 0.0)
            .ok_or_else(|| Error::Singular("hip torques cannot set the end swing-foot velocity".into()))?;
        let mut correction = Mat23::identity();
        for (c, &j) in mh.indices().iter().enumerate() {
            for col in 0..STATE_DIM {
                let mut v = 0.0;
                for (r, &i) in xd2.indices().iter().enumerate() {
                    v += inv[(c, r)] * h[(i, col)];
                }
                correction[(j, col)] -= v;
            }
        }
        let h_prime = h * correction;
        Ok(Self { timing: *timing, double, single, h_ds, h_ss, h, correction, h_prime })
    }

    /// Shared instance for `(params, timing)`, built on first use.
    pub fn cached(params: &BodyParams, timing: &StrideTiming) -> Result<Arc<Self>> {
        let key = (params.bits(), timing.bits());
        if let Some(map) = cache().read().expect("transition cache poisoned").get(&key) {
            return Ok(Arc::clone(map));
        }
        let map = Arc::new(Self::new(params, timing)?);
        let mut guard = cache().write().expect("transition cache poisoned");
        Ok(Arc::clone(guard.entry(key).or_insert(map)))
    }

    pub fn timing(&self) -> &StrideTiming {
        &self.timing
    }
    pub fn double_support(&self) -> &PhaseMap {
        &self.double
    }
    pub fn single_support(&self) -> &PhaseMap {
        &self.single
    }
    /// `H(T_stride)`.
    pub fn h(&self) -> &Mat23 {
        &self.h
    }
    /// `H'(T_stride)`: the stride map once hip torques enforce a still swing foot at the end.
    pub fn h_prime(&self) -> &Mat23 {
        &self.h_prime
    }
    /// Map replacing the constant hip torques of `Q0` by those that stop the
    /// swing foot at the end of the stride; `H' = H C`.
    pub fn hip_correction(&self) -> &Mat23 {
        &self.correction
    }
    pub fn h_ds_end(&self) -> &Mat23 {
        &self.h_ds
    }
    pub fn h_ss_end(&self) -> &Mat23 {
        &self.h_ss
    }

    /// Phase and local time of stride time `t`. The instant `T_ds` belongs to double support.
    pub fn locate(&self, t: f64) -> Result<(Phase, f64)> {
        let total = self.timing.stride();
        if !(-1e-12 * total..=total * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::TimeOutOfRange { t, duration: total });
        }
        let t = t.clamp(0.0, total);
        if t <= self.timing.t_ds() {
            Ok((Phase::Double, t))
        } else {
            Ok((Phase::Single, (t - self.timing.t_ds()).min(self.timing.t_ss())))
        }
    }

    /// `H(t)` for any stride time `t`.
    pub fn at(&self, t: f64) -> Result<Mat23> {
        match self.locate(t)? {
            (Phase::Double, local) => self.double.at(local),
            (Phase::Single, local) => Ok(self.single.at(local)? * self.h_ds),
        }
    }

    /// `G(tau)` with `G(tau) H(tau) = H(T_stride)`: carries the state at stride
    /// time `tau` to the end of the stride.
    pub fn back_map(&self, tau: f64) -> Result<Mat23> {
        self.propagate(tau, self.timing.stride())
    }

    /// Transition from stride time `t0` to stride time `t1 >= t0`.
    pub fn propagate(&self, t0: f64, t1: f64) -> Result<Mat23> {
        if t1 < t0 {
            return Err(Error::TimeOutOfRange { t: t1, duration: self.timing.stride() });
        }
        let (p0, l0) = self.locate(t0)?;
        let (p1, l1) = self.locate(t1)?;
        Ok(match (p0, p1) {
            (Phase::Double, Phase::Double) => self.double.between(l0, l1)?,
            (Phase::Single, Phase::Single) => self.single.between(l0, l1)?,
            (Phase::Double, Phase::Single) => {
                self.single.at(l1)? * self.double.between(l0, self.timing.t_ds())?
            }
            (Phase::Single, Phase::Double) => unreachable!("t1 >= t0"),
        })
    }

    pub fn propagate_state(&self, q: &Vec23, t0: f64, t1: f64) -> Result<Vec23> {
        Ok(self.propagate(t0, t1)? * q)
    }

    /// Row-major dump of `H` and `H'` with the state layout.
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Dump<'a> {
            layout: &'a [&'a str],
            rows: usize,
            cols: usize,
            t_ds: f64,
            t_ss: f64,
            #[serde(rename = "H")]
            h: Vec<f64>,
            #[serde(rename = "H_prime")]
            h_prime: Vec<f64>,
        }
        let row_major = |m: &Mat23| m.transpose().as_slice().to_vec();
        serde_json::to_value(Dump {
            layout: &idx::NAMES,
            rows: STATE_DIM,
            cols: STATE_DIM,
            t_ds: self.timing.t_ds(),
            t_ss: self.timing.t_ss(),
            h: row_major(&self.h),
            h_prime: row_major(&self.h_prime),
        })
        .expect("plain numeric dump")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BodySize;

    fn setup() -> (BodyParams, StrideTiming) {
        (BodyParams::preset(BodySize::Adult), StrideTiming::new(0.3, 0.56).unwrap())
    }

    fn max_diff(a: &Mat23, b: &Mat23) -> f64 {
        (a - b).amax()
    }

    #[test]
    fn identity_at_start() {
        let (p, t) = setup();
        let map = StrideMap::new(&p, &t).unwrap();
        assert!(max_diff(&map.at(0.0).unwrap(), &Mat23::identity()) < 1e-15);
        assert!(max_diff(&map.single_support().at(0.0).unwrap(), &Mat23::identity()) < 1e-15);
    }

    #[test]
    fn constant_rows_are_unit_rows() {
        let (p, t) = setup();
        let map = StrideMap::new(&p, &t).unwrap();
        for time in [0.1, 0.3, 0.5, 0.86] {
            let h = map.at(time).unwrap();
            for i in idx::FORCING {
                for j in 0..STATE_DIM {
                    assert_eq!(h[(i, j)], if i == j { 1.0 } else { 0.0 });
                }
            }
        }
        let h = map.double_support().at(0.2).unwrap();
        for i in [idx::X2X, idx::X2Y] {
            for j in 0..STATE_DIM {
                assert_eq!(h[(i, j)], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn planes_stay_decoupled() {
        let (p, t) = setup();
        let map = StrideMap::new(&p, &t).unwrap();
        for h in [map.h(), map.h_prime()] {
            for i in 0..STATE_DIM {
                for j in 0..STATE_DIM {
                    if idx::is_lateral(i) != idx::is_lateral(j) {
                        assert_eq!(h[(i, j)], 0.0, "({i},{j})");
                    }
                }
            }
        }
    }

    #[test]
    fn semigroup_within_phase() {
        let (p, t) = setup();
        let map = StrideMap::new(&p, &t).unwrap();
        for ph in [map.double_support(), map.single_support()] {
            let (a, b) = (0.37 * ph.duration(), 0.41 * ph.duration());
            let lhs = ph.at(a + b).unwrap();
            let rhs = ph.between(a, a + b).unwrap() * ph.at(a).unwrap();
            assert!(max_diff(&lhs, &rhs) < 1e-11);
        }
    }

    #[test]
    fn back_map_closes_stride() {
        let (p, t) = setup();
        let map = StrideMap::new(&p, &t).unwrap();
        assert!(max_diff(&map.back_map(0.0).unwrap(), map.h()) < 1e-12);
        assert!(max_diff(&map.back_map(t.stride()).unwrap(), &Mat23::identity()) < 1e-15);
        for tau in [0.05, 0.3, 0.31, 0.6, 0.85] {
            let g = map.back_map(tau).unwrap();
            assert!(max_diff(&(g * map.at(tau).unwrap()), map.h()) < 1e-9, "tau {tau}");
        }
    }

    #[test]
    fn constrained_map_stops_swing_foot() {
        let (p, t) = setup();
        let map = StrideMap::new(&p, &t).unwrap();
        for i in [idx::V2X, idx::V2Y] {
            assert!(map.h_prime().row(i).amax() <= 1e-12);
        }
    }

    #[test]
    fn cache_returns_same_instance() {
        let (p, t) = setup();
        let a = StrideMap::cached(&p, &t).unwrap();
        let b = StrideMap::cached(&p, &t).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }

    #[test]
    fn json_dump_layout() {
        let (p, t) = setup();
        let v = StrideMap::new(&p, &t).unwrap().to_json();
        assert_eq!(v["layout"].as_array().unwrap().len(), STATE_DIM);
        assert_eq!(v["H"].as_array().unwrap().len(), STATE_DIM * STATE_DIM);
    }
}
