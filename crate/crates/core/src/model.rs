//! Vector fields: the n-site RFM, its form shifted around an equilibrium, and
//! the scalar tanh demo system.
//!
//! The virtual boundary densities `x_0 = 1` and `x_{n+1} = 0` (and their
//! shifted counterparts `z_0 = z_{n+1} = 0`) are never stored; they are
//! substituted inside the field evaluation.

use crate::error::{Error, Result};

/// Site densities `x_1..x_n`, each in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RfmState {
    x: Vec<f64>,
}

impl RfmState {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::InvalidState("an RFM needs at least one site".into()));
        }
        check_unit_cube(&x)?;
        Ok(RfmState { x })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.x
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.x
    }
}

/// Instantaneous transition rates `u_0..u_n`, all strictly positive.
#[derive(Clone, Debug, PartialEq)]
pub struct RateValues {
    u: Vec<f64>,
}

impl RateValues {
    pub fn new(u: Vec<f64>) -> Result<Self> {
        if u.len() < 2 {
            return Err(Error::InvalidArgument(
                "rates need at least two channels (u_0 and u_1)".into(),
            ));
        }
        if let Some((i, &v)) = u
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0) || !v.is_finite())
        {
            return Err(Error::NonPositiveRate {
                channel: i,
                t: f64::NAN,
                value: v,
            });
        }
        Ok(RateValues { u })
    }

    /// Number of sites served by these rates.
    pub fn n(&self) -> usize {
        self.u.len() - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.u
    }
}

/// Deviation `z = x - e` from a reference equilibrium.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedState {
    z: Vec<f64>,
    e: Vec<f64>,
}

impl ShiftedState {
    pub fn new(z: Vec<f64>, e: Vec<f64>) -> Result<Self> {
        if z.len() != e.len() {
            return Err(Error::Dimension {
                what: "shifted state vs equilibrium",
                expected: e.len(),
                got: z.len(),
            });
        }
        if z.is_empty() {
            return Err(Error::InvalidState("an RFM needs at least one site".into()));
        }
        for (i, (zi, ei)) in z.iter().zip(&e).enumerate() {
            let x = zi + ei;
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::InvalidState(format!(
                    "z_{} + e_{} = {x} lies outside [0, 1]",
                    i + 1,
                    i + 1
                )));
            }
        }
        Ok(ShiftedState { z, e })
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn e(&self) -> &[f64] {
        &self.e
    }

    /// The unshifted state `z + e`.
    pub fn to_state(&self) -> RfmState {
        RfmState {
            x: self.z.iter().zip(&self.e).map(|(z, e)| z + e).collect(),
        }
    }
}

fn check_unit_cube(x: &[f64]) -> Result<()> {
    match x.iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(i) => Err(Error::InvalidState(format!(
            "x_{} = {} lies outside [0, 1]",
            i + 1,
            x[i]
        ))),
        None => Ok(()),
    }
}

fn check_rates_for(n: usize, rates: &RateValues) -> Result<()> {
    if rates.u.len() != n + 1 {
        return Err(Error::Dimension {
            what: "rate vector",
            expected: n + 1,
            got: rates.u.len(),
        });
    }
    Ok(())
}

/// `dx/dt` of the RFM.
pub fn rfm_vector_field(state: &RfmState, rates: &RateValues) -> Result<Vec<f64>> {
    check_rates_for(state.n(), rates)?;
    let mut dx = vec![0.0; state.n()];
    rfm_field_into(&state.x, &rates.u, &mut dx);
    Ok(dx)
}

/// Allocation-free RFM field. `u.len()` must be `x.len() + 1`.
///
/// Written in flux form: with `J_0 = u_0 (1 - x_1)`,
/// `J_i = u_i x_i (1 - x_{i+1})` and `J_n = u_n x_n`, site `i` changes by
/// `J_{i-1} - J_i`.
#[inline]
pub fn rfm_field_into(x: &[f64], u: &[f64], dx: &mut [f64]) {
    let n = x.len();
    debug_assert_eq!(u.len(), n + 1);
    debug_assert_eq!(dx.len(), n);
    let mut inflow = u[0] * (1.0 - x[0]);
    for i in 0..n {
        let room_next = if i + 1 < n { 1.0 - x[i + 1] } else { 1.0 };
        let outflow = u[i + 1] * x[i] * room_next;
        dx[i] = inflow - outflow;
        inflow = outflow;
    }
}

/// `dz/dt` of the RFM written in the shifted variables `z = x - e`.
///
/// Evaluated term by term in `z` and `e` rather than by forming `z + e`, so
/// that comparing it with [`rfm_vector_field`] is a genuine check.
pub fn shifted_vector_field(zstate: &ShiftedState, rates: &RateValues) -> Result<Vec<f64>> {
    let n = zstate.z.len();
    check_rates_for(n, rates)?;
    let (z, e, u) = (&zstate.z, &zstate.e, &rates.u);
    // (z_j, e_j) for j = 0..=n+1 with the boundary conventions.
    let at = |j: usize| -> (f64, f64) {
        if j == 0 {
            (0.0, 1.0)
        } else if j == n + 1 {
            (0.0, 0.0)
        } else {
            (z[j - 1], e[j - 1])
        }
    };
    let dz = (1..=n)
        .map(|i| {
            let (zp, ep) = at(i - 1);
            let (zi, ei) = at(i);
            let (zn, en) = at(i + 1);
            u[i - 1] * (zp + ep) * (1.0 - zi - ei) - u[i] * (zi + ei) * (1.0 - zn - en)
        })
        .collect();
    Ok(dz)
}

/// Right-hand side of the scalar demo `x' = 1 - (3/2) tanh(x) + u`.
#[inline]
pub fn tanh_demo_field(x: f64, u: f64) -> f64 {
    1.0 - 1.5 * x.tanh() + u
}

/// A finite-dimensional control system `x' = f(x, u)` with a scalar output,
/// integrable by [`crate::integrator`].
pub trait Dynamics: Sync {
    fn dim(&self) -> usize;

    /// Number of input channels expected by [`Dynamics::field`].
    fn inputs(&self) -> usize;

    fn field(&self, x: &[f64], u: &[f64], dx: &mut [f64]);

    /// The output whose average is being compared (production rate for the
    /// RFM, the state itself for the demo).
    fn output(&self, x: &[f64], u: &[f64]) -> f64;

    /// Forward-invariant box for each component; the integrator clamps to it.
    fn bounds(&self) -> (f64, f64);

    fn check_state(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                what: "initial state",
                expected: self.dim(),
                got: x.len(),
            });
        }
        let (lo, hi) = self.bounds();
        match x.iter().position(|v| !(lo..=hi).contains(v)) {
            Some(i) => Err(Error::InvalidState(format!(
                "component {} = {} lies outside [{lo}, {hi}]",
                i + 1,
                x[i]
            ))),
            None => Ok(()),
        }
    }
}

/// The n-site ribosome flow model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rfm {
    n: usize,
}

impl Rfm {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "an RFM needs at least one site".into(),
            ));
        }
        Ok(Rfm { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

impl Dynamics for Rfm {
    fn dim(&self) -> usize {
        self.n
    }

    fn inputs(&self) -> usize {
        self.n + 1
    }

    #[inline]
    fn field(&self, x: &[f64], u: &[f64], dx: &mut [f64]) {
        debug_assert!(
            x.iter().all(|v| (-1e-9..=1.0 + 1e-9).contains(v)),
            "RFM state left the unit cube: {x:?}"
        );
        rfm_field_into(x, u, dx);
    }

    #[inline]
    fn output(&self, x: &[f64], u: &[f64]) -> f64 {
        u[self.n] * x[self.n - 1]
    }

    fn bounds(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
}

/// Scalar demo system `x' = 1 - (3/2) tanh(x) + u`, `y = x`, on `x >= 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TanhDemo;

impl TanhDemo {
    /// Equilibrium under the constant input `u`, i.e. `atanh((1 + u) / 1.5)`.
    pub fn equilibrium(&self, u: f64) -> Result<f64> {
        let s = (1.0 + u) / 1.5;
        if !(0.0..1.0).contains(&s) {
            return Err(Error::InvalidArgument(format!(
                "constant input {u} gives no equilibrium in x >= 0"
            )));
        }
        Ok(s.atanh())
    }
}

impl Dynamics for TanhDemo {
    fn dim(&self) -> usize {
        1
    }

    fn inputs(&self) -> usize {
        1
    }

    #[inline]
    fn field(&self, x: &[f64], u: &[f64], dx: &mut [f64]) {
        dx[0] = tanh_demo_field(x[0], u[0]);
    }

    fn output(&self, x: &[f64], _u: &[f64]) -> f64 {
        x[0]
    }

    fn bounds(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(x: &[f64]) -> RfmState {
        RfmState::new(x.to_vec()).unwrap()
    }

    fn rates(u: &[f64]) -> RateValues {
        RateValues::new(u.to_vec()).unwrap()
    }

    #[test]
    fn single_site_symmetric_fixed_point() {
        let dx = rfm_vector_field(&state(&[0.5]), &rates(&[1.0, 1.0])).unwrap();
        assert_eq!(dx, vec![0.0]);
    }

    #[test]
    fn two_sites_direct_substitution() {
        // x' = 1(1-.25) - 2(.25)(1-.5) = 0.5 ; 2(.25)(.5) - 3(.5) = -1.25
        let dx = rfm_vector_field(&state(&[0.25, 0.5]), &rates(&[1.0, 2.0, 3.0])).unwrap();
        assert!((dx[0] - 0.5).abs() < 1e-15);
        assert!((dx[1] + 1.25).abs() < 1e-15);
    }

    #[test]
    fn three_site_field_matches_written_out_equations() {
        let x = [0.2, 0.7, 0.4];
        let u = [1.3, 0.8, 2.1, 0.6];
        let dx = rfm_vector_field(&state(&x), &rates(&u)).unwrap();
        let expected = [
            u[0] * (1.0 - x[0]) - u[1] * x[0] * (1.0 - x[1]),
            u[1] * x[0] * (1.0 - x[1]) - u[2] * x[1] * (1.0 - x[2]),
            u[2] * x[1] * (1.0 - x[2]) - u[3] * x[2],
        ];
        for (a, b) in dx.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let err = rfm_vector_field(&state(&[0.5, 0.5]), &rates(&[1.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn states_outside_the_cube_are_rejected() {
        assert!(RfmState::new(vec![0.5, 1.2]).is_err());
        assert!(RfmState::new(vec![]).is_err());
        assert!(RateValues::new(vec![1.0, 0.0]).is_err());
        assert!(ShiftedState::new(vec![0.6], vec![0.5]).is_err());
    }

    #[test]
    fn shifted_field_single_site() {
        let z = ShiftedState::new(vec![0.1], vec![0.5]).unwrap();
        let dz = shifted_vector_field(&z, &rates(&[1.0, 1.0])).unwrap();
        assert!((dz[0] + 0.2).abs() < 1e-15);
    }

    #[test]
    fn shifted_field_vanishes_at_equilibrium() {
        // u = (1, 1): e_1 = 1/2.
        let z = ShiftedState::new(vec![0.0], vec![0.5]).unwrap();
        let dz = shifted_vector_field(&z, &rates(&[1.0, 1.0])).unwrap();
        assert_eq!(dz, vec![0.0]);
    }

    #[test]
    fn tanh_demo_values() {
        assert!(tanh_demo_field((2.0f64 / 3.0).atanh(), 0.0).abs() < 1e-15);
        assert_eq!(tanh_demo_field(0.0, 0.0), 1.0);
        assert_eq!(tanh_demo_field(0.0, -1.0), 0.0);
        let e = TanhDemo.equilibrium(0.0).unwrap();
        assert!((e - 0.8047).abs() < 5e-5);
        assert!(TanhDemo.equilibrium(0.6).is_err());
    }
}
