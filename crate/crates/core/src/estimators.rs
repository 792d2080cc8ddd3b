//! Pick-freeze moment estimates and the index ratio.
//!
//! With `Q̂_m(X⁽ⁱ⁾)` the mean of `m` repetitions at exploration `i` and
//! `Q̃_m` the same at the pick-frozen point `(X̃_{∼u}⁽ⁱ⁾, X_u⁽ⁱ⁾)`:
//!
//! ```text
//! θ̂1 = mean_i Q̂_m(X⁽ⁱ⁾)²
//! θ̂2 = mean_i Q̂_m(X⁽ⁱ⁾)
//! θ̂3 = mean_i Q̂_m(X⁽ⁱ⁾) Q̃_m(X̃_{∼u}⁽ⁱ⁾, X_u⁽ⁱ⁾)
//! S_u ≈ g(θ̂) = (θ̂3 - θ̂2²) / (θ̂1 - θ̂2²)
//! ```
//!
//! `g` is unbounded near `θ1 = θ2²`; the regularized `g_h` shifts the
//! denominator by `h`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Group;

/// Below this absolute value the raw denominator is treated as zero.
pub const DEGENERACY_TOLERANCE: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaTriple {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

impl ThetaTriple {
    pub const fn new(theta1: f64, theta2: f64, theta3: f64) -> Self {
        ThetaTriple {
            theta1,
            theta2,
            theta3,
        }
    }

    /// `θ1 - θ2²`, the variance estimate in the denominator.
    pub fn denominator(&self) -> f64 {
        self.theta1 - self.theta2 * self.theta2
    }

    /// `θ3 - θ2²`.
    pub fn numerator(&self) -> f64 {
        self.theta3 - self.theta2 * self.theta2
    }

    fn checked_denominator(&self) -> Result<f64> {
        let d = self.denominator();
        if d > DEGENERACY_TOLERANCE {
            Ok(d)
        } else {
            Err(Error::DegenerateDenominator { denominator: d })
        }
    }
}

/// `n × m` repetitions, row-major, with cached row means.
#[derive(Debug, Clone, PartialEq)]
pub struct RepetitionBlock {
    n: usize,
    m: usize,
    values: Vec<f64>,
    row_means: Vec<f64>,
}

impl RepetitionBlock {
    pub fn new(n: usize, m: usize, values: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::ShapeMismatch(
                "a block needs at least one repetition".into(),
            ));
        }
        if values.len() != n * m {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {n}x{m} block",
                values.len()
            )));
        }
        let row_means = values
            .chunks_exact(m)
            .map(|row| row.iter().fold(0.0, |acc, v| acc + v) / m as f64)
            .collect();
        Ok(RepetitionBlock {
            n,
            m,
            values,
            row_means,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        Self::new(rows.len(), m, rows.concat())
    }

    pub fn explorations(&self) -> usize {
        self.n
    }

    pub fn repetitions(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    pub fn row_means(&self) -> &[f64] {
        &self.row_means
    }

    /// Applies `v ↦ a v + b` to every entry.
    pub fn map_affine(&self, a: f64, b: f64) -> Self {
        let values = self.values.iter().map(|v| a * v + b).collect();
        Self::new(self.n, self.m, values).expect("shape preserved")
    }
}

/// Empirical moment triple from the base block and the pick-frozen block of
/// one group. Sums run in ascending exploration order.
pub fn theta_hat(base: &RepetitionBlock, frozen: &RepetitionBlock) -> Result<ThetaTriple> {
    if base.n != frozen.n || base.m != frozen.m {
        return Err(Error::ShapeMismatch(format!(
            "base is {}x{}, frozen is {}x{}",
            base.n, base.m, frozen.n, frozen.m
        )));
    }
    if base.n == 0 {
        return Err(Error::ShapeMismatch("no explorations".into()));
    }
    let (mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0);
    for (q, qt) in base.row_means.iter().zip(&frozen.row_means) {
        s1 += q * q;
        s2 += q;
        s3 += q * qt;
    }
    let n = base.n as f64;
    Ok(ThetaTriple::new(s1 / n, s2 / n, s3 / n))
}

/// `(θ3 - θ2²) / (θ1 - θ2²)`.
pub fn g(theta: &ThetaTriple) -> Result<f64> {
    let d = theta.checked_denominator()?;
    Ok(theta.numerator() / d)
}

/// `g(θ + h (1, 0, 0))` for `h ∈ (0, 1)`.
pub fn g_shift(theta: &ThetaTriple, h: f64) -> Result<f64> {
    check_shift(h)?;
    let shifted = ThetaTriple {
        theta1: theta.theta1 + h,
        ..*theta
    };
    g(&shifted)
}

pub(crate) fn check_shift(h: f64) -> Result<()> {
    if h > 0.0 && h < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "regularization shift h must lie in (0, 1), got {h}"
        )))
    }
}

pub fn grad_g(theta: &ThetaTriple) -> Result<[f64; 3]> {
    let d = theta.checked_denominator()?;
    let ThetaTriple {
        theta1,
        theta2,
        theta3,
    } = *theta;
    let d2 = d * d;
    Ok([
        -theta.numerator() / d2,
        2.0 * theta2 * (theta3 - theta1) / d2,
        1.0 / d,
    ])
}

pub fn hessian_g(theta: &ThetaTriple) -> Result<[[f64; 3]; 3]> {
    let d = theta.checked_denominator()?;
    let ThetaTriple {
        theta1,
        theta2,
        theta3,
    } = *theta;
    let t2sq = theta2 * theta2;
    let d2 = d * d;
    let d3 = d2 * d;
    let h11 = 2.0 * (theta3 - t2sq) / d3;
    let h12 = 2.0 * theta2 * (theta1 - 2.0 * theta3 + t2sq) / d3;
    let h13 = -1.0 / d2;
    let h22 = 2.0 * (theta3 - theta1) * (theta1 + 3.0 * t2sq) / d3;
    let h23 = 2.0 * theta2 / d2;
    Ok([[h11, h12, h13], [h12, h22, h23], [h13, h23, 0.0]])
}

/// Which of the two reported values to use downstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexChoice {
    Raw,
    #[default]
    Regularized,
}

/// First-order index estimate of one group. `raw` is `None` when the sample
/// variance of the base row means is degenerate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolEstimate {
    pub group: Group,
    pub raw: Option<f64>,
    pub regularized: f64,
    pub h: f64,
    pub n: u64,
    pub m: u64,
    pub theta: ThetaTriple,
}

impl SobolEstimate {
    pub fn from_theta(group: Group, theta: ThetaTriple, h: f64, n: u64, m: u64) -> Result<Self> {
        let regularized = g_shift(&theta, h)?;
        let raw = match g(&theta) {
            Ok(v) => Some(v),
            Err(Error::DegenerateDenominator { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(SobolEstimate {
            group,
            raw,
            regularized,
            h,
            n,
            m,
            theta,
        })
    }

    pub fn value(&self, choice: IndexChoice) -> Option<f64> {
        match choice {
            IndexChoice::Raw => self.raw,
            IndexChoice::Regularized => Some(self.regularized),
        }
    }
}

/// `T_u = 1 - S_{∼u}`, from an estimate made for the complement group.
pub fn total_from_complement(s_complement: &SobolEstimate, choice: IndexChoice) -> Result<f64> {
    s_complement.value(choice).map(|s| 1.0 - s).ok_or_else(|| {
        Error::invalid(format!(
            "raw estimate for group {} is undefined",
            s_complement.group
        ))
    })
}

/// Limit of `Ŝ_u` as `n → ∞` with `m` held fixed:
/// `S_u [1 - EVar / (EVar + m VarE)]`, where `EVar = E Var(φ | X)` and
/// `VarE = Var E(φ | X)`.
pub fn asymptotic_plateau(s_true: f64, evar: f64, vare: f64, m: u64) -> f64 {
    s_true * (1.0 - evar / (evar + m as f64 * vare))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn block(rows: &[&[f64]]) -> RepetitionBlock {
        RepetitionBlock::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn theta_by_hand() {
        let base = block(&[&[1.0], &[3.0]]);
        let frozen = block(&[&[2.0], &[0.0]]);
        assert_eq!(
            theta_hat(&base, &frozen).unwrap(),
            ThetaTriple::new(5.0, 2.0, 1.0)
        );
    }

    #[test]
    fn identical_branches_give_theta3_equal_theta1() {
        let base = block(&[&[1.0, 2.0], &[-0.5, 4.0], &[3.25, 3.0]]);
        let t = theta_hat(&base, &base.clone()).unwrap();
        assert_eq!(t.theta3, t.theta1);
        assert_eq!(g(&t).unwrap(), 1.0);
    }

    #[test]
    fn theta_shape_errors() {
        let a = block(&[&[1.0, 2.0]]);
        let b = block(&[&[1.0], &[2.0]]);
        assert!(matches!(theta_hat(&a, &b), Err(Error::ShapeMismatch(_))));
        let empty = RepetitionBlock::new(0, 2, vec![]).unwrap();
        assert!(theta_hat(&empty, &empty).is_err());
        assert!(RepetitionBlock::new(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn row_means_accumulate_left_to_right() {
        let row = [0.1, 0.2, 0.3, 1e16, -1e16];
        let b = block(&[&row]);
        let expected: f64 = ((((0.1 + 0.2) + 0.3) + 1e16) - 1e16) / 5.0;
        assert_eq!(b.row_means()[0].to_bits(), expected.to_bits());
    }

    #[test]
    fn g_values() {
        assert_eq!(g(&ThetaTriple::new(2.0, 1.0, 1.5)).unwrap(), 0.5);
        assert_relative_eq!(
            g(&ThetaTriple::new(6.0, 1.0, 2.0)).unwrap(),
            0.2,
            max_relative = 1e-15
        );
        assert!(matches!(
            g(&ThetaTriple::new(1.0, 1.0, 1.0)),
            Err(Error::DegenerateDenominator { .. })
        ));
    }

    #[test]
    fn g_shift_values() {
        assert_relative_eq!(
            g_shift(&ThetaTriple::new(2.0, 1.0, 1.5), 0.5).unwrap(),
            1.0 / 3.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            g_shift(&ThetaTriple::new(6.0, 1.0, 2.0), 0.01).unwrap(),
            1.0 / 5.01,
            max_relative = 1e-15
        );
        assert_eq!(
            g_shift(&ThetaTriple::new(1.0, 1.0, 1.0), 0.01).unwrap(),
            0.0
        );
        for h in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(g_shift(&ThetaTriple::new(2.0, 1.0, 1.5), h).is_err());
        }
    }

    #[test]
    fn gradient_values() {
        let gr = grad_g(&ThetaTriple::new(6.0, 1.0, 2.0)).unwrap();
        for (a, b) in gr.iter().zip([-0.04, -0.32, 0.2]) {
            assert_relative_eq!(*a, b, max_relative = 1e-12);
        }
        assert_eq!(grad_g(&ThetaTriple::new(3.0, 1.0, 1.0)).unwrap()[0], 0.0);
        assert_eq!(grad_g(&ThetaTriple::new(3.0, 0.0, 1.0)).unwrap()[1], 0.0);
        assert!(grad_g(&ThetaTriple::new(1.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn hessian_values() {
        let h = hessian_g(&ThetaTriple::new(6.0, 1.0, 2.0)).unwrap();
        assert_relative_eq!(h[0][0], 2.0 / 125.0, max_relative = 1e-12);
        assert_relative_eq!(h[0][1], 6.0 / 125.0, max_relative = 1e-12);
        assert_relative_eq!(h[0][2], -0.04, max_relative = 1e-12);
        assert_relative_eq!(h[1][1], -72.0 / 125.0, max_relative = 1e-12);
        assert_relative_eq!(h[1][2], 2.0 / 25.0, max_relative = 1e-12);
        assert_eq!(h[2][2], 0.0);
        for (i, row) in h.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(*v, h[j][i]);
            }
        }
        assert!(hessian_g(&ThetaTriple::new(1.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn estimate_reports_undefined_raw() {
        let e = SobolEstimate::from_theta(
            Group::new(&[1]).unwrap(),
            ThetaTriple::new(1.0, 1.0, 1.0),
            0.01,
            4,
            2,
        )
        .unwrap();
        assert_eq!(e.raw, None);
        assert_eq!(e.regularized, 0.0);
        assert!(total_from_complement(&e, IndexChoice::Raw).is_err());
        assert_eq!(
            total_from_complement(&e, IndexChoice::Regularized).unwrap(),
            1.0
        );
    }

    #[test]
    fn totals() {
        let mk = |s: f64| SobolEstimate {
            group: Group::new(&[2]).unwrap(),
            raw: Some(s),
            regularized: s,
            h: 0.01,
            n: 1,
            m: 1,
            theta: ThetaTriple::new(0.0, 0.0, 0.0),
        };
        assert_relative_eq!(
            total_from_complement(&mk(0.8), IndexChoice::Raw).unwrap(),
            0.2,
            max_relative = 1e-12
        );
        assert_eq!(
            total_from_complement(&mk(0.0), IndexChoice::Raw).unwrap(),
            1.0
        );
    }

    #[test]
    fn plateau() {
        assert_relative_eq!(
            asymptotic_plateau(0.2, 1.0, 5.0, 5),
            0.2 * 25.0 / 26.0,
            max_relative = 1e-15
        );
        assert_eq!(asymptotic_plateau(0.2, 0.0, 5.0, 5), 0.2);
        assert!((asymptotic_plateau(0.2, 1.0, 5.0, 1_000_000_000) - 0.2).abs() < 1e-8);
    }

    fn rows_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, usize)> {
        (2usize..12, 1usize..5).prop_flat_map(|(n, m)| {
            (
                prop::collection::vec(-10.0..10.0f64, n * m),
                prop::collection::vec(-10.0..10.0f64, n * m),
                Just(m),
            )
        })
    }

    proptest! {
        #[test]
        fn scale_invariance_of_raw_ratio((b, f, m) in rows_strategy(), a in 0.5..4.0f64) {
            let n = b.len() / m;
            let base = RepetitionBlock::new(n, m, b).unwrap();
            let frozen = RepetitionBlock::new(n, m, f).unwrap();
            let t = theta_hat(&base, &frozen).unwrap();
            prop_assume!(t.denominator() > 1e-6);
            let t2 = theta_hat(&base.map_affine(a, 0.0), &frozen.map_affine(a, 0.0)).unwrap();
            let (r1, r2) = (g(&t).unwrap(), g(&t2).unwrap());
            prop_assert!((r1 - r2).abs() <= 1e-9 * (1.0 + r1.abs()), "{r1} vs {r2}");
            // the shift h does not scale with a², so g_h is not invariant
            prop_assume!(t.numerator().abs() > 1e-6 && (a - 1.0).abs() > 1e-3);
            prop_assert!(g_shift(&t, 0.01).unwrap() != g_shift(&t2, 0.01).unwrap());
        }

        #[test]
        fn translation_moves_numerator_by_frozen_mean_gap((b, f, m) in rows_strategy(), a in 0.5..4.0f64, shift in -5.0..5.0f64) {
            // θ3 - θ2² maps to a²(θ3 - θ2²) + a b (mean Q̃ - θ2); the ratio is
            // translation invariant only when the two branch means agree.
            let n = b.len() / m;
            let base = RepetitionBlock::new(n, m, b).unwrap();
            let frozen = RepetitionBlock::new(n, m, f).unwrap();
            let t = theta_hat(&base, &frozen).unwrap();
            let t2 = theta_hat(&base.map_affine(a, shift), &frozen.map_affine(a, shift)).unwrap();
            let frozen_mean = frozen.row_means().iter().sum::<f64>() / n as f64;
            let expected = a * a * t.numerator() + a * shift * (frozen_mean - t.theta2);
            prop_assert!((t2.numerator() - expected).abs() <= 1e-9 * (1.0 + expected.abs() + t2.theta1.abs()));
            prop_assert!((t2.denominator() - a * a * t.denominator()).abs() <= 1e-9 * (1.0 + t2.theta1.abs()));
        }

        #[test]
        fn empirical_variance_is_nonnegative((b, f, m) in rows_strategy()) {
            let n = b.len() / m;
            let t = theta_hat(&RepetitionBlock::new(n, m, b).unwrap(), &RepetitionBlock::new(n, m, f).unwrap()).unwrap();
            prop_assert!(t.denominator() >= -1e-12 * t.theta1.abs().max(1.0));
        }

        #[test]
        fn equal_row_means_give_zero_variance(c in -10i32..10, n in 1usize..10, m in 1usize..4) {
            let v = vec![c as f64; n * m];
            let b = RepetitionBlock::new(n, m, v).unwrap();
            let t = theta_hat(&b, &b).unwrap();
            prop_assert_eq!(t.denominator(), 0.0);
        }

        #[test]
        fn shift_orders_below_raw(t1 in 0.1..10.0f64, t2 in -2.0..2.0f64, frac in 0.0..1.0f64, h in 0.001..0.999f64) {
            let d = t1;
            let theta = ThetaTriple::new(d + t2 * t2, t2, t2 * t2 + frac * d);
            let raw = g(&theta).unwrap();
            let reg = g_shift(&theta, h).unwrap();
            if theta.numerator() > 0.0 {
                prop_assert!(reg < raw);
            } else {
                prop_assert!(reg <= raw);
            }
            let bumped = ThetaTriple { theta1: theta.theta1 + h, ..theta };
            prop_assert_eq!(reg.to_bits(), g(&bumped).unwrap().to_bits());
        }
    }
}
