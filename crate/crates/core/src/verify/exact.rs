//! Robust orientation predicate.

use std::cmp::Ordering;

use nalgebra::Point2;
use num_bigint::BigInt;

/// Mantissa and binary exponent with `x = m · 2^e` exactly.
fn split(x: f64) -> (i64, i32) {
    if x == 0.0 {
        return (0, 0);
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { -1 } else { 1 };
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = (bits & ((1u64 << 52) - 1)) as i64;
    let (m, e) = if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1 << 52), exp - 1075)
    };
    (sign * m, e)
}

fn exact_sign(a: &Point2<f64>, b: &Point2<f64>, c: &Point2<f64>) -> Ordering {
    let coords = [a.x, a.y, b.x, b.y, c.x, c.y].map(split);
    let base = coords
        .iter()
        .filter(|(m, _)| *m != 0)
        .map(|&(_, e)| e)
        .min()
        .unwrap_or(0);
    let big: Vec<BigInt> = coords
        .iter()
        .map(|&(m, e)| {
            if m == 0 {
                BigInt::from(0)
            } else {
                BigInt::from(m) << ((e - base) as usize)
            }
        })
        .collect();
    let (ax, ay, bx, by, cx, cy) = (&big[0], &big[1], &big[2], &big[3], &big[4], &big[5]);
    let det = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
    det.sign().cmp_zero()
}

trait CmpZero {
    fn cmp_zero(self) -> Ordering;
}

impl CmpZero for num_bigint::Sign {
    fn cmp_zero(self) -> Ordering {
        match self {
            num_bigint::Sign::Minus => Ordering::Less,
            num_bigint::Sign::NoSign => Ordering::Equal,
            num_bigint::Sign::Plus => Ordering::Greater,
        }
    }
}

/// Sign of `(b − a) × (c − a)`: `Greater` for a left turn. Exact for all
/// finite inputs; the floating-point value is used when its error bound
/// allows.
pub fn orient2d(a: &Point2<f64>, b: &Point2<f64>, c: &Point2<f64>) -> Ordering {
    let l = (b.x - a.x) * (c.y - a.y);
    let r = (b.y - a.y) * (c.x - a.x);
    let det = l - r;
    let bound = 3.3306690738754716e-16 * (l.abs() + r.abs());
    if det > bound {
        Ordering::Greater
    } else if -det > bound {
        Ordering::Less
    } else {
        exact_sign(a, b, c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn simple_turns() {
        let (a, b) = (Point2::new(0.0, 0.0), Point2::new(1.0, 0.0));
        assert_eq!(orient2d(&a, &b, &Point2::new(0.5, 1.0)), Ordering::Greater);
        assert_eq!(orient2d(&a, &b, &Point2::new(0.5, -1.0)), Ordering::Less);
        assert_eq!(orient2d(&a, &b, &Point2::new(7.0, 0.0)), Ordering::Equal);
    }

    #[test]
    fn near_degenerate_points_on_a_line() {
        // points on y = x with tiny perturbations the float determinant misjudges
        let a = Point2::new(0.5, 0.5);
        let b = Point2::new(12.0, 12.0);
        let c = Point2::new(24.0, 24.0);
        assert_eq!(orient2d(&a, &b, &c), Ordering::Equal);
        let up = Point2::new(24.0, f64::from_bits(24f64.to_bits() + 1));
        assert_eq!(orient2d(&a, &b, &up), Ordering::Greater);
        let down = Point2::new(24.0, f64::from_bits(24f64.to_bits() - 1));
        assert_eq!(orient2d(&a, &b, &down), Ordering::Less);
    }

    proptest! {
        #[test]
        fn antisymmetric_and_matches_exact(ax in -1e3..1e3f64, ay in -1e3..1e3f64, bx in -1e3..1e3f64,
                                           by in -1e3..1e3f64, t in 0.0..1.0f64, k in -4i64..4) {
            let (a, b) = (Point2::new(ax, ay), Point2::new(bx, by));
            // nearly collinear third point
            let c = Point2::new(ax + t * (bx - ax), f64::from_bits(((ay + t * (by - ay)).to_bits() as i64 + k) as u64));
            prop_assume!(c.y.is_finite());
            let s = orient2d(&a, &b, &c);
            prop_assert_eq!(s, exact_sign(&a, &b, &c));
            prop_assert_eq!(orient2d(&b, &a, &c), s.reverse());
            prop_assert_eq!(orient2d(&b, &c, &a), s);
        }
    }
}
